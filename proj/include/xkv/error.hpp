// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace xkv {

/// Caller supplied something that violates a documented precondition or
/// file-format rule. The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
public:
    explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

/// A numeric quantity is undefined for the given input (all-zero scores,
/// log2 of a size <= 1, constant vectors in a correlation).
class DomainError : public ValidationError {
public:
    explicit DomainError(const std::string& what) : ValidationError(what) {}
};

class IoError : public std::runtime_error {
public:
    explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

} // namespace xkv
