// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace xkv::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInternal = 1;
inline constexpr int kExitValidation = 2;

/// Runs the xkv command line. `args` excludes the program name. Results go
/// to `out`; diagnostics only to `err`.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace xkv::cli
