// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xkv {

/// Dense row-major f32 matrix.
struct Matrix {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<float> data;

    Matrix() = default;
    Matrix(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, 0.0f) {}
    Matrix(std::size_t r, std::size_t c, std::vector<float> values) : rows(r), cols(c), data(std::move(values)) {}

    std::span<float> row(std::size_t i) { return {data.data() + i * cols, cols}; }
    std::span<const float> row(std::size_t i) const { return {data.data() + i * cols, cols}; }

    float& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
    float operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

    std::size_t size_bytes() const { return data.size() * sizeof(float); }

    friend bool operator==(const Matrix&, const Matrix&) = default;
};

} // namespace xkv
