// SPDX-License-Identifier: Apache-2.0

#include "kernels_internal.hpp"

#include <limits>

namespace xkv::simd::detail {
namespace {

float dot_f32(const float* a, const float* b, std::size_t n) {
    float acc = 0.0f;
    for (std::size_t i = 0; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

float max_f32(const float* x, std::size_t n) {
    float m = -std::numeric_limits<float>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        if (x[i] > m) {
            m = x[i];
        }
    }
    return m;
}

double sum_f32_as_f64(const float* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        acc += static_cast<double>(x[i]);
    }
    return acc;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void scale_f32(float* x, float alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= alpha;
    }
}

void accumulate_f32_to_f64(const float* src, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        dst[i] += static_cast<double>(src[i]);
    }
}

void max_f32_into_f64(const float* src, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        const double v = static_cast<double>(src[i]);
        dst[i] = v > dst[i] ? v : dst[i];
    }
}

void add_f64(const double* src, double* dst, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        dst[i] += src[i];
    }
}

void scale_f64(double* x, double alpha, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) {
        x[i] *= alpha;
    }
}

} // namespace

const KernelTable kScalarTable{
    Isa::scalar,          "scalar",  dot_f32,   max_f32, sum_f32_as_f64, axpy_f32, scale_f32,
    accumulate_f32_to_f64, max_f32_into_f64, add_f64, scale_f64,
};

} // namespace xkv::simd::detail
