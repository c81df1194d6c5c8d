// SPDX-License-Identifier: Apache-2.0

#include "kernels_internal.hpp"

#include <immintrin.h>

#include <limits>

namespace xkv::simd::detail {
namespace {

inline float hsum_ps(__m256 v) {
    __m128 lo = _mm256_castps256_ps128(v);
    __m128 hi = _mm256_extractf128_ps(v, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
}

inline double hsum_pd(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
}

float dot_f32(const float* a, const float* b, std::size_t n) {
    std::size_t i = 0;
    __m256 acc0 = _mm256_setzero_ps();
    __m256 acc1 = _mm256_setzero_ps();
    for (; i + 16 <= n; i += 16) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
        acc1 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i + 8), _mm256_loadu_ps(b + i + 8), acc1);
    }
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_ps(_mm256_loadu_ps(a + i), _mm256_loadu_ps(b + i), acc0);
    }
    float acc = hsum_ps(_mm256_add_ps(acc0, acc1));
    for (; i < n; ++i) {
        acc += a[i] * b[i];
    }
    return acc;
}

float max_f32(const float* x, std::size_t n) {
    float m = -std::numeric_limits<float>::infinity();
    std::size_t i = 0;
    if (n >= 8) {
        __m256 vm = _mm256_set1_ps(m);
        for (; i + 8 <= n; i += 8) {
            vm = _mm256_max_ps(vm, _mm256_loadu_ps(x + i));
        }
        alignas(32) float lanes[8];
        _mm256_store_ps(lanes, vm);
        for (float v : lanes) {
            if (v > m) {
                m = v;
            }
        }
    }
    for (; i < n; ++i) {
        if (x[i] > m) {
            m = x[i];
        }
    }
    return m;
}

double sum_f32_as_f64(const float* x, std::size_t n) {
    std::size_t i = 0;
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_add_pd(acc0, _mm256_cvtps_pd(_mm_loadu_ps(x + i)));
        acc1 = _mm256_add_pd(acc1, _mm256_cvtps_pd(_mm_loadu_ps(x + i + 4)));
    }
    double acc = hsum_pd(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) {
        acc += static_cast<double>(x[i]);
    }
    return acc;
}

void axpy_f32(float alpha, const float* x, float* y, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        const __m256 prod = _mm256_mul_ps(va, _mm256_loadu_ps(x + i));
        _mm256_storeu_ps(y + i, _mm256_add_ps(_mm256_loadu_ps(y + i), prod));
    }
    for (; i < n; ++i) {
        y[i] += alpha * x[i];
    }
}

void scale_f32(float* x, float alpha, std::size_t n) {
    const __m256 va = _mm256_set1_ps(alpha);
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        _mm256_storeu_ps(x + i, _mm256_mul_ps(_mm256_loadu_ps(x + i), va));
    }
    for (; i < n; ++i) {
        x[i] *= alpha;
    }
}

void accumulate_f32_to_f64(const float* src, double* dst, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d s = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), s));
    }
    for (; i < n; ++i) {
        dst[i] += static_cast<double>(src[i]);
    }
}

void max_f32_into_f64(const float* src, double* dst, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        const __m256d s = _mm256_cvtps_pd(_mm_loadu_ps(src + i));
        // max_pd(a, b) returns b when unordered, matching the scalar `v > d ? v : d`.
        _mm256_storeu_pd(dst + i, _mm256_max_pd(s, _mm256_loadu_pd(dst + i)));
    }
    for (; i < n; ++i) {
        const double v = static_cast<double>(src[i]);
        dst[i] = v > dst[i] ? v : dst[i];
    }
}

void add_f64(const double* src, double* dst, std::size_t n) {
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(dst + i, _mm256_add_pd(_mm256_loadu_pd(dst + i), _mm256_loadu_pd(src + i)));
    }
    for (; i < n; ++i) {
        dst[i] += src[i];
    }
}

void scale_f64(double* x, double alpha, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        _mm256_storeu_pd(x + i, _mm256_mul_pd(_mm256_loadu_pd(x + i), va));
    }
    for (; i < n; ++i) {
        x[i] *= alpha;
    }
}

} // namespace

const KernelTable kAvx2Table{
    Isa::avx2,            "avx2",  dot_f32,   max_f32, sum_f32_as_f64, axpy_f32, scale_f32,
    accumulate_f32_to_f64, max_f32_into_f64, add_f64, scale_f64,
};

} // namespace xkv::simd::detail
