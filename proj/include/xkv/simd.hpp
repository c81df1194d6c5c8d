// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string_view>

namespace xkv::simd {

enum class Isa { scalar, avx2 };

// Table of inner-loop kernels. Every ISA variant must agree with the scalar
// reference: elementwise kernels bit-for-bit, reductions within rounding.
struct KernelTable {
    Isa isa;
    const char* name;

    // reductions
    float (*dot_f32)(const float* a, const float* b, std::size_t n);
    float (*max_f32)(const float* x, std::size_t n);
    double (*sum_f32_as_f64)(const float* x, std::size_t n);

    // elementwise
    void (*axpy_f32)(float alpha, const float* x, float* y, std::size_t n);  // y += alpha * x
    void (*scale_f32)(float* x, float alpha, std::size_t n);
    void (*accumulate_f32_to_f64)(const float* src, double* dst, std::size_t n);  // dst += src
    void (*max_f32_into_f64)(const float* src, double* dst, std::size_t n);       // dst = max(dst, src)
    void (*add_f64)(const double* src, double* dst, std::size_t n);               // dst += src
    void (*scale_f64)(double* x, double alpha, std::size_t n);
};

const KernelTable& scalar_kernels();

/// nullptr when the variant was not compiled in or the CPU lacks the feature.
const KernelTable* avx2_kernels();

/// Kernels used by the library. Picks the widest supported ISA on first use;
/// XKV_ISA=scalar in the environment pins the reference path.
const KernelTable& kernels();

/// Overrides the active table. Returns false (and changes nothing) when the
/// requested ISA is unavailable on this machine.
bool set_active_isa(Isa isa);

Isa active_isa();

std::string_view isa_name(Isa isa);

/// Restores the previously active ISA on scope exit. Intended for tests.
class ScopedIsa {
public:
    explicit ScopedIsa(Isa isa) : previous_(active_isa()), ok_(set_active_isa(isa)) {}
    ~ScopedIsa() { set_active_isa(previous_); }
    ScopedIsa(const ScopedIsa&) = delete;
    ScopedIsa& operator=(const ScopedIsa&) = delete;
    bool ok() const { return ok_; }

private:
    Isa previous_;
    bool ok_;
};

} // namespace xkv::simd
