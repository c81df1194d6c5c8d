// SPDX-License-Identifier: Apache-2.0

#include "kernels_internal.hpp"

#include <atomic>
#include <cstdlib>
#include <string_view>

namespace xkv::simd {
namespace {

#if defined(XKV_HAVE_AVX2)
bool cpu_has_avx2() {
#if defined(__GNUC__) || defined(__clang__)
    __builtin_cpu_init();
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}
#endif

const KernelTable* pick_default() {
    if (const char* env = std::getenv("XKV_ISA"); env != nullptr && std::string_view(env) == "scalar") {
        return &detail::kScalarTable;
    }
    if (const KernelTable* t = avx2_kernels()) {
        return t;
    }
    return &detail::kScalarTable;
}

std::atomic<const KernelTable*>& active_slot() {
    static std::atomic<const KernelTable*> slot{pick_default()};
    return slot;
}

} // namespace

const KernelTable& scalar_kernels() { return detail::kScalarTable; }

const KernelTable* avx2_kernels() {
#if defined(XKV_HAVE_AVX2)
    static const bool supported = cpu_has_avx2();
    return supported ? &detail::kAvx2Table : nullptr;
#else
    return nullptr;
#endif
}

const KernelTable& kernels() { return *active_slot().load(std::memory_order_acquire); }

bool set_active_isa(Isa isa) {
    const KernelTable* table = nullptr;
    switch (isa) {
    case Isa::scalar: table = &detail::kScalarTable; break;
    case Isa::avx2: table = avx2_kernels(); break;
    }
    if (table == nullptr) {
        return false;
    }
    active_slot().store(table, std::memory_order_release);
    return true;
}

Isa active_isa() { return kernels().isa; }

std::string_view isa_name(Isa isa) {
    switch (isa) {
    case Isa::scalar: return "scalar";
    case Isa::avx2: return "avx2";
    }
    return "unknown";
}

} // namespace xkv::simd
