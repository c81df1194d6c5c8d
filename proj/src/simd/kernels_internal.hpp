// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/simd.hpp"

namespace xkv::simd::detail {

extern const KernelTable kScalarTable;

#if defined(XKV_HAVE_AVX2)
extern const KernelTable kAvx2Table;
#endif

} // namespace xkv::simd::detail
