// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/allocator.hpp"

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace xkv {

inline constexpr double kDefaultSampleRatio = 0.10;

/// Allocation lists recorded on sampled tasks of one type, and the averaged
/// list reused for later tasks of that type.
struct AllocationProfile {
    std::string task_type;
    std::vector<AllocationList> samples;
    AllocationList averaged;
    double sample_ratio = kDefaultSampleRatio;
};

/// Per-layer mean with Hamilton (largest-remainder) rounding: each layer
/// gets floor(mean), then the layers with the largest fractional parts get
/// +1 (lower layer first on ties) until the total equals the mean total
/// rounded half up. Computed in integers, so the result is exact.
AllocationList average_allocations(std::span<const AllocationList> samples);

/// Mean pairwise Pearson correlation of the samples' size vectors. Needs at
/// least two samples; a constant vector throws DomainError.
double profile_similarity(std::span<const AllocationList> samples);

/// Pearson correlation of two equally long vectors.
double pearson(std::span<const double> a, std::span<const double> b);

/// How many of `task_count` tasks to sample: ceil(ratio * count), at least 1.
std::size_t sample_count(std::size_t task_count, double ratio);

AllocationProfile build_profile(std::string task_type, std::vector<AllocationList> samples,
                                double sample_ratio = kDefaultSampleRatio);

} // namespace xkv
