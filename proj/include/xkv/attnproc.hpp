// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/trace.hpp"

#include <cstddef>
#include <span>
#include <vector>

namespace xkv {

struct ProcSettings {
    /// Observation window: the last `ows` prompt tokens act as proxy queries.
    std::size_t ows = 8;
    /// Odd smoothing-kernel width applied to the merged scores.
    std::size_t pool_size = 7;

    /// Throws ValidationError unless 1 <= ows < seq_len, pool_size is odd and
    /// pool_size <= seq_len - ows.
    void validate_for(std::size_t seq_len) const;
};

/// Importance of every non-window token of one layer, index = token position.
struct ScoreVector {
    std::size_t layer = 0;
    std::vector<double> scores;

    std::size_t size() const { return scores.size(); }
};

/// How per-head matrices are combined into one per layer.
enum class HeadReduction { mean, max };

/// Select + Merge: mean over the window rows of the ows x (t - ows) block of
/// non-window columns. Returned length is t - ows.
std::vector<double> merge_window(std::span<const float> weights, std::size_t seq_len, std::size_t ows);

/// Stride-1 average smoothing with zero padding of (pool_size - 1) / 2 on both
/// sides; output has the same length as the input.
std::vector<double> pool_average(std::span<const double> values, std::size_t pool_size);

/// Full Select -> Merge -> Pooling pipeline over one t x t matrix.
ScoreVector process_layer(std::span<const float> weights, std::size_t seq_len, const ProcSettings& settings,
                          std::size_t layer = 0);

/// One ScoreVector per layer; heads are reduced elementwise before the merge.
std::vector<ScoreVector> process_trace(const AttentionTrace& trace, const ProcSettings& settings,
                                       HeadReduction reduction = HeadReduction::mean);

} // namespace xkv
