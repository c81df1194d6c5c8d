// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/allocator.hpp"
#include "xkv/attnproc.hpp"
#include "xkv/tensor.hpp"
#include "xkv/toymodel.hpp"
#include "xkv/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace xkv {

/// Bytes per stored K or V element.
inline constexpr std::size_t kKvElemBytes = 4;

/// Result of simulating compressed prefill on one task.
///
/// The observation window is kept on top of each layer's budget: layer i
/// keeps sizes[i] + ows rows, and the accounting counts those window rows.
struct EvictionReport {
    std::size_t layers = 0;
    std::size_t seq_len = 0;
    std::size_t ows = 0;
    /// Per-token K (or V) width of one layer, in elements.
    std::size_t kv_width = 0;
    std::vector<std::size_t> sizes;
    /// Ascending original positions kept per layer.
    std::vector<std::vector<std::size_t>> retained_indices;
    double compression_ratio = 0.0;
    std::uint64_t bytes_before = 0;
    std::uint64_t bytes_after = 0;
    std::vector<double> per_layer_r;
    double r_avg = 0.0;
    bool window_counted_on_top = true;

    double memory_reduction() const { return 1.0 - compression_ratio; }
};

/// Positions kept for a layer: the top-n scored non-window tokens plus every
/// window position t-ows .. t-1, ascending.
std::vector<std::size_t> select_retained(std::span<const double> scores, std::size_t n, std::size_t seq_len,
                                         std::size_t ows);

/// Copies the given rows of m, in the given order.
Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows);

struct EvictedLayer {
    Matrix keys;
    Matrix values;
    std::vector<std::size_t> retained_indices;
    ScoreVector scores;
};

/// Single-head eviction of one layer: causal softmax(q k^T / sqrt(p)),
/// Select/Merge/Pooling into scores, keep the top n plus the window.
EvictedLayer evict_layer(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n,
                         const ProcSettings& settings);

/// Byte and ratio accounting for an allocation; fills every field except
/// retained_indices, per_layer_r and r_avg.
EvictionReport account(const AllocationList& allocation, std::size_t seq_len, std::size_t ows, std::size_t kv_width);

/// Simulates eviction on a recorded trace; kv_width sizes the byte counts.
EvictionReport simulate_task(const AttentionTrace& trace, const AllocationList& allocation,
                             const ProcSettings& settings, std::size_t kv_width = 128);

struct ToySimulation {
    EvictionReport report;
    /// Compressed cache per layer, rows at report.retained_indices.
    std::vector<LayerKV> compressed;
};

/// Full prefill of the toy model followed by per-layer eviction of its K/V.
ToySimulation simulate_toy(const ToyModel& model, const Matrix& input, const AllocationList& allocation,
                           const ProcSettings& settings);

} // namespace xkv
