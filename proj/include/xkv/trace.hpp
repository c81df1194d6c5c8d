// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace xkv {

/// Row-sum tolerance for traces produced inside this library.
inline constexpr double kInternalRowSumTolerance = 1e-5;
/// Row-sum tolerance applied on load; accepts half-precision exports.
inline constexpr double kLoadRowSumTolerance = 1e-3;

struct TraceHeader {
    int version = 1;
    std::size_t layers = 0;
    std::size_t heads = 0;
    std::size_t seq_len = 0;
    // dtype is always f32le in version 1

    std::size_t matrix_elems() const { return seq_len * seq_len; }
    std::size_t total_elems() const { return layers * heads * matrix_elems(); }
    std::uint64_t payload_bytes() const { return static_cast<std::uint64_t>(total_elems()) * 4u; }

    /// Throws ValidationError unless layers >= 1, heads >= 1, seq_len >= 2, version == 1.
    void validate() const;

    friend bool operator==(const TraceHeader&, const TraceHeader&) = default;
};

/// Per-layer, per-head causal attention weights of one inference task,
/// stored layer-major, then head, then row-major.
///
/// The constructor only checks shape. Use validate() (done by load_trace and
/// save_trace) to check the causal row-stochastic invariant.
class AttentionTrace {
public:
    AttentionTrace() = default;
    AttentionTrace(TraceHeader header, std::vector<float> weights);

    const TraceHeader& header() const { return header_; }
    std::size_t layers() const { return header_.layers; }
    std::size_t heads() const { return header_.heads; }
    std::size_t seq_len() const { return header_.seq_len; }

    /// The t x t matrix of (layer, head), row-major.
    std::span<const float> matrix(std::size_t layer, std::size_t head) const;
    float at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const;

    std::span<const float> weights() const { return weights_; }

    /// Throws ValidationError naming layer/head/row of the first entry above
    /// the diagonal that is nonzero, the first entry outside [0, 1], or the
    /// first row whose sum is off by more than tolerance.
    void validate(double row_sum_tolerance = kInternalRowSumTolerance) const;

private:
    TraceHeader header_;
    std::vector<float> weights_;
};

/// The single-line JSON header exactly as written to disk, including '\n'.
std::string encode_trace_header(const TraceHeader& header);

/// Parses a header line (without the trailing newline).
TraceHeader decode_trace_header(const std::string& line);

AttentionTrace load_trace(const std::filesystem::path& path);
void save_trace(const AttentionTrace& trace, const std::filesystem::path& path);

struct SyntheticSpec {
    std::size_t layers = 4;
    std::size_t heads = 1;
    std::size_t seq_len = 64;
    /// Fraction of columns carrying most of the mass, in (0, 1].
    double sparsity = 0.1;
    std::uint64_t seed = 0;
    /// Cross-layer variation of the heavy column set and of its size. 0 makes
    /// every layer identical.
    double layer_skew = 1.0;

    void validate() const;
};

/// Deterministic causal row-stochastic trace with a sparse set of heavy
/// columns per layer.
AttentionTrace generate_trace(const SyntheticSpec& spec);

} // namespace xkv
