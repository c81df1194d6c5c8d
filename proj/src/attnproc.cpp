// SPDX-License-Identifier: Apache-2.0

#include "xkv/attnproc.hpp"

#include "xkv/error.hpp"
#include "xkv/simd.hpp"

#include <limits>
#include <string>

namespace xkv {
namespace {

// Reduces the heads of one layer over the window block: ows rows, first
// t - ows columns each. Result is row-major ows x (t - ows) in double.
std::vector<double> reduce_window_block(const AttentionTrace& trace, std::size_t layer, std::size_t ows,
                                        HeadReduction reduction) {
    const std::size_t t = trace.seq_len();
    const std::size_t cols = t - ows;
    const auto& k = simd::kernels();
    const double init = reduction == HeadReduction::max ? -std::numeric_limits<double>::infinity() : 0.0;
    std::vector<double> block(ows * cols, init);
    for (std::size_t h = 0; h < trace.heads(); ++h) {
        const auto m = trace.matrix(layer, h);
        for (std::size_t r = 0; r < ows; ++r) {
            const float* src = m.data() + (cols + r) * t;
            double* dst = block.data() + r * cols;
            if (reduction == HeadReduction::mean) {
                k.accumulate_f32_to_f64(src, dst, cols);
            } else {
                k.max_f32_into_f64(src, dst, cols);
            }
        }
    }
    if (reduction == HeadReduction::mean && trace.heads() > 1) {
        k.scale_f64(block.data(), 1.0 / static_cast<double>(trace.heads()), block.size());
    }
    return block;
}

std::vector<double> merge_block(std::span<const double> block, std::size_t ows, std::size_t cols) {
    const auto& k = simd::kernels();
    std::vector<double> merged(cols, 0.0);
    for (std::size_t r = 0; r < ows; ++r) {
        k.add_f64(block.data() + r * cols, merged.data(), cols);
    }
    k.scale_f64(merged.data(), 1.0 / static_cast<double>(ows), cols);
    return merged;
}

} // namespace

void ProcSettings::validate_for(std::size_t seq_len) const {
    if (ows < 1 || ows >= seq_len) {
        throw ValidationError("observation window " + std::to_string(ows) + " must satisfy 1 <= ows < seq_len (" +
                              std::to_string(seq_len) + ")");
    }
    if (pool_size < 1 || pool_size % 2 == 0) {
        throw ValidationError("pool size must be odd and >= 1, got " + std::to_string(pool_size));
    }
    if (pool_size > seq_len - ows) {
        throw ValidationError("pool size " + std::to_string(pool_size) + " exceeds the " +
                              std::to_string(seq_len - ows) + " non-window tokens");
    }
}

std::vector<double> merge_window(std::span<const float> weights, std::size_t seq_len, std::size_t ows) {
    if (weights.size() != seq_len * seq_len) {
        throw ValidationError("attention matrix is not seq_len x seq_len");
    }
    if (ows < 1 || ows >= seq_len) {
        throw ValidationError("observation window must satisfy 1 <= ows < seq_len");
    }
    const std::size_t cols = seq_len - ows;
    const auto& k = simd::kernels();
    std::vector<double> block(ows * cols, 0.0);
    for (std::size_t r = 0; r < ows; ++r) {
        k.accumulate_f32_to_f64(weights.data() + (cols + r) * seq_len, block.data() + r * cols, cols);
    }
    return merge_block(block, ows, cols);
}

std::vector<double> pool_average(std::span<const double> values, std::size_t pool_size) {
    if (pool_size < 1 || pool_size % 2 == 0) {
        throw ValidationError("pool size must be odd and >= 1");
    }
    const std::size_t n = values.size();
    if (pool_size == 1) {
        return {values.begin(), values.end()};
    }
    if (pool_size > n) {
        throw ValidationError("pool size exceeds vector length");
    }
    const std::size_t half = (pool_size - 1) / 2;
    // out[i] = sum_{j=-half..half} in[i + j], out of range treated as zero
    const auto& k = simd::kernels();
    std::vector<double> padded(n + 2 * half, 0.0);
    std::copy(values.begin(), values.end(), padded.begin() + static_cast<std::ptrdiff_t>(half));
    std::vector<double> out(n, 0.0);
    for (std::size_t off = 0; off < pool_size; ++off) {
        k.add_f64(padded.data() + off, out.data(), n);
    }
    k.scale_f64(out.data(), 1.0 / static_cast<double>(pool_size), n);
    return out;
}

ScoreVector process_layer(std::span<const float> weights, std::size_t seq_len, const ProcSettings& settings,
                          std::size_t layer) {
    settings.validate_for(seq_len);
    auto merged = merge_window(weights, seq_len, settings.ows);
    return ScoreVector{layer, pool_average(merged, settings.pool_size)};
}

std::vector<ScoreVector> process_trace(const AttentionTrace& trace, const ProcSettings& settings,
                                       HeadReduction reduction) {
    const std::size_t t = trace.seq_len();
    settings.validate_for(t);
    const std::size_t cols = t - settings.ows;
    std::vector<ScoreVector> out;
    out.reserve(trace.layers());
    for (std::size_t l = 0; l < trace.layers(); ++l) {
        const auto block = reduce_window_block(trace, l, settings.ows, reduction);
        const auto merged = merge_block(block, settings.ows, cols);
        out.push_back(ScoreVector{l, pool_average(merged, settings.pool_size)});
    }
    return out;
}

} // namespace xkv
