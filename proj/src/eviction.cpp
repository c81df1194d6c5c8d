// SPDX-License-Identifier: Apache-2.0

#include "xkv/eviction.hpp"

#include "xkv/error.hpp"
#include "xkv/metrics.hpp"

#include <algorithm>
#include <string>

namespace xkv {
namespace {

void check_allocation(const AllocationList& allocation, std::size_t layers, std::size_t seq_len, std::size_t ows) {
    if (allocation.sizes.size() != layers) {
        throw ValidationError("allocation has " + std::to_string(allocation.sizes.size()) + " layers, expected " +
                              std::to_string(layers));
    }
    for (std::size_t i = 0; i < layers; ++i) {
        if (allocation.sizes[i] > seq_len - ows) {
            throw ValidationError("layer " + std::to_string(i) + " size " + std::to_string(allocation.sizes[i]) +
                                  " exceeds the " + std::to_string(seq_len - ows) + " non-window tokens");
        }
    }
}

void fill_retention(EvictionReport& report, std::span<const ScoreVector> scores) {
    report.per_layer_r.resize(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        report.per_layer_r[i] = RetentionCurve(scores[i].scores).at(report.sizes[i]);
    }
    report.r_avg = r_avg(report.per_layer_r);
}

} // namespace

std::vector<std::size_t> select_retained(std::span<const double> scores, std::size_t n, std::size_t seq_len,
                                         std::size_t ows) {
    if (scores.size() + ows != seq_len) {
        throw ValidationError("score vector length must equal seq_len - ows");
    }
    if (n > scores.size()) {
        throw ValidationError("cache size " + std::to_string(n) + " exceeds " + std::to_string(scores.size()) +
                              " non-window tokens");
    }
    auto kept = top_k_indices(scores, n);
    std::sort(kept.begin(), kept.end());
    for (std::size_t pos = seq_len - ows; pos < seq_len; ++pos) {
        kept.push_back(pos);
    }
    return kept;
}

Matrix gather_rows(const Matrix& m, std::span<const std::size_t> rows) {
    Matrix out(rows.size(), m.cols);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        if (rows[i] >= m.rows) {
            throw ValidationError("row index out of range");
        }
        std::copy(m.row(rows[i]).begin(), m.row(rows[i]).end(), out.row(i).begin());
    }
    return out;
}

EvictedLayer evict_layer(const Matrix& q, const Matrix& k, const Matrix& v, std::size_t n,
                         const ProcSettings& settings) {
    const std::size_t t = q.rows;
    if (k.rows != t || v.rows != t || k.cols != q.cols || q.cols == 0 || v.cols == 0) {
        throw ValidationError("q, k, v must all be t x p");
    }
    settings.validate_for(t);
    if (n > t - settings.ows) {
        throw ValidationError("cache size " + std::to_string(n) + " exceeds the " + std::to_string(t - settings.ows) +
                              " non-window tokens");
    }

    const auto attn = causal_attention(q, k);

    EvictedLayer out;
    out.scores = process_layer(attn, t, settings);
    out.retained_indices = select_retained(out.scores.scores, n, t, settings.ows);
    out.keys = gather_rows(k, out.retained_indices);
    out.values = gather_rows(v, out.retained_indices);
    return out;
}

EvictionReport account(const AllocationList& allocation, std::size_t seq_len, std::size_t ows, std::size_t kv_width) {
    if (allocation.sizes.empty()) {
        throw ValidationError("allocation has no layers");
    }
    if (kv_width == 0) {
        throw ValidationError("kv width must be >= 1");
    }
    if (ows >= seq_len) {
        throw ValidationError("observation window must be shorter than the sequence");
    }
    check_allocation(allocation, allocation.sizes.size(), seq_len, ows);

    EvictionReport r;
    r.layers = allocation.sizes.size();
    r.seq_len = seq_len;
    r.ows = ows;
    r.kv_width = kv_width;
    r.sizes = allocation.sizes;
    std::vector<std::size_t> kept(r.layers);
    const std::uint64_t row_bytes = 2ull * kv_width * kKvElemBytes;
    for (std::size_t i = 0; i < r.layers; ++i) {
        kept[i] = allocation.sizes[i] + ows;
        r.bytes_after += kept[i] * row_bytes;
    }
    r.bytes_before = static_cast<std::uint64_t>(r.layers) * seq_len * row_bytes;
    r.compression_ratio = compression_ratio(kept, seq_len);
    return r;
}

EvictionReport simulate_task(const AttentionTrace& trace, const AllocationList& allocation,
                             const ProcSettings& settings, std::size_t kv_width) {
    const std::size_t t = trace.seq_len();
    settings.validate_for(t);
    check_allocation(allocation, trace.layers(), t, settings.ows);
    const auto scores = process_trace(trace, settings);

    EvictionReport report = account(allocation, t, settings.ows, kv_width);
    report.retained_indices.reserve(trace.layers());
    for (std::size_t i = 0; i < trace.layers(); ++i) {
        report.retained_indices.push_back(select_retained(scores[i].scores, allocation.sizes[i], t, settings.ows));
    }
    fill_retention(report, scores);
    return report;
}

ToySimulation simulate_toy(const ToyModel& model, const Matrix& input, const AllocationList& allocation,
                           const ProcSettings& settings) {
    const auto& cfg = model.config();
    settings.validate_for(cfg.seq_len);
    check_allocation(allocation, cfg.layers, cfg.seq_len, settings.ows);

    PrefillResult prefill = model.full_prefill(input);
    const auto scores = process_trace(prefill.per_layer_attention, settings);

    ToySimulation sim;
    sim.report = account(allocation, cfg.seq_len, settings.ows, cfg.heads * cfg.proj_dim);
    const auto& kv = *prefill.kv_pairs;
    for (std::size_t i = 0; i < cfg.layers; ++i) {
        auto kept = select_retained(scores[i].scores, allocation.sizes[i], cfg.seq_len, settings.ows);
        sim.compressed.push_back(LayerKV{gather_rows(kv[i].keys, kept), gather_rows(kv[i].values, kept)});
        sim.report.retained_indices.push_back(std::move(kept));
    }
    fill_retention(sim.report, scores);
    return sim;
}

} // namespace xkv
