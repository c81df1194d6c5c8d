// SPDX-License-Identifier: Apache-2.0

#include "xkv/metrics.hpp"

#include "xkv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace xkv {
namespace {

std::vector<std::size_t> rank_order(std::span<const double> w) {
    std::vector<std::size_t> idx(w.size());
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return w[a] > w[b]; });
    return idx;
}

} // namespace

std::vector<std::size_t> top_k_indices(std::span<const double> w, std::size_t n) {
    if (n > w.size()) {
        throw ValidationError("top-k size " + std::to_string(n) + " exceeds " + std::to_string(w.size()) +
                              " scores");
    }
    auto idx = rank_order(w);
    idx.resize(n);
    return idx;
}

std::vector<double> sorted_descending(std::span<const double> w) {
    std::vector<double> s(w.begin(), w.end());
    std::stable_sort(s.begin(), s.end(), std::greater<>{});
    return s;
}

RetentionCurve::RetentionCurve(std::span<const double> w) : sorted_(sorted_descending(w)), prefix_(w.size() + 1, 0.0) {
    for (double v : sorted_) {
        if (!(v >= 0.0) || !std::isfinite(v)) {
            throw ValidationError("scores must be finite and nonnegative");
        }
    }
    for (std::size_t k = 0; k < sorted_.size(); ++k) {
        prefix_[k + 1] = prefix_[k] + sorted_[k];
    }
    if (!(prefix_.back() > 0.0)) {
        throw DomainError("retention undefined: score vector sums to zero");
    }
}

double RetentionCurve::at(std::size_t n) const {
    if (n > sorted_.size()) {
        throw ValidationError("cache size " + std::to_string(n) + " exceeds " + std::to_string(sorted_.size()) +
                              " tokens");
    }
    return prefix_[n] / prefix_.back();
}

std::size_t RetentionCurve::min_size_for(double target) const {
    if (!(target >= 0.0 && target <= 1.0)) {
        throw ValidationError("retention target must be in [0, 1]");
    }
    // at() is non-decreasing and at(capacity) == 1, so the answer exists.
    std::size_t lo = 0;
    std::size_t hi = sorted_.size();
    while (lo < hi) {
        const std::size_t mid = lo + (hi - lo) / 2;
        if (at(mid) >= target) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    return lo;
}

double retention(std::span<const double> w, std::size_t n) {
    if (n > w.size()) {
        throw ValidationError("cache size " + std::to_string(n) + " exceeds " + std::to_string(w.size()) +
                              " tokens");
    }
    return RetentionCurve(w).at(n);
}

double isr(double r, std::size_t n) {
    if (n <= 1) {
        throw DomainError("ISR needs a cache size > 1, got " + std::to_string(n));
    }
    return r / std::log2(static_cast<double>(n));
}

double isr_difference(std::span<const double> w, std::size_t n) {
    if (n <= 2) {
        throw DomainError("ISR difference needs a cache size > 2, got " + std::to_string(n));
    }
    const RetentionCurve curve(w);
    return isr(curve.at(n), n) - isr(curve.at(n - 1), n - 1);
}

double r_avg(std::span<const double> per_layer) {
    if (per_layer.empty()) {
        throw ValidationError("R_avg of an empty layer list");
    }
    double sum = 0.0;
    for (double r : per_layer) {
        sum += r;
    }
    return sum / static_cast<double>(per_layer.size());
}

double compression_ratio(std::span<const std::size_t> retained_per_layer, std::size_t seq_len) {
    if (retained_per_layer.empty() || seq_len == 0) {
        throw ValidationError("compression ratio needs at least one layer and seq_len > 0");
    }
    std::size_t kept = 0;
    for (std::size_t n : retained_per_layer) {
        if (n > seq_len) {
            throw ValidationError("retained tokens exceed seq_len");
        }
        kept += n;
    }
    return static_cast<double>(kept) / (static_cast<double>(retained_per_layer.size()) * static_cast<double>(seq_len));
}

} // namespace xkv
