// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace xkv {

/// Indices of the n largest scores, largest first; equal scores rank the
/// lower index first.
std::vector<std::size_t> top_k_indices(std::span<const double> w, std::size_t n);

/// Scores sorted descending (stable, so ties keep index order).
std::vector<double> sorted_descending(std::span<const double> w);

/// Fraction of a layer's score mass kept by its top-n tokens.
///
/// Both the kept mass and the total are summed left to right over the
/// descending order, so retention(w, |w|) is exactly 1 and the result is
/// identical for any permutation of w. Throws DomainError if sum(w) == 0.
double retention(std::span<const double> w, std::size_t n);

/// Retention for every n in [0, |w|] from a single sort.
class RetentionCurve {
public:
    explicit RetentionCurve(std::span<const double> w);

    std::size_t capacity() const { return sorted_.size(); }
    double total() const { return prefix_.back(); }
    const std::vector<double>& sorted() const { return sorted_; }

    double at(std::size_t n) const;

    /// Smallest n with at(n) >= target, by binary search. target must be in [0, 1].
    std::size_t min_size_for(double target) const;

private:
    std::vector<double> sorted_;
    std::vector<double> prefix_;  // prefix_[k] = sum of the k largest
};

/// Importance-to-size ratio r / log2(n); n must be > 1.
double isr(double r, std::size_t n);

/// isr(retention(w, n), n) - isr(retention(w, n - 1), n - 1); n must be > 2.
double isr_difference(std::span<const double> w, std::size_t n);

/// Arithmetic mean of per-layer retention values.
double r_avg(std::span<const double> per_layer);

/// Total retained tokens over total capacity: sum(retained) / (layers * seq_len).
double compression_ratio(std::span<const std::size_t> retained_per_layer, std::size_t seq_len);

} // namespace xkv
