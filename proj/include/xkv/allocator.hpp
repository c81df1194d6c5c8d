// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/attnproc.hpp"

#include <cstddef>
#include <limits>
#include <span>
#include <variant>
#include <vector>

namespace xkv {

/// Per-layer KV-cache sizes in tokens, excluding the observation window.
struct AllocationList {
    std::vector<std::size_t> sizes;

    std::size_t layers() const { return sizes.size(); }
    std::size_t total() const;

    friend bool operator==(const AllocationList&, const AllocationList&) = default;
};

struct BudgetConstraint {
    std::size_t total = 0;
};

struct TargetConstraint {
    double r_avg = 1.0;
};

/// Either a total token budget (maximize R_avg) or an R_avg target
/// (minimize the total).
using Constraint = std::variant<BudgetConstraint, TargetConstraint>;

/// Wait-list value of a layer that has no token left to give.
inline constexpr double kExhaustedGain = -std::numeric_limits<double>::infinity();

/// Normalized contribution of the next-best token of w when current_n tokens
/// are already kept: the (current_n+1)-th largest score over sum(w), or
/// kExhaustedGain once current_n == |w|.
double marginal_gain(std::span<const double> w, std::size_t current_n);

/// Greedy adaptive allocation. Each step grants one token to the layer with
/// the largest wait-list gain (ties to the lowest layer index).
///
/// Budget mode performs exactly `total` steps and throws ValidationError if
/// the budget exceeds the combined capacity. Target mode stops at the first
/// step where R_avg >= target; targets outside (0, 1] are rejected.
AllocationList allocate(std::span<const ScoreVector> scores, const Constraint& constraint);

/// Upper bound on allocations the oracle is willing to enumerate.
inline constexpr std::size_t kOracleSearchLimit = 1'000'000;

/// Exhaustive search over every allocation in the capacity box. Returns the
/// lexicographically smallest optimum. Throws ValidationError when the box
/// holds more than kOracleSearchLimit points.
AllocationList oracle_allocate(std::span<const ScoreVector> scores, const Constraint& constraint);

/// Per-layer retention of an allocation.
std::vector<double> layer_retention(std::span<const ScoreVector> scores, const AllocationList& allocation);

/// R_avg of an allocation.
double allocation_r_avg(std::span<const ScoreVector> scores, const AllocationList& allocation);

/// Same total spread evenly; the remainder goes to the lowest layers that
/// still have room. Baseline for comparisons.
AllocationList uniform_allocation(std::size_t total, std::span<const std::size_t> capacities);

} // namespace xkv
