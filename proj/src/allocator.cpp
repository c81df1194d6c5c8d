// SPDX-License-Identifier: Apache-2.0

#include "xkv/allocator.hpp"

#include "xkv/error.hpp"
#include "xkv/metrics.hpp"

#include <queue>
#include <string>

namespace xkv {
namespace {

std::vector<RetentionCurve> build_curves(std::span<const ScoreVector> scores) {
    if (scores.empty()) {
        throw ValidationError("allocation needs at least one layer");
    }
    std::vector<RetentionCurve> curves;
    curves.reserve(scores.size());
    for (const auto& s : scores) {
        if (s.scores.empty()) {
            throw ValidationError("layer " + std::to_string(s.layer) + " has an empty score vector");
        }
        curves.emplace_back(s.scores);
    }
    return curves;
}

std::size_t capacity_of(const std::vector<RetentionCurve>& curves) {
    std::size_t cap = 0;
    for (const auto& c : curves) {
        cap += c.capacity();
    }
    return cap;
}

double gain_at(const RetentionCurve& curve, std::size_t n) {
    return n < curve.capacity() ? curve.sorted()[n] / curve.total() : kExhaustedGain;
}

double evaluate(const std::vector<RetentionCurve>& curves, std::span<const std::size_t> sizes,
                std::vector<double>& scratch) {
    for (std::size_t i = 0; i < curves.size(); ++i) {
        scratch[i] = curves[i].at(sizes[i]);
    }
    return r_avg(scratch);
}

void check_target(double target) {
    if (!(target > 0.0 && target <= 1.0)) {
        throw ValidationError("target R_avg must be in (0, 1]");
    }
}

// Wait-list entry; the heap top is the largest gain, lowest layer on ties.
struct WaitEntry {
    double gain;
    std::size_t layer;
};

struct WaitOrder {
    bool operator()(const WaitEntry& a, const WaitEntry& b) const {
        if (a.gain != b.gain) {
            return a.gain < b.gain;
        }
        return a.layer > b.layer;
    }
};

} // namespace

std::size_t AllocationList::total() const {
    std::size_t s = 0;
    for (std::size_t n : sizes) {
        s += n;
    }
    return s;
}

double marginal_gain(std::span<const double> w, std::size_t current_n) {
    if (current_n > w.size()) {
        throw ValidationError("current size exceeds the score vector length");
    }
    if (current_n == w.size()) {
        return kExhaustedGain;
    }
    const RetentionCurve curve(w);
    return gain_at(curve, current_n);
}

AllocationList allocate(std::span<const ScoreVector> scores, const Constraint& constraint) {
    const auto curves = build_curves(scores);
    const std::size_t l = curves.size();
    const std::size_t capacity = capacity_of(curves);

    std::priority_queue<WaitEntry, std::vector<WaitEntry>, WaitOrder> wait;
    for (std::size_t i = 0; i < l; ++i) {
        wait.push({gain_at(curves[i], 0), i});
    }

    AllocationList out{std::vector<std::size_t>(l, 0)};
    auto step = [&] {
        const WaitEntry top = wait.top();
        wait.pop();
        const std::size_t pos = ++out.sizes[top.layer];
        wait.push({gain_at(curves[top.layer], pos), top.layer});
    };

    if (const auto* budget = std::get_if<BudgetConstraint>(&constraint)) {
        if (budget->total > capacity) {
            throw ValidationError("budget " + std::to_string(budget->total) + " exceeds capacity " +
                                  std::to_string(capacity));
        }
        for (std::size_t it = 0; it < budget->total; ++it) {
            step();
        }
        return out;
    }

    const double target = std::get<TargetConstraint>(constraint).r_avg;
    check_target(target);
    // R_avg is re-evaluated from the per-layer curves rather than accumulated
    // from gains, so the stopping test sees the same value the oracle does.
    std::vector<double> scratch(l);
    while (evaluate(curves, out.sizes, scratch) < target) {
        if (out.total() == capacity) {
            throw ValidationError("target R_avg not reachable");
        }
        step();
    }
    return out;
}

AllocationList oracle_allocate(std::span<const ScoreVector> scores, const Constraint& constraint) {
    const auto curves = build_curves(scores);
    const std::size_t l = curves.size();

    double points = 1.0;
    for (const auto& c : curves) {
        points *= static_cast<double>(c.capacity() + 1);
    }
    if (points > static_cast<double>(kOracleSearchLimit)) {
        throw ValidationError("oracle search space too large");
    }

    const auto* budget = std::get_if<BudgetConstraint>(&constraint);
    const double target = budget ? 0.0 : std::get<TargetConstraint>(constraint).r_avg;
    if (budget && budget->total > capacity_of(curves)) {
        throw ValidationError("budget exceeds capacity");
    }
    if (!budget) {
        check_target(target);
    }

    std::vector<std::size_t> cur(l, 0);
    std::vector<double> scratch(l);
    std::vector<std::size_t> best;
    double best_r = -1.0;
    std::size_t best_total = 0;

    // Odometer over the capacity box, last layer fastest: visits allocations
    // in lexicographic order, so keeping only strict improvements yields the
    // lexicographically smallest optimum.
    while (true) {
        std::size_t total = 0;
        for (std::size_t n : cur) {
            total += n;
        }
        if (budget) {
            if (total == budget->total) {
                const double r = evaluate(curves, cur, scratch);
                if (r > best_r) {
                    best_r = r;
                    best = cur;
                }
            }
        } else if (best.empty() || total < best_total) {
            if (evaluate(curves, cur, scratch) >= target) {
                best = cur;
                best_total = total;
            }
        }

        std::size_t i = l;
        while (i > 0) {
            --i;
            if (cur[i] < curves[i].capacity()) {
                ++cur[i];
                break;
            }
            cur[i] = 0;
            if (i == 0) {
                i = l + 1;  // wrapped: done
                break;
            }
        }
        if (i == l + 1) {
            break;
        }
    }
    if (best.empty()) {
        throw ValidationError("no allocation satisfies the constraint");
    }
    return AllocationList{best};
}

std::vector<double> layer_retention(std::span<const ScoreVector> scores, const AllocationList& allocation) {
    if (allocation.sizes.size() != scores.size()) {
        throw ValidationError("allocation has " + std::to_string(allocation.sizes.size()) + " layers, scores have " +
                              std::to_string(scores.size()));
    }
    std::vector<double> r(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        r[i] = RetentionCurve(scores[i].scores).at(allocation.sizes[i]);
    }
    return r;
}

double allocation_r_avg(std::span<const ScoreVector> scores, const AllocationList& allocation) {
    return r_avg(layer_retention(scores, allocation));
}

AllocationList uniform_allocation(std::size_t total, std::span<const std::size_t> capacities) {
    if (capacities.empty()) {
        throw ValidationError("uniform allocation needs at least one layer");
    }
    std::size_t cap = 0;
    for (std::size_t c : capacities) {
        cap += c;
    }
    if (total > cap) {
        throw ValidationError("uniform allocation total exceeds capacity");
    }
    const std::size_t l = capacities.size();
    AllocationList out{std::vector<std::size_t>(l, 0)};
    std::size_t left = total;
    // Water-fill: repeatedly share what is left among layers with room.
    while (left > 0) {
        std::size_t open = 0;
        for (std::size_t i = 0; i < l; ++i) {
            open += out.sizes[i] < capacities[i] ? 1 : 0;
        }
        const std::size_t share = left / open;
        std::size_t extra = left % open;
        for (std::size_t i = 0; i < l && left > 0; ++i) {
            if (out.sizes[i] >= capacities[i]) {
                continue;
            }
            std::size_t want = share + (extra > 0 ? 1 : 0);
            const std::size_t give = std::min(want, capacities[i] - out.sizes[i]);
            if (want > share && give == want) {
                --extra;
            }
            out.sizes[i] += give;
            left -= give;
        }
    }
    return out;
}

} // namespace xkv
