// SPDX-License-Identifier: Apache-2.0

#include "xkv/allocator.hpp"
#include "xkv/error.hpp"
#include "xkv/rng.hpp"
#include "xkv/sampling.hpp"
#include "xkv/trace.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <vector>

using namespace xkv;

namespace {

AllocationList list(std::vector<std::size_t> v) { return AllocationList{std::move(v)}; }

// Hamilton rounding spelled out with rationals: floor, then largest remainder.
std::vector<std::size_t> reference_average(const std::vector<AllocationList>& s) {
    const std::size_t l = s[0].sizes.size();
    const std::size_t k = s.size();
    std::vector<std::size_t> sums(l, 0);
    for (const auto& a : s) {
        for (std::size_t i = 0; i < l; ++i) sums[i] += a.sizes[i];
    }
    std::size_t grand = 0;
    for (auto v : sums) grand += v;
    // nearest integer to grand/k, halves rounded up
    std::size_t target = grand / k;
    if (2 * (grand % k) >= k) ++target;
    std::vector<std::size_t> out(l);
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < l; ++i) {
        out[i] = sums[i] / k;
        assigned += out[i];
    }
    std::vector<bool> bumped(l, false);
    while (assigned < target) {
        std::size_t best = l;
        for (std::size_t i = 0; i < l; ++i) {
            if (!bumped[i] && (best == l || sums[i] % k > sums[best] % k)) best = i;
        }
        bumped[best] = true;
        ++out[best];
        ++assigned;
    }
    return out;
}

} // namespace

TEST(Average, Examples) {
    const std::vector<AllocationList> a{list({4, 2}), list({2, 4})};
    EXPECT_EQ(average_allocations(a).sizes, (std::vector<std::size_t>{3, 3}));
    const std::vector<AllocationList> one{list({5, 0, 7})};
    EXPECT_EQ(average_allocations(one).sizes, (std::vector<std::size_t>{5, 0, 7}));
    const std::vector<AllocationList> odd{list({3, 0}), list({0, 2})};
    EXPECT_EQ(average_allocations(odd).sizes, (std::vector<std::size_t>{2, 1}));
}

TEST(Average, Errors) {
    EXPECT_THROW(average_allocations(std::vector<AllocationList>{}), ValidationError);
    const std::vector<AllocationList> ragged{list({1, 2}), list({1})};
    EXPECT_THROW(average_allocations(ragged), ValidationError);
}

TEST(Average, MatchesReferenceAndPreservesTotal) {
    SeededRng rng(31);
    for (int trial = 0; trial < 500; ++trial) {
        const std::size_t l = 1 + rng.below(12);
        const std::size_t k = 1 + rng.below(7);
        std::vector<AllocationList> s;
        std::size_t grand = 0;
        for (std::size_t j = 0; j < k; ++j) {
            AllocationList a{std::vector<std::size_t>(l)};
            for (auto& n : a.sizes) n = rng.below(50);
            grand += a.total();
            s.push_back(a);
        }
        const auto avg = average_allocations(s);
        ASSERT_EQ(avg.sizes, reference_average(s));
        const double mean_total = static_cast<double>(grand) / static_cast<double>(k);
        ASSERT_LE(std::abs(static_cast<double>(avg.total()) - mean_total), 0.5);
        for (std::size_t i = 0; i < l; ++i) {
            double mean = 0.0;
            for (const auto& a : s) mean += static_cast<double>(a.sizes[i]);
            mean /= static_cast<double>(k);
            ASSERT_LT(std::abs(static_cast<double>(avg.sizes[i]) - mean), 1.0);
        }
    }
}

TEST(Average, SampleOrderDoesNotMatter) {
    SeededRng rng(32);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<AllocationList> s;
        for (int j = 0; j < 5; ++j) {
            AllocationList a{std::vector<std::size_t>(6)};
            for (auto& n : a.sizes) n = rng.below(20);
            s.push_back(a);
        }
        const auto before = average_allocations(s);
        std::reverse(s.begin(), s.end());
        std::swap(s[0], s[2]);
        ASSERT_EQ(average_allocations(s), before);
    }
}

TEST(Pearson, Examples) {
    EXPECT_DOUBLE_EQ(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{3, 2, 1}), -1.0);
    EXPECT_DOUBLE_EQ(pearson(std::vector<double>{1, 2, 3}, std::vector<double>{2, 4, 6}), 1.0);
    EXPECT_THROW(pearson(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), DomainError);
    EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), ValidationError);
}

TEST(Similarity, Examples) {
    const std::vector<AllocationList> same{list({1, 5, 2}), list({1, 5, 2}), list({1, 5, 2})};
    EXPECT_DOUBLE_EQ(profile_similarity(same), 1.0);
    const std::vector<AllocationList> flipped{list({1, 2, 3}), list({3, 2, 1})};
    EXPECT_DOUBLE_EQ(profile_similarity(flipped), -1.0);
    EXPECT_THROW(profile_similarity(std::vector<AllocationList>{list({1, 2})}), ValidationError);
    const std::vector<AllocationList> flat{list({2, 2}), list({1, 3})};
    EXPECT_THROW(profile_similarity(flat), DomainError);
}

TEST(Similarity, SameTaskFamilyCorrelates) {
    const ProcSettings settings{8, 7};
    std::vector<AllocationList> s;
    for (std::uint64_t seed = 0; seed < 4; ++seed) {
        const auto trace = generate_trace(SyntheticSpec{8, 1, 96, 0.1, seed, 2.0});
        s.push_back(allocate(process_trace(trace, settings), BudgetConstraint{8 * 16}));
    }
    EXPECT_GT(profile_similarity(s), 0.5);
}

TEST(SampleCount, CeilWithFloorOfOne) {
    EXPECT_EQ(sample_count(100, 0.10), 10u);
    EXPECT_EQ(sample_count(101, 0.10), 11u);
    EXPECT_EQ(sample_count(3, 0.10), 1u);
    EXPECT_EQ(sample_count(7, 1.0), 7u);
    EXPECT_THROW(sample_count(0, 0.1), ValidationError);
    EXPECT_THROW(sample_count(10, 0.0), ValidationError);
    EXPECT_THROW(sample_count(10, 1.5), ValidationError);
}

TEST(Profile, ReusedListFitsEveryTaskOfTheType) {
    const ProcSettings settings{8, 7};
    std::vector<AllocationList> sampled;
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
        const auto trace = generate_trace(SyntheticSpec{4, 1, 64, 0.1, seed, 1.5});
        sampled.push_back(allocate(process_trace(trace, settings), BudgetConstraint{4 * 12}));
    }
    const auto profile = build_profile("qa", sampled);
    EXPECT_EQ(profile.task_type, "qa");
    EXPECT_EQ(profile.averaged.total(), 48u);
    EXPECT_EQ(profile.sample_ratio, kDefaultSampleRatio);
    for (std::uint64_t seed = 10; seed < 15; ++seed) {
        const auto trace = generate_trace(SyntheticSpec{4, 1, 64, 0.1, seed, 1.5});
        const auto scores = process_trace(trace, settings);
        const double r = allocation_r_avg(scores, profile.averaged);
        EXPECT_GT(r, 0.0);
        EXPECT_LE(r, 1.0);
    }
    EXPECT_THROW(build_profile("qa", sampled, 0.0), ValidationError);
}
