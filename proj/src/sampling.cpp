// SPDX-License-Identifier: Apache-2.0

#include "xkv/sampling.hpp"

#include "xkv/error.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace xkv {

AllocationList average_allocations(std::span<const AllocationList> samples) {
    if (samples.empty()) {
        throw ValidationError("cannot average zero allocation lists");
    }
    const std::size_t l = samples.front().sizes.size();
    for (const auto& s : samples) {
        if (s.sizes.size() != l) {
            throw ValidationError("allocation lists differ in layer count");
        }
    }
    const std::size_t k = samples.size();
    std::vector<std::size_t> sums(l, 0);
    std::size_t grand = 0;
    for (const auto& s : samples) {
        for (std::size_t i = 0; i < l; ++i) {
            sums[i] += s.sizes[i];
        }
        grand += s.total();
    }
    // round half up of grand / k
    const std::size_t target = (2 * grand + k) / (2 * k);

    AllocationList out{std::vector<std::size_t>(l)};
    std::size_t assigned = 0;
    for (std::size_t i = 0; i < l; ++i) {
        out.sizes[i] = sums[i] / k;
        assigned += out.sizes[i];
    }
    // sum of floors <= grand/k, and target - that sum < l, so each layer gets at most +1
    std::vector<std::size_t> order(l);
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return sums[a] % k > sums[b] % k; });
    for (std::size_t j = 0; assigned < target && j < l; ++j) {
        ++out.sizes[order[j]];
        ++assigned;
    }
    return out;
}

double pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size() || a.size() < 2) {
        throw ValidationError("correlation needs two vectors of equal length >= 2");
    }
    const double n = static_cast<double>(a.size());
    const double ma = std::accumulate(a.begin(), a.end(), 0.0) / n;
    const double mb = std::accumulate(b.begin(), b.end(), 0.0) / n;
    double sab = 0.0;
    double saa = 0.0;
    double sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma;
        const double db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    if (saa == 0.0 || sbb == 0.0) {
        throw DomainError("correlation undefined for a constant vector");
    }
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

double profile_similarity(std::span<const AllocationList> samples) {
    if (samples.size() < 2) {
        throw ValidationError("profile similarity needs at least two samples");
    }
    std::vector<std::vector<double>> vecs;
    vecs.reserve(samples.size());
    for (const auto& s : samples) {
        vecs.emplace_back(s.sizes.begin(), s.sizes.end());
    }
    double sum = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < vecs.size(); ++i) {
        for (std::size_t j = i + 1; j < vecs.size(); ++j) {
            sum += pearson(vecs[i], vecs[j]);
            ++pairs;
        }
    }
    return sum / static_cast<double>(pairs);
}

std::size_t sample_count(std::size_t task_count, double ratio) {
    if (!(ratio > 0.0 && ratio <= 1.0)) {
        throw ValidationError("sample ratio must be in (0, 1]");
    }
    if (task_count == 0) {
        throw ValidationError("no tasks to sample from");
    }
    const auto n = static_cast<std::size_t>(std::ceil(ratio * static_cast<double>(task_count) - 1e-9));
    return std::clamp<std::size_t>(n, 1, task_count);
}

AllocationProfile build_profile(std::string task_type, std::vector<AllocationList> samples, double sample_ratio) {
    if (!(sample_ratio > 0.0 && sample_ratio <= 1.0)) {
        throw ValidationError("sample ratio must be in (0, 1]");
    }
    AllocationProfile p;
    p.task_type = std::move(task_type);
    p.averaged = average_allocations(samples);
    p.samples = std::move(samples);
    p.sample_ratio = sample_ratio;
    return p;
}

} // namespace xkv
