// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/allocator.hpp"
#include "xkv/attnproc.hpp"
#include "xkv/eviction.hpp"
#include "xkv/sampling.hpp"

#include <json.hpp>

#include <filesystem>
#include <span>
#include <string>

namespace xkv {

nlohmann::json to_json(const AllocationList& a);
nlohmann::json to_json(std::span<const ScoreVector> scores);
nlohmann::json to_json(const EvictionReport& r);
nlohmann::json to_json(const AllocationProfile& p);

/// Accepts {"sizes":[...]} (extra keys ignored).
AllocationList allocation_from_json(const nlohmann::json& j);
AllocationProfile profile_from_json(const nlohmann::json& j);

/// CSV "layer,n" with header.
std::string allocation_csv(const AllocationList& a);
/// Parses allocation_csv output.
AllocationList allocation_from_csv(const std::string& text);

/// CSV "layer,position,score" with header.
std::string scores_csv(std::span<const ScoreVector> scores);

/// CSV "layer,n_i,retained,R_i" with header, one row per layer.
std::string report_csv(const EvictionReport& r);

/// Reads an allocation from .json or .csv (by extension).
AllocationList load_allocation(const std::filesystem::path& path);

void save_profile(const AllocationProfile& p, const std::filesystem::path& path);
AllocationProfile load_profile(const std::filesystem::path& path);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

} // namespace xkv
