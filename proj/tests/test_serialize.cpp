// SPDX-License-Identifier: Apache-2.0

#include "xkv/error.hpp"
#include "xkv/rng.hpp"
#include "xkv/serialize.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <limits>

using namespace xkv;
using xkv::testing::temp_path;
using xkv::testing::write_bytes;

TEST(FormatDouble, RoundTrips) {
    SeededRng rng(4);
    for (int i = 0; i < 1000; ++i) {
        const double v = std::ldexp(rng.uniform(), static_cast<int>(rng.below(40)) - 20);
        ASSERT_EQ(std::stod(format_double(v)), v);
    }
    EXPECT_EQ(format_double(0.7), "0.7");
    EXPECT_EQ(format_double(1.0), "1");
}

TEST(AllocationJson, RoundTrip) {
    const AllocationList a{{3, 0, 17}};
    EXPECT_EQ(to_json(a).dump(), R"({"sizes":[3,0,17]})");
    EXPECT_EQ(allocation_from_json(to_json(a)), a);
    const auto extra = nlohmann::json::parse(R"({"sizes":[1,2],"r_avg":0.5})");
    EXPECT_EQ(allocation_from_json(extra).sizes, (std::vector<std::size_t>{1, 2}));
}

TEST(AllocationJson, RejectsBadShapes) {
    for (const char* text : {R"([1,2])", R"({"size":[1]})", R"({"sizes":[1,-2]})", R"({"sizes":[1.5]})",
                             R"({"sizes":"12"})"}) {
        EXPECT_THROW(allocation_from_json(nlohmann::json::parse(text)), ValidationError) << text;
    }
}

TEST(AllocationCsv, RoundTrip) {
    const AllocationList a{{4, 9}};
    EXPECT_EQ(allocation_csv(a), "layer,n\n0,4\n1,9\n");
    EXPECT_EQ(allocation_from_csv(allocation_csv(a)), a);
    EXPECT_EQ(allocation_from_csv("layer,n\r\n0,4\r\n1,9\r\n"), a);
    EXPECT_THROW(allocation_from_csv("n,layer\n0,1\n"), ValidationError);
    EXPECT_THROW(allocation_from_csv("layer,n\n1,4\n"), ValidationError);
    EXPECT_THROW(allocation_from_csv("layer,n\n0,x\n"), ValidationError);
}

TEST(LoadAllocation, PicksFormatByExtension) {
    const auto json_path = temp_path("alloc.json");
    const auto csv_path = temp_path("alloc.csv");
    write_bytes(json_path, R"({"sizes":[2,5]})");
    write_bytes(csv_path, "layer,n\n0,2\n1,5\n");
    EXPECT_EQ(load_allocation(json_path), load_allocation(csv_path));
    write_bytes(json_path, "{not json");
    EXPECT_THROW(load_allocation(json_path), ValidationError);
    EXPECT_THROW(load_allocation(temp_path("missing.json")), IoError);
}

TEST(ScoresCsv, Layout) {
    const std::vector<ScoreVector> s{ScoreVector{0, {0.15, 0.25}}, ScoreVector{1, {0.5}}};
    EXPECT_EQ(scores_csv(s), "layer,position,score\n0,0,0.15\n0,1,0.25\n1,0,0.5\n");
    const auto j = to_json(std::span<const ScoreVector>(s));
    EXPECT_EQ(j.dump(), R"([{"layer":0,"scores":[0.15,0.25]},{"layer":1,"scores":[0.5]}])");
}

TEST(ReportJson, CarriesAccounting) {
    EvictionReport r;
    r.layers = 1;
    r.seq_len = 4;
    r.ows = 2;
    r.kv_width = 8;
    r.sizes = {1};
    r.retained_indices = {{1, 2, 3}};
    r.compression_ratio = 0.75;
    r.bytes_before = 256;
    r.bytes_after = 192;
    r.per_layer_r = {0.625};
    r.r_avg = 0.625;
    const auto j = to_json(r);
    EXPECT_EQ(j["memory_reduction"].get<double>(), 0.25);
    EXPECT_EQ(j["bytes_after"].get<std::uint64_t>(), 192u);
    EXPECT_TRUE(j["window_counted_on_top"].get<bool>());
    EXPECT_EQ(report_csv(r), "layer,n_i,retained,R_i\n0,1,3,0.625\n");
}

TEST(Profile, FileRoundTrip) {
    AllocationProfile p;
    p.task_type = "summarization";
    p.samples = {AllocationList{{1, 2, 3}}, AllocationList{{3, 2, 1}}};
    p.averaged = AllocationList{{2, 2, 2}};
    p.sample_ratio = 0.25;
    const auto path = temp_path("profile.json");
    save_profile(p, path);
    const auto back = load_profile(path);
    EXPECT_EQ(back.task_type, p.task_type);
    EXPECT_EQ(back.samples, p.samples);
    EXPECT_EQ(back.averaged, p.averaged);
    EXPECT_EQ(back.sample_ratio, 0.25);
}

TEST(Profile, RejectsInconsistentFiles) {
    for (const char* text : {R"({"task_type":"a","samples":[[1,2]],"averaged":[1]})",
                             R"({"task_type":3,"samples":[],"averaged":[1]})",
                             R"({"samples":[],"averaged":[1]})"}) {
        EXPECT_THROW(profile_from_json(nlohmann::json::parse(text)), ValidationError) << text;
    }
}
