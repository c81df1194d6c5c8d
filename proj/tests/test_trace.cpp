// SPDX-License-Identifier: Apache-2.0

#include "xkv/attnproc.hpp"
#include "xkv/error.hpp"
#include "xkv/metrics.hpp"
#include "xkv/trace.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <set>

using namespace xkv;
using xkv::testing::read_bytes;
using xkv::testing::temp_path;
using xkv::testing::trace_file_bytes;
using xkv::testing::write_bytes;

namespace {

std::string error_of(const std::filesystem::path& p) {
    try {
        load_trace(p);
    } catch (const std::exception& e) {
        return e.what();
    }
    return {};
}

} // namespace

TEST(TraceFormat, HeaderLineIsExact) {
    EXPECT_EQ(encode_trace_header({1, 4, 2, 64}),
              "{\"version\":1,\"layers\":4,\"heads\":2,\"seq_len\":64,\"dtype\":\"f32le\"}\n");
}

TEST(TraceFormat, LoadsTwoTokenIdentity) {
    const auto p = temp_path("two_token.xkv");
    write_bytes(p, trace_file_bytes(1, 1, 2, {1.0f, 0.0f, 0.5f, 0.5f}));
    const AttentionTrace t = load_trace(p);
    EXPECT_EQ(t.layers(), 1u);
    EXPECT_EQ(t.heads(), 1u);
    EXPECT_EQ(t.seq_len(), 2u);
    EXPECT_EQ(t.at(0, 0, 0, 0), 1.0f);
    EXPECT_EQ(t.at(0, 0, 0, 1), 0.0f);
    EXPECT_EQ(t.at(0, 0, 1, 0), 0.5f);
    EXPECT_EQ(t.at(0, 0, 1, 1), 0.5f);
}

TEST(TraceFormat, TruncatedPayloadIsRejected) {
    auto bytes = trace_file_bytes(1, 1, 2, {1.0f, 0.0f, 0.5f, 0.5f});
    bytes.resize(bytes.size() - 4);
    const auto p = temp_path("truncated.xkv");
    write_bytes(p, bytes);
    EXPECT_THROW(load_trace(p), ValidationError);
    const std::string msg = error_of(p);
    EXPECT_NE(msg.find("payload is 12 bytes, expected 16"), std::string::npos) << msg;
}

TEST(TraceFormat, TrailingBytesAreRejected) {
    auto bytes = trace_file_bytes(1, 1, 2, {1.0f, 0.0f, 0.5f, 0.5f});
    bytes += "xxxx";
    const auto p = temp_path("trailing.xkv");
    write_bytes(p, bytes);
    EXPECT_NE(error_of(p).find("payload is 20 bytes"), std::string::npos);
}

TEST(TraceFormat, MalformedHeadersAreRejected) {
    const std::vector<std::string> headers = {
        "not json\n",
        "{\"version\":1,\"layers\":1,\"heads\":1,\"dtype\":\"f32le\"}\n",
        "{\"version\":1,\"layers\":1,\"heads\":1,\"seq_len\":2,\"dtype\":\"f16le\"}\n",
        "{\"version\":2,\"layers\":1,\"heads\":1,\"seq_len\":2,\"dtype\":\"f32le\"}\n",
        "{\"version\":1,\"layers\":0,\"heads\":1,\"seq_len\":2,\"dtype\":\"f32le\"}\n",
        "{\"version\":1,\"layers\":1,\"heads\":1,\"seq_len\":1,\"dtype\":\"f32le\"}\n",
        "{\"version\":1,\"layers\":1,\"heads\":1,\"seq_len\":-2,\"dtype\":\"f32le\"}\n",
        "{\"version\":1,\"layers\":1,\"heads\":1,\"seq_len\":2,\"dtype\":\"f32le\"}",  // no newline
    };
    for (std::size_t i = 0; i < headers.size(); ++i) {
        const auto p = temp_path("bad_header_" + std::to_string(i) + ".xkv");
        write_bytes(p, headers[i]);
        EXPECT_THROW(load_trace(p), ValidationError) << headers[i];
    }
}

TEST(TraceFormat, RowSumViolationNamesCoordinates) {
    // layer 1, head 0, row 1 sums to 0.9
    const auto p = temp_path("bad_rowsum.xkv");
    write_bytes(p, trace_file_bytes(2, 1, 2, {1.0f, 0.0f, 0.5f, 0.5f, 1.0f, 0.0f, 0.45f, 0.45f}));
    const std::string msg = error_of(p);
    EXPECT_NE(msg.find("layer 1, head 0, row 1"), std::string::npos) << msg;
}

TEST(TraceFormat, HalfPrecisionRowSumsAreAccepted) {
    const auto p = temp_path("loose_rowsum.xkv");
    write_bytes(p, trace_file_bytes(1, 1, 2, {1.0f, 0.0f, 0.5f, 0.5005f}));
    EXPECT_NO_THROW(load_trace(p));
    EXPECT_THROW(load_trace(p).validate(kInternalRowSumTolerance), ValidationError);
}

TEST(TraceFormat, MissingFileIsIoError) {
    EXPECT_THROW(load_trace(temp_path("does_not_exist.xkv")), IoError);
}

TEST(TraceSave, RefusesCausalityViolation) {
    const AttentionTrace bad({1, 1, 1, 2}, {0.5f, 0.5f, 0.5f, 0.5f});
    EXPECT_THROW(save_trace(bad, temp_path("bad_save.xkv")), ValidationError);
}

TEST(TraceSave, EmptyPathIsIoError) {
    const AttentionTrace ok({1, 1, 1, 2}, {1.0f, 0.0f, 0.5f, 0.5f});
    EXPECT_THROW(save_trace(ok, ""), IoError);
}

TEST(TraceSave, RoundTripIsByteIdentical) {
    for (std::uint64_t seed : {1u, 2u, 3u}) {
        SyntheticSpec spec{3, 2, 40, 0.2, seed, 1.5};
        const AttentionTrace t = generate_trace(spec);
        const auto p1 = temp_path("rt_a.xkv");
        const auto p2 = temp_path("rt_b.xkv");
        save_trace(t, p1);
        const AttentionTrace back = load_trace(p1);
        save_trace(back, p2);
        const std::string a = read_bytes(p1);
        EXPECT_EQ(a, read_bytes(p2));
        EXPECT_EQ(a.size(), encode_trace_header(t.header()).size() + t.header().payload_bytes());
        EXPECT_TRUE(std::equal(t.weights().begin(), t.weights().end(), back.weights().begin()));
    }
}

TEST(TraceSave, WritesIndependentlyEncodedBytes) {
    const AttentionTrace t({1, 1, 1, 2}, {1.0f, 0.0f, 0.25f, 0.75f});
    const auto p = temp_path("enc.xkv");
    save_trace(t, p);
    EXPECT_EQ(read_bytes(p), trace_file_bytes(1, 1, 2, {1.0f, 0.0f, 0.25f, 0.75f}));
}

TEST(SyntheticTrace, IsDeterministicInSpec) {
    SyntheticSpec spec{4, 2, 50, 0.1, 42, 2.0};
    const AttentionTrace a = generate_trace(spec);
    const AttentionTrace b = generate_trace(spec);
    EXPECT_TRUE(std::equal(a.weights().begin(), a.weights().end(), b.weights().begin()));
    spec.seed = 43;
    const AttentionTrace c = generate_trace(spec);
    EXPECT_FALSE(std::equal(a.weights().begin(), a.weights().end(), c.weights().begin()));
}

TEST(SyntheticTrace, SatisfiesInternalInvariantAcrossSpecs) {
    for (std::size_t t : {2u, 3u, 17u, 64u}) {
        for (double sparsity : {0.05, 0.5, 1.0}) {
            for (double skew : {0.0, 0.7, 3.0}) {
                const SyntheticSpec spec{3, 2, t, sparsity, 9, skew};
                EXPECT_NO_THROW(generate_trace(spec).validate(kInternalRowSumTolerance))
                    << "t=" << t << " sparsity=" << sparsity << " skew=" << skew;
            }
        }
    }
}

TEST(SyntheticTrace, DenseUnskewedLayersShareRetentionCurves) {
    const SyntheticSpec spec{4, 1, 48, 1.0, 5, 0.0};
    const auto scores = process_trace(generate_trace(spec), ProcSettings{8, 7});
    const RetentionCurve first(scores[0].scores);
    for (std::size_t l = 1; l < scores.size(); ++l) {
        const RetentionCurve other(scores[l].scores);
        for (std::size_t n = 0; n <= first.capacity(); ++n) {
            EXPECT_NEAR(first.at(n), other.at(n), 1e-6) << "layer " << l << " n=" << n;
        }
    }
}

TEST(SyntheticTrace, DenseUnskewedRowsAreUniform) {
    const AttentionTrace t = generate_trace({2, 1, 16, 1.0, 3, 0.0});
    for (std::size_t r = 0; r < 16; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            EXPECT_NEAR(t.at(1, 0, r, c), 1.0 / static_cast<double>(r + 1), 1e-7);
        }
    }
}

TEST(SyntheticTrace, SkewMovesHeavyColumnsAcrossLayers) {
    const AttentionTrace t = generate_trace({4, 1, 80, 0.1, 11, 2.0});
    // Oracle: the eight columns with the most mass in the final row.
    std::vector<std::set<std::size_t>> tops;
    for (std::size_t l = 0; l < 4; ++l) {
        std::vector<std::size_t> idx(80);
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        std::stable_sort(idx.begin(), idx.end(),
                         [&](std::size_t a, std::size_t b) { return t.at(l, 0, 79, a) > t.at(l, 0, 79, b); });
        tops.emplace_back(idx.begin(), idx.begin() + 8);
    }
    std::size_t differing_pairs = 0;
    for (std::size_t i = 0; i < 4; ++i) {
        for (std::size_t j = i + 1; j < 4; ++j) {
            differing_pairs += tops[i] != tops[j] ? 1 : 0;
        }
    }
    EXPECT_GE(differing_pairs, 1u);
}

TEST(SyntheticTrace, RejectsInvalidSpecs) {
    EXPECT_THROW(generate_trace({1, 1, 1, 0.5, 0, 0.0}), ValidationError);
    EXPECT_THROW(generate_trace({1, 1, 8, 0.0, 0, 0.0}), ValidationError);
    EXPECT_THROW(generate_trace({1, 1, 8, 1.5, 0, 0.0}), ValidationError);
    EXPECT_THROW(generate_trace({1, 1, 8, 0.5, 0, -1.0}), ValidationError);
    EXPECT_THROW(generate_trace({0, 1, 8, 0.5, 0, 0.0}), ValidationError);
}
