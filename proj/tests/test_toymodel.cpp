// SPDX-License-Identifier: Apache-2.0

#include "xkv/error.hpp"
#include "xkv/rng.hpp"
#include "xkv/toymodel.hpp"

#include "test_util.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <vector>

using namespace xkv;

namespace {

double max_abs_diff(std::span<const float> a, std::span<const float> b) {
    EXPECT_EQ(a.size(), b.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        worst = std::max(worst, std::abs(static_cast<double>(a[i]) - b[i]));
    }
    return worst;
}

} // namespace

TEST(ToyModel, TwoTokenRowsSumToOne) {
    ToyModelConfig cfg{1, 1, 8, 4, 2, 3};
    const ToyModel model(cfg);
    const auto res = model.full_prefill(ToyModel::random_input(cfg, 1));
    const auto& tr = res.per_layer_attention;
    EXPECT_EQ(tr.at(0, 0, 0, 0), 1.0f);
    EXPECT_EQ(tr.at(0, 0, 0, 1), 0.0f);
    EXPECT_NEAR(static_cast<double>(tr.at(0, 0, 1, 0)) + tr.at(0, 0, 1, 1), 1.0, 1e-6);
}

TEST(ToyModel, SingleTokenAttendsToItself) {
    ToyModelConfig cfg{2, 2, 8, 4, 1, 5};
    const ToyModel model(cfg);
    const auto res = model.mini_prefill(ToyModel::random_input(cfg, 2));
    for (std::size_t l = 0; l < 2; ++l) {
        for (std::size_t h = 0; h < 2; ++h) {
            EXPECT_EQ(res.per_layer_attention.at(l, h, 0, 0), 1.0f);
        }
    }
}

TEST(ToyModel, Deterministic) {
    ToyModelConfig cfg{2, 2, 16, 8, 12, 42};
    const auto input = ToyModel::random_input(cfg, 9);
    const auto a = ToyModel(cfg).full_prefill(input);
    const auto b = ToyModel(cfg).full_prefill(input);
    EXPECT_EQ(a.per_layer_attention.weights().size(), b.per_layer_attention.weights().size());
    EXPECT_EQ(max_abs_diff(a.per_layer_attention.weights(), b.per_layer_attention.weights()), 0.0);
    EXPECT_EQ(*a.first_token_logits, *b.first_token_logits);
    EXPECT_EQ(ToyModel::random_input(cfg, 9), input);
}

TEST(ToyModel, AttentionIsValidTrace) {
    ToyModelConfig cfg{3, 2, 16, 8, 20, 4};
    const auto res = ToyModel(cfg).full_prefill(ToyModel::random_input(cfg, 4));
    EXPECT_EQ(res.per_layer_attention.header().layers, 3u);
    EXPECT_NO_THROW(res.per_layer_attention.validate(kInternalRowSumTolerance));
}

TEST(ToyModel, MiniPrefillMatchesFullPrefill) {
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        ToyModelConfig cfg{1 + seed % 4, 1 + seed % 3, 16, 8, 10 + 7 * seed, seed};
        const ToyModel model(cfg);
        const auto input = ToyModel::random_input(cfg, seed + 100);
        const auto full = model.full_prefill(input);
        const auto mini = model.mini_prefill(input);
        EXPECT_LE(max_abs_diff(full.per_layer_attention.weights(), mini.per_layer_attention.weights()), 1e-6);
    }
}

TEST(ToyModel, MiniPrefillHoldsNoKv) {
    ToyModelConfig cfg{3, 2, 16, 8, 24, 1};
    const ToyModel model(cfg);
    const auto input = ToyModel::random_input(cfg, 1);
    const auto mini = model.mini_prefill(input);
    EXPECT_FALSE(mini.kv_pairs.has_value());
    EXPECT_FALSE(mini.first_token_logits.has_value());
    EXPECT_EQ(mini.live_kv_bytes, 0u);

    const auto full = model.full_prefill(input);
    ASSERT_TRUE(full.kv_pairs.has_value());
    EXPECT_EQ(full.kv_pairs->size(), 3u);
    EXPECT_EQ(full.live_kv_bytes, 2u * 3 * 24 * 2 * 8 * 4);
    ASSERT_TRUE(full.first_token_logits.has_value());
    EXPECT_EQ(full.first_token_logits->size(), ToyModel::kVocab);
}

TEST(ToyModel, RejectsShapeMismatch) {
    ToyModelConfig cfg{1, 1, 8, 4, 6, 0};
    const ToyModel model(cfg);
    EXPECT_THROW(model.full_prefill(Matrix(5, 8)), ValidationError);
    EXPECT_THROW(model.mini_prefill(Matrix(6, 7)), ValidationError);
    EXPECT_THROW(ToyModel(ToyModelConfig{0, 1, 8, 4, 6, 0}), ValidationError);
}

TEST(CausalAttention, MatchesDirectSoftmax) {
    SeededRng rng(5);
    Matrix q(7, 3), k(7, 3);
    for (auto& v : q.data) v = static_cast<float>(rng.uniform(-2, 2));
    for (auto& v : k.data) v = static_cast<float>(rng.uniform(-2, 2));
    const auto w = causal_attention(q, k);
    for (std::size_t r = 0; r < 7; ++r) {
        std::vector<double> e(r + 1);
        double sum = 0.0;
        for (std::size_t c = 0; c <= r; ++c) {
            double dot = 0.0;
            for (std::size_t i = 0; i < 3; ++i) dot += static_cast<double>(q(r, i)) * k(c, i);
            e[c] = std::exp(dot / std::sqrt(3.0));
            sum += e[c];
        }
        for (std::size_t c = 0; c < 7; ++c) {
            const double want = c <= r ? e[c] / sum : 0.0;
            EXPECT_NEAR(w[r * 7 + c], want, 1e-6);
        }
    }
}

TEST(Embeddings, LoadsRawFloats) {
    const auto path = xkv::testing::temp_path("emb.bin");
    std::vector<float> vals{1.0f, -2.0f, 0.5f, 3.0f, 4.0f, -0.25f};
    std::string bytes(vals.size() * 4, '\0');
    std::memcpy(bytes.data(), vals.data(), bytes.size());
    xkv::testing::write_bytes(path, bytes);
    const Matrix m = load_embeddings(path, 2, 3);
    EXPECT_EQ(m.data, vals);
    EXPECT_THROW(load_embeddings(path, 3, 3), ValidationError);
    EXPECT_THROW(load_embeddings(xkv::testing::temp_path("absent.bin"), 2, 3), IoError);
}
