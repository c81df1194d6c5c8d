// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "xkv/tensor.hpp"
#include "xkv/trace.hpp"

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

namespace xkv {

struct ToyModelConfig {
    std::size_t layers = 2;
    std::size_t heads = 1;
    std::size_t model_dim = 32;
    std::size_t proj_dim = 16;
    std::size_t seq_len = 32;
    std::uint64_t seed = 0;

    void validate() const;
};

/// Keys and values of one layer, every head side by side: t x (heads * proj_dim).
struct LayerKV {
    Matrix keys;
    Matrix values;
};

struct PrefillResult {
    /// Attention weights recorded from every layer's attention module.
    AttentionTrace per_layer_attention;
    /// Full prefill only.
    std::optional<std::vector<LayerKV>> kv_pairs;
    /// Full prefill only: logits of the next token read off the last position.
    std::optional<std::vector<float>> first_token_logits;
    /// Bytes of K/V still held when the call returns.
    std::size_t live_kv_bytes = 0;
};

/// Small causal transformer with weights drawn from a seeded uniform
/// distribution scaled by 1/sqrt(d). Each block is
///   h = rmsnorm(x + MHA(x)),  x' = rmsnorm(h + MLP(h))
/// with a 4d-wide tanh-GELU MLP and unit-gain RMS normalization.
class ToyModel {
public:
    explicit ToyModel(const ToyModelConfig& config);

    const ToyModelConfig& config() const { return config_; }

    /// Runs every block end to end, keeps each layer's K and V and reads
    /// first-token logits off the final hidden state.
    PrefillResult full_prefill(const Matrix& input) const;

    /// Same arithmetic through the last layer's attention weights, then stops:
    /// no K/V are retained and the last block's residual, normalization and
    /// MLP are skipped.
    PrefillResult mini_prefill(const Matrix& input) const;

    /// Seeded t x d embedding matrix for driving the model without a tokenizer.
    static Matrix random_input(const ToyModelConfig& config, std::uint64_t seed);

    /// Vocabulary size of the logits head.
    static constexpr std::size_t kVocab = 64;

private:
    struct HeadWeights {
        Matrix wq, wk, wv;  // d x p
    };
    struct LayerWeights {
        std::vector<HeadWeights> heads;
        Matrix wo;   // (h*p) x d
        Matrix w1;   // d x 4d
        Matrix w2;   // 4d x d
    };

    PrefillResult run(const Matrix& input, bool mini) const;
    void check_input(const Matrix& input) const;

    ToyModelConfig config_;
    std::vector<LayerWeights> layers_;
    Matrix unembed_;  // d x kVocab
};

/// Causal softmax(q k^T / sqrt(p)) as a t x t row-major matrix, computed
/// with max subtraction. q and k are t x p.
std::vector<float> causal_attention(const Matrix& q, const Matrix& k);

/// Raw f32le t x d embeddings, for inputs shipped alongside a trace file.
Matrix load_embeddings(const std::filesystem::path& path, std::size_t seq_len, std::size_t model_dim);

} // namespace xkv
