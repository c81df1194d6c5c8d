// SPDX-License-Identifier: Apache-2.0

#include "xkv/toymodel.hpp"

#include "xkv/error.hpp"
#include "xkv/rng.hpp"
#include "xkv/simd.hpp"

#include <bit>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <string>

namespace xkv {
namespace {

Matrix random_matrix(SeededRng& rng, std::size_t rows, std::size_t cols, double scale) {
    Matrix m(rows, cols);
    for (float& v : m.data) {
        v = static_cast<float>(rng.uniform(-1.0, 1.0) * scale);
    }
    return m;
}

// out (rows x w.cols) = x (rows x w.rows) * w
Matrix matmul(const Matrix& x, const Matrix& w) {
    const auto& k = simd::kernels();
    Matrix out(x.rows, w.cols);
    for (std::size_t r = 0; r < x.rows; ++r) {
        float* dst = out.row(r).data();
        const auto xr = x.row(r);
        for (std::size_t i = 0; i < x.cols; ++i) {
            k.axpy_f32(xr[i], w.row(i).data(), dst, w.cols);
        }
    }
    return out;
}

void rms_normalize(Matrix& x) {
    constexpr double kEps = 1e-6;
    const auto& k = simd::kernels();
    for (std::size_t r = 0; r < x.rows; ++r) {
        auto row = x.row(r);
        const double ms = static_cast<double>(k.dot_f32(row.data(), row.data(), row.size())) /
                          static_cast<double>(row.size());
        k.scale_f32(row.data(), static_cast<float>(1.0 / std::sqrt(ms + kEps)), row.size());
    }
}

float gelu(float x) {
    const double xd = x;
    return static_cast<float>(0.5 * xd * (1.0 + std::tanh(0.7978845608028654 * (xd + 0.044715 * xd * xd * xd))));
}

void add_into(Matrix& dst, const Matrix& src) {
    const auto& k = simd::kernels();
    k.axpy_f32(1.0f, src.data.data(), dst.data.data(), dst.data.size());
}

} // namespace

void ToyModelConfig::validate() const {
    if (layers < 1 || heads < 1 || model_dim < 1 || proj_dim < 1 || seq_len < 1) {
        throw ValidationError("toy model dimensions must all be >= 1");
    }
}

ToyModel::ToyModel(const ToyModelConfig& config) : config_(config) {
    config_.validate();
    const std::size_t d = config_.model_dim;
    const std::size_t p = config_.proj_dim;
    const std::size_t h = config_.heads;
    const double scale_d = 1.0 / std::sqrt(static_cast<double>(d));
    SeededRng rng(config_.seed);
    layers_.resize(config_.layers);
    for (auto& layer : layers_) {
        layer.heads.resize(h);
        for (auto& head : layer.heads) {
            head.wq = random_matrix(rng, d, p, scale_d);
            head.wk = random_matrix(rng, d, p, scale_d);
            head.wv = random_matrix(rng, d, p, scale_d);
        }
        layer.wo = random_matrix(rng, h * p, d, 1.0 / std::sqrt(static_cast<double>(h * p)));
        layer.w1 = random_matrix(rng, d, 4 * d, scale_d);
        layer.w2 = random_matrix(rng, 4 * d, d, 1.0 / std::sqrt(static_cast<double>(4 * d)));
    }
    unembed_ = random_matrix(rng, d, kVocab, scale_d);
}

Matrix ToyModel::random_input(const ToyModelConfig& config, std::uint64_t seed) {
    config.validate();
    SeededRng rng(seed);
    return random_matrix(rng, config.seq_len, config.model_dim, 1.0);
}

void ToyModel::check_input(const Matrix& input) const {
    if (input.rows != config_.seq_len || input.cols != config_.model_dim ||
        input.data.size() != input.rows * input.cols) {
        throw ValidationError("input is " + std::to_string(input.rows) + "x" + std::to_string(input.cols) +
                              ", model expects " + std::to_string(config_.seq_len) + "x" +
                              std::to_string(config_.model_dim));
    }
}

PrefillResult ToyModel::full_prefill(const Matrix& input) const { return run(input, false); }

PrefillResult ToyModel::mini_prefill(const Matrix& input) const { return run(input, true); }

PrefillResult ToyModel::run(const Matrix& input, bool mini) const {
    check_input(input);
    const auto& k = simd::kernels();
    const std::size_t t = config_.seq_len;
    const std::size_t p = config_.proj_dim;
    const std::size_t h = config_.heads;
    const std::size_t nl = config_.layers;

    TraceHeader header{1, nl, h, t};
    std::vector<float> attn(header.total_elems(), 0.0f);
    std::vector<LayerKV> kv;
    if (!mini) {
        kv.reserve(nl);
    }

    Matrix x = input;
    for (std::size_t li = 0; li < nl; ++li) {
        const LayerWeights& lw = layers_[li];
        const bool last = li + 1 == nl;
        Matrix concat(t, h * p);
        Matrix keys_all;
        Matrix values_all;
        if (!mini) {
            keys_all = Matrix(t, h * p);
            values_all = Matrix(t, h * p);
        }
        for (std::size_t hi = 0; hi < h; ++hi) {
            const HeadWeights& hw = lw.heads[hi];
            const Matrix q = matmul(x, hw.wq);
            const Matrix keys = matmul(x, hw.wk);
            float* weights = attn.data() + (li * h + hi) * t * t;
            const auto w = causal_attention(q, keys);
            std::copy(w.begin(), w.end(), weights);
            if (mini && last) {
                continue;  // only the weights are needed from the final attention
            }
            const Matrix values = matmul(x, hw.wv);
            for (std::size_t r = 0; r < t; ++r) {
                float* dst = concat.row(r).data() + hi * p;
                for (std::size_t c = 0; c <= r; ++c) {
                    k.axpy_f32(weights[r * t + c], values.row(c).data(), dst, p);
                }
            }
            if (!mini) {
                for (std::size_t r = 0; r < t; ++r) {
                    std::copy(keys.row(r).begin(), keys.row(r).end(), keys_all.row(r).begin() + hi * p);
                    std::copy(values.row(r).begin(), values.row(r).end(), values_all.row(r).begin() + hi * p);
                }
            }
        }
        if (mini && last) {
            break;
        }
        if (!mini) {
            kv.push_back(LayerKV{std::move(keys_all), std::move(values_all)});
        }

        Matrix hidden = matmul(concat, lw.wo);
        add_into(hidden, x);
        rms_normalize(hidden);
        Matrix inner = matmul(hidden, lw.w1);
        for (float& v : inner.data) {
            v = gelu(v);
        }
        Matrix out = matmul(inner, lw.w2);
        add_into(out, hidden);
        rms_normalize(out);
        x = std::move(out);
    }

    PrefillResult result{AttentionTrace(header, std::move(attn)), std::nullopt, std::nullopt, 0};
    if (!mini) {
        std::size_t bytes = 0;
        for (const auto& layer : kv) {
            bytes += layer.keys.size_bytes() + layer.values.size_bytes();
        }
        result.live_kv_bytes = bytes;
        result.kv_pairs = std::move(kv);
        Matrix last_row(1, config_.model_dim, std::vector<float>(x.row(t - 1).begin(), x.row(t - 1).end()));
        result.first_token_logits = matmul(last_row, unembed_).data;
    }
    return result;
}

std::vector<float> causal_attention(const Matrix& q, const Matrix& k) {
    const std::size_t t = q.rows;
    const std::size_t p = q.cols;
    if (k.rows != t || k.cols != p || p == 0) {
        throw ValidationError("q and k must both be t x p");
    }
    const auto& kern = simd::kernels();
    const float inv_sqrt = static_cast<float>(1.0 / std::sqrt(static_cast<double>(p)));
    std::vector<float> out(t * t, 0.0f);
    std::vector<float> logits(t);
    std::vector<double> e(t);
    for (std::size_t r = 0; r < t; ++r) {
        for (std::size_t c = 0; c <= r; ++c) {
            logits[c] = kern.dot_f32(q.row(r).data(), k.row(c).data(), p) * inv_sqrt;
        }
        const double m = kern.max_f32(logits.data(), r + 1);
        double sum = 0.0;
        for (std::size_t c = 0; c <= r; ++c) {
            e[c] = std::exp(static_cast<double>(logits[c]) - m);
            sum += e[c];
        }
        float* row = out.data() + r * t;
        for (std::size_t c = 0; c <= r; ++c) {
            row[c] = static_cast<float>(e[c] / sum);
        }
    }
    return out;
}

Matrix load_embeddings(const std::filesystem::path& path, std::size_t seq_len, std::size_t model_dim) {
    std::ifstream in(path, std::ios::binary | std::ios::ate);
    if (!in) {
        throw IoError("cannot open embeddings file '" + path.string() + "'");
    }
    const auto size = static_cast<std::size_t>(in.tellg());
    const std::size_t expected = seq_len * model_dim * sizeof(float);
    if (size != expected) {
        throw ValidationError("embeddings file is " + std::to_string(size) + " bytes, expected " +
                              std::to_string(expected));
    }
    in.seekg(0);
    Matrix m(seq_len, model_dim);
    in.read(reinterpret_cast<char*>(m.data.data()), static_cast<std::streamsize>(expected));
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : m.data) {
            auto u = std::bit_cast<std::uint32_t>(f);
            u = ((u & 0xffu) << 24) | ((u & 0xff00u) << 8) | ((u >> 8) & 0xff00u) | (u >> 24);
            f = std::bit_cast<float>(u);
        }
    }
    return m;
}

} // namespace xkv
