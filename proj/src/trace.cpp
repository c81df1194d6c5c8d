// SPDX-License-Identifier: Apache-2.0

#include "xkv/trace.hpp"

#include "xkv/error.hpp"
#include "xkv/rng.hpp"
#include "xkv/simd.hpp"

#include <json.hpp>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>
#include <sstream>

namespace xkv {
namespace {

constexpr std::size_t kMaxHeaderBytes = 4096;

std::uint32_t to_little_endian(std::uint32_t v) {
    if constexpr (std::endian::native == std::endian::little) {
        return v;
    } else {
        return ((v & 0xffu) << 24) | ((v & 0xff00u) << 8) | ((v >> 8) & 0xff00u) | (v >> 24);
    }
}

std::string coords(std::size_t layer, std::size_t head, std::size_t row) {
    std::ostringstream os;
    os << "layer " << layer << ", head " << head << ", row " << row;
    return os.str();
}

} // namespace

void TraceHeader::validate() const {
    if (version != 1) {
        throw ValidationError("unsupported trace version " + std::to_string(version));
    }
    if (layers < 1 || heads < 1) {
        throw ValidationError("trace needs at least one layer and one head");
    }
    if (seq_len < 2) {
        throw ValidationError("trace seq_len must be >= 2, got " + std::to_string(seq_len));
    }
}

AttentionTrace::AttentionTrace(TraceHeader header, std::vector<float> weights)
    : header_(header), weights_(std::move(weights)) {
    // Single-token traces can exist in memory (a t=1 forward pass); the file
    // format and the processing pipeline require seq_len >= 2.
    if (header_.version != 1 || header_.layers < 1 || header_.heads < 1 || header_.seq_len < 1) {
        throw ValidationError("trace shape needs version 1 and at least one layer, head and token");
    }
    if (weights_.size() != header_.total_elems()) {
        throw ValidationError("trace payload has " + std::to_string(weights_.size()) + " values, expected " +
                              std::to_string(header_.total_elems()));
    }
}

std::span<const float> AttentionTrace::matrix(std::size_t layer, std::size_t head) const {
    const std::size_t tt = header_.matrix_elems();
    return {weights_.data() + (layer * header_.heads + head) * tt, tt};
}

float AttentionTrace::at(std::size_t layer, std::size_t head, std::size_t row, std::size_t col) const {
    return matrix(layer, head)[row * header_.seq_len + col];
}

void AttentionTrace::validate(double row_sum_tolerance) const {
    const std::size_t t = header_.seq_len;
    const auto& k = simd::kernels();
    for (std::size_t l = 0; l < header_.layers; ++l) {
        for (std::size_t h = 0; h < header_.heads; ++h) {
            const auto m = matrix(l, h);
            for (std::size_t r = 0; r < t; ++r) {
                const float* row = m.data() + r * t;
                for (std::size_t c = 0; c <= r; ++c) {
                    if (!(row[c] >= 0.0f && row[c] <= 1.0f)) {
                        throw ValidationError("attention weight outside [0,1] at " + coords(l, h, r) + ", col " +
                                              std::to_string(c));
                    }
                }
                for (std::size_t c = r + 1; c < t; ++c) {
                    if (row[c] != 0.0f) {
                        throw ValidationError("causality violated at " + coords(l, h, r) + ", col " +
                                              std::to_string(c));
                    }
                }
                const double sum = k.sum_f32_as_f64(row, r + 1);
                if (std::abs(sum - 1.0) > row_sum_tolerance) {
                    std::ostringstream os;
                    os << "row sum " << sum << " deviates from 1 at " << coords(l, h, r);
                    throw ValidationError(os.str());
                }
            }
        }
    }
}

std::string encode_trace_header(const TraceHeader& header) {
    std::ostringstream os;
    os << R"({"version":)" << header.version << R"(,"layers":)" << header.layers << R"(,"heads":)" << header.heads
       << R"(,"seq_len":)" << header.seq_len << R"(,"dtype":"f32le"})" << '\n';
    return os.str();
}

TraceHeader decode_trace_header(const std::string& line) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError(std::string("malformed trace header: ") + e.what());
    }
    if (!j.is_object()) {
        throw ValidationError("malformed trace header: not a JSON object");
    }
    for (const char* key : {"version", "layers", "heads", "seq_len"}) {
        if (!j.contains(key) || !j[key].is_number_unsigned()) {
            throw ValidationError(std::string("malformed trace header: missing or non-integer \"") + key + "\"");
        }
    }
    if (!j.contains("dtype") || j["dtype"] != "f32le") {
        throw ValidationError("malformed trace header: dtype must be \"f32le\"");
    }
    TraceHeader h;
    h.version = j["version"].get<int>();
    h.layers = j["layers"].get<std::size_t>();
    h.heads = j["heads"].get<std::size_t>();
    h.seq_len = j["seq_len"].get<std::size_t>();
    h.validate();
    return h;
}

AttentionTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open trace file '" + path.string() + "'");
    }
    std::string line;
    char ch = 0;
    while (in.get(ch) && ch != '\n') {
        line.push_back(ch);
        if (line.size() > kMaxHeaderBytes) {
            throw ValidationError("malformed trace header: no newline within " + std::to_string(kMaxHeaderBytes) +
                                  " bytes");
        }
    }
    if (ch != '\n') {
        throw ValidationError("malformed trace header: missing terminating newline");
    }
    const TraceHeader header = decode_trace_header(line);

    const std::uint64_t expected = header.payload_bytes();
    std::vector<float> weights(header.total_elems());
    in.read(reinterpret_cast<char*>(weights.data()), static_cast<std::streamsize>(expected));
    const auto got = static_cast<std::uint64_t>(in.gcount());
    char extra = 0;
    if (got != expected || in.read(&extra, 1)) {
        std::uint64_t actual = got;
        if (got == expected) {
            in.clear();
            in.seekg(0, std::ios::end);
            actual = static_cast<std::uint64_t>(in.tellg()) - line.size() - 1;
        }
        throw ValidationError("trace payload is " + std::to_string(actual) + " bytes, expected " +
                              std::to_string(expected) + " (layers*heads*seq_len^2*4)");
    }
    if constexpr (std::endian::native != std::endian::little) {
        for (float& f : weights) {
            f = std::bit_cast<float>(to_little_endian(std::bit_cast<std::uint32_t>(f)));
        }
    }

    AttentionTrace trace(header, std::move(weights));
    trace.validate(kLoadRowSumTolerance);
    return trace;
}

void save_trace(const AttentionTrace& trace, const std::filesystem::path& path) {
    if (path.empty()) {
        throw IoError("empty output path");
    }
    trace.header().validate();
    trace.validate(kLoadRowSumTolerance);

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    const std::string header = encode_trace_header(trace.header());
    out.write(header.data(), static_cast<std::streamsize>(header.size()));
    const auto w = trace.weights();
    if constexpr (std::endian::native == std::endian::little) {
        out.write(reinterpret_cast<const char*>(w.data()), static_cast<std::streamsize>(w.size_bytes()));
    } else {
        for (float f : w) {
            const std::uint32_t le = to_little_endian(std::bit_cast<std::uint32_t>(f));
            out.write(reinterpret_cast<const char*>(&le), 4);
        }
    }
    out.flush();
    if (!out) {
        throw IoError("failed writing trace to '" + path.string() + "'");
    }
}

void SyntheticSpec::validate() const {
    TraceHeader{1, layers, heads, seq_len}.validate();
    if (!(sparsity > 0.0 && sparsity <= 1.0)) {
        throw ValidationError("sparsity must be in (0, 1]");
    }
    if (!(layer_skew >= 0.0) || !std::isfinite(layer_skew)) {
        throw ValidationError("layer_skew must be a finite value >= 0");
    }
}

AttentionTrace generate_trace(const SyntheticSpec& spec) {
    spec.validate();
    const std::size_t t = spec.seq_len;
    // Relative weight of a heavy column over a light one.
    constexpr double kHeavyContrast = 30.0;

    SeededRng rng(spec.seed);
    std::vector<std::size_t> perm(t);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    for (std::size_t i = t - 1; i > 0; --i) {
        std::swap(perm[i], perm[rng.below(i + 1)]);
    }

    const double base_heavy = std::max(1.0, std::round(spec.sparsity * static_cast<double>(t)));
    const double jitter = 0.5 * std::min(1.0, spec.layer_skew);

    TraceHeader header{1, spec.layers, spec.heads, t};
    std::vector<float> weights(header.total_elems(), 0.0f);
    std::vector<double> raw(t);
    std::vector<char> heavy(t);

    for (std::size_t l = 0; l < spec.layers; ++l) {
        // Seed-independent per-layer offset in [-0.5, 0.5], so tasks generated
        // from the same settings share their cross-layer trend.
        const double z = static_cast<double>((l * 5 + 2) % 9) / 8.0 - 0.5;
        const double scaled = std::round(base_heavy * std::exp(spec.layer_skew * z));
        const auto heavy_count = static_cast<std::size_t>(std::clamp(scaled, 1.0, static_cast<double>(t)));
        const auto shift = static_cast<std::size_t>(
            std::floor(static_cast<double>(l) * spec.layer_skew * base_heavy)) % t;

        std::fill(heavy.begin(), heavy.end(), 0);
        for (std::size_t j = 0; j < heavy_count; ++j) {
            heavy[perm[(shift + j) % t]] = 1;
        }

        for (std::size_t h = 0; h < spec.heads; ++h) {
            for (std::size_t c = 0; c < t; ++c) {
                const double base = heavy[c] ? 1.0 + kHeavyContrast : 1.0;
                const double u = jitter > 0.0 ? rng.uniform() : 0.0;
                raw[c] = base * (1.0 + jitter * u);
            }
            float* m = weights.data() + (l * spec.heads + h) * t * t;
            double prefix = 0.0;
            for (std::size_t r = 0; r < t; ++r) {
                prefix += raw[r];
                const double inv = 1.0 / prefix;
                for (std::size_t c = 0; c <= r; ++c) {
                    m[r * t + c] = static_cast<float>(raw[c] * inv);
                }
            }
        }
    }
    return AttentionTrace(header, std::move(weights));
}

} // namespace xkv
