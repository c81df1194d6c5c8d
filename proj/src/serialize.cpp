// SPDX-License-Identifier: Apache-2.0

#include "xkv/serialize.hpp"

#include "xkv/error.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace xkv {
namespace {

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError("cannot open '" + path.string() + "'");
    }
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

nlohmann::json parse_json(const std::string& text, const std::string& what) {
    try {
        return nlohmann::json::parse(text);
    } catch (const nlohmann::json::exception& e) {
        throw ValidationError("malformed " + what + ": " + e.what());
    }
}

} // namespace

std::string format_double(double v) {
    char buf[64];
    auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

nlohmann::json to_json(const AllocationList& a) { return nlohmann::json{{"sizes", a.sizes}}; }

nlohmann::json to_json(std::span<const ScoreVector> scores) {
    auto arr = nlohmann::json::array();
    for (const auto& s : scores) {
        arr.push_back({{"layer", s.layer}, {"scores", s.scores}});
    }
    return arr;
}

nlohmann::json to_json(const EvictionReport& r) {
    return nlohmann::json{
        {"layers", r.layers},
        {"seq_len", r.seq_len},
        {"ows", r.ows},
        {"kv_width", r.kv_width},
        {"sizes", r.sizes},
        {"retained_indices", r.retained_indices},
        {"compression_ratio", r.compression_ratio},
        {"memory_reduction", r.memory_reduction()},
        {"bytes_before", r.bytes_before},
        {"bytes_after", r.bytes_after},
        {"per_layer_r", r.per_layer_r},
        {"r_avg", r.r_avg},
        {"window_counted_on_top", r.window_counted_on_top},
    };
}

nlohmann::json to_json(const AllocationProfile& p) {
    auto samples = nlohmann::json::array();
    for (const auto& s : p.samples) {
        samples.push_back(s.sizes);
    }
    return nlohmann::json{
        {"task_type", p.task_type},
        {"sample_ratio", p.sample_ratio},
        {"samples", samples},
        {"averaged", p.averaged.sizes},
    };
}

AllocationList allocation_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("sizes") || !j["sizes"].is_array()) {
        throw ValidationError("allocation JSON needs a \"sizes\" array");
    }
    AllocationList a;
    for (const auto& v : j["sizes"]) {
        if (!v.is_number_unsigned()) {
            throw ValidationError("allocation sizes must be nonnegative integers");
        }
        a.sizes.push_back(v.get<std::size_t>());
    }
    return a;
}

AllocationProfile profile_from_json(const nlohmann::json& j) {
    if (!j.is_object() || !j.contains("task_type") || !j.contains("samples") || !j.contains("averaged")) {
        throw ValidationError("profile JSON needs task_type, samples and averaged");
    }
    if (!j["task_type"].is_string() || !j["samples"].is_array() ||
        (j.contains("sample_ratio") && !j["sample_ratio"].is_number())) {
        throw ValidationError("profile JSON has a field of the wrong type");
    }
    AllocationProfile p;
    p.task_type = j["task_type"].get<std::string>();
    p.sample_ratio = j.value("sample_ratio", kDefaultSampleRatio);
    for (const auto& s : j["samples"]) {
        p.samples.push_back(allocation_from_json(nlohmann::json{{"sizes", s}}));
    }
    p.averaged = allocation_from_json(nlohmann::json{{"sizes", j["averaged"]}});
    for (const auto& s : p.samples) {
        if (s.sizes.size() != p.averaged.sizes.size()) {
            throw ValidationError("profile samples and averaged list differ in layer count");
        }
    }
    return p;
}

std::string allocation_csv(const AllocationList& a) {
    std::ostringstream os;
    os << "layer,n\n";
    for (std::size_t i = 0; i < a.sizes.size(); ++i) {
        os << i << ',' << a.sizes[i] << '\n';
    }
    return os.str();
}

AllocationList allocation_from_csv(const std::string& text) {
    std::istringstream in(text);
    std::string line;
    if (!std::getline(in, line) || line.rfind("layer,n", 0) != 0) {
        throw ValidationError("allocation CSV must start with a 'layer,n' header");
    }
    AllocationList a;
    while (std::getline(in, line)) {
        if (line.empty() || line == "\r") {
            continue;
        }
        const auto comma = line.find(',');
        std::size_t layer = 0;
        std::size_t n = 0;
        const char* b = line.data();
        const char* e = line.data() + line.size();
        if (line.back() == '\r') {
            --e;
        }
        if (comma == std::string::npos || std::from_chars(b, b + comma, layer).ec != std::errc{} ||
            std::from_chars(b + comma + 1, e, n).ec != std::errc{}) {
            throw ValidationError("bad allocation CSV row: " + line);
        }
        if (layer != a.sizes.size()) {
            throw ValidationError("allocation CSV layers must be listed in order from 0");
        }
        a.sizes.push_back(n);
    }
    return a;
}

std::string scores_csv(std::span<const ScoreVector> scores) {
    std::ostringstream os;
    os << "layer,position,score\n";
    for (const auto& s : scores) {
        for (std::size_t i = 0; i < s.scores.size(); ++i) {
            os << s.layer << ',' << i << ',' << format_double(s.scores[i]) << '\n';
        }
    }
    return os.str();
}

std::string report_csv(const EvictionReport& r) {
    std::ostringstream os;
    os << "layer,n_i,retained,R_i\n";
    for (std::size_t i = 0; i < r.layers; ++i) {
        os << i << ',' << r.sizes[i] << ',' << r.retained_indices.at(i).size() << ','
           << format_double(r.per_layer_r.at(i)) << '\n';
    }
    return os.str();
}

AllocationList load_allocation(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    if (path.extension() == ".csv") {
        return allocation_from_csv(text);
    }
    return allocation_from_json(parse_json(text, "allocation file"));
}

void save_profile(const AllocationProfile& p, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError("cannot open '" + path.string() + "' for writing");
    }
    out << to_json(p).dump(2) << '\n';
    if (!out) {
        throw IoError("failed writing profile to '" + path.string() + "'");
    }
}

AllocationProfile load_profile(const std::filesystem::path& path) {
    return profile_from_json(parse_json(read_file(path), "profile file"));
}

} // namespace xkv
