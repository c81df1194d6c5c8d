// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include "xkv/allocator.hpp"
#include "xkv/attnproc.hpp"
#include "xkv/error.hpp"
#include "xkv/eviction.hpp"
#include "xkv/metrics.hpp"
#include "xkv/rng.hpp"
#include "xkv/sampling.hpp"
#include "xkv/serialize.hpp"
#include "xkv/toymodel.hpp"
#include "xkv/trace.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <optional>
#include <ostream>
#include <sstream>

namespace xkv::cli {
namespace {

enum class Format { json, csv };

struct CommonOpts {
    std::size_t ows = 8;
    std::size_t pool_size = 7;
    std::string format = "json";

    ProcSettings settings() const { return {ows, pool_size}; }
    Format fmt() const { return format == "csv" ? Format::csv : Format::json; }
};

struct ConstraintOpts {
    std::optional<std::size_t> budget;
    std::optional<double> target;

    Constraint get() const {
        if (budget.has_value() == target.has_value()) {
            throw ValidationError("give exactly one of --budget or --target-ravg");
        }
        if (budget) {
            return BudgetConstraint{*budget};
        }
        return TargetConstraint{*target};
    }
};

struct ToyOpts {
    ToyModelConfig config;
    std::uint64_t input_seed = 1;
    std::string embeddings;

    Matrix input() const {
        if (!embeddings.empty()) {
            return load_embeddings(embeddings, config.seq_len, config.model_dim);
        }
        return ToyModel::random_input(config, input_seed);
    }
};

void add_common(CLI::App* cmd, CommonOpts& o, bool with_format = true) {
    cmd->add_option("--ows", o.ows, "Observation window size in tokens")->capture_default_str();
    cmd->add_option("--pool-size", o.pool_size, "Odd smoothing-kernel width")->capture_default_str();
    if (with_format) {
        cmd->add_option("--format", o.format, "Output format")
            ->check(CLI::IsMember({"json", "csv"}))
            ->capture_default_str();
    }
}

void add_constraint(CLI::App* cmd, ConstraintOpts& c) {
    auto* b = cmd->add_option("--budget", c.budget, "Total token budget across layers (excludes windows)");
    auto* t = cmd->add_option("--target-ravg", c.target, "Target mean retention in (0, 1]");
    b->excludes(t);
}

void add_toy(CLI::App* cmd, ToyOpts& t) {
    cmd->add_option("--layers", t.config.layers)->capture_default_str();
    cmd->add_option("--heads", t.config.heads)->capture_default_str();
    cmd->add_option("--seq-len", t.config.seq_len)->capture_default_str();
    cmd->add_option("--model-dim", t.config.model_dim)->capture_default_str();
    cmd->add_option("--proj-dim", t.config.proj_dim)->capture_default_str();
    cmd->add_option("--seed", t.config.seed, "Weight seed")->capture_default_str();
    cmd->add_option("--input-seed", t.input_seed, "Seed of the random token embeddings")->capture_default_str();
    cmd->add_option("--embeddings", t.embeddings, "Raw f32le seq_len x model_dim embeddings file");
}

void print_json(std::ostream& out, const nlohmann::json& j) { out << j.dump() << '\n'; }

std::vector<std::size_t> capacities(std::span<const ScoreVector> scores) {
    std::vector<std::size_t> caps;
    for (const auto& s : scores) {
        caps.push_back(s.size());
    }
    return caps;
}

int cmd_gen(const SyntheticSpec& spec, const std::string& output, std::ostream& out) {
    const AttentionTrace trace = generate_trace(spec);
    save_trace(trace, output);
    print_json(out, {{"path", output},
                     {"layers", spec.layers},
                     {"heads", spec.heads},
                     {"seq_len", spec.seq_len},
                     {"bytes", encode_trace_header(trace.header()).size() + trace.header().payload_bytes()}});
    return kExitOk;
}

int cmd_scores(const std::string& path, const CommonOpts& o, std::ostream& out) {
    const auto scores = process_trace(load_trace(path), o.settings());
    if (o.fmt() == Format::csv) {
        out << scores_csv(scores);
    } else {
        print_json(out, to_json(scores));
    }
    return kExitOk;
}

int cmd_allocate(const std::string& path, const CommonOpts& o, const ConstraintOpts& c, bool oracle,
                 std::ostream& out, std::ostream& err) {
    const auto constraint = c.get();
    const auto scores = process_trace(load_trace(path), o.settings());
    const AllocationList alloc = allocate(scores, constraint);
    const auto per_layer = layer_retention(scores, alloc);
    const double achieved = r_avg(per_layer);

    if (oracle) {
        const AllocationList ref = oracle_allocate(scores, constraint);
        const double ref_r = allocation_r_avg(scores, ref);
        const bool budget_mode = std::holds_alternative<BudgetConstraint>(constraint);
        const bool ok = budget_mode ? std::abs(ref_r - achieved) <= 1e-9 : ref.total() == alloc.total();
        if (!ok) {
            err << "error: greedy allocation disagrees with the exhaustive oracle (greedy r_avg " << achieved
                << ", total " << alloc.total() << "; oracle r_avg " << ref_r << ", total " << ref.total() << ")\n";
            return kExitInternal;
        }
    }

    if (o.fmt() == Format::csv) {
        out << "layer,n,R\n";
        for (std::size_t i = 0; i < alloc.sizes.size(); ++i) {
            out << i << ',' << alloc.sizes[i] << ',' << format_double(per_layer[i]) << '\n';
        }
    } else {
        nlohmann::json j = to_json(alloc);
        j["r_avg"] = achieved;
        if (oracle) {
            j["oracle_checked"] = true;
        }
        print_json(out, j);
    }
    return kExitOk;
}

struct SimulateOpts {
    std::string trace;
    bool toy = false;
    std::string allocation;
    std::string profile;
    bool auto_alloc = false;
    bool compare_uniform = false;
    std::size_t kv_width = 128;
};

nlohmann::json baseline_json(const EvictionReport& r) {
    return {{"sizes", r.sizes}, {"r_avg", r.r_avg}, {"compression_ratio", r.compression_ratio},
            {"per_layer_r", r.per_layer_r}};
}

int cmd_simulate(const SimulateOpts& s, const ToyOpts& toy, const CommonOpts& o, const ConstraintOpts& c,
                 std::ostream& out) {
    if (s.toy == !s.trace.empty()) {
        throw ValidationError("give exactly one of --trace or --toy");
    }
    const int sources = (s.auto_alloc ? 1 : 0) + (s.allocation.empty() ? 0 : 1) + (s.profile.empty() ? 0 : 1);
    if (sources != 1) {
        throw ValidationError("give exactly one of --allocation, --auto or --profile");
    }
    if (!s.auto_alloc && (c.budget || c.target)) {
        throw ValidationError("--budget/--target-ravg only apply with --auto");
    }
    const ProcSettings settings = o.settings();

    // Score vectors drive --auto and the uniform baseline. In toy mode they
    // come from the cache-free mini-prefill, as they would before a real prefill.
    std::optional<ToyModel> model;
    std::optional<Matrix> input;
    std::optional<AttentionTrace> trace;
    std::vector<ScoreVector> scores;
    if (s.toy) {
        model.emplace(toy.config);
        input = toy.input();
        scores = process_trace(model->mini_prefill(*input).per_layer_attention, settings);
    } else {
        trace = load_trace(s.trace);
        scores = process_trace(*trace, settings);
    }

    AllocationList alloc;
    std::string source;
    if (s.auto_alloc) {
        alloc = allocate(scores, c.get());
        source = "auto";
    } else if (!s.allocation.empty()) {
        alloc = load_allocation(s.allocation);
        source = "file";
    } else {
        alloc = load_profile(s.profile).averaged;
        source = "profile";
    }

    auto run = [&](const AllocationList& a) {
        if (s.toy) {
            return simulate_toy(*model, *input, a, settings).report;
        }
        return simulate_task(*trace, a, settings, s.kv_width);
    };
    const EvictionReport report = run(alloc);
    std::optional<EvictionReport> uniform;
    if (s.compare_uniform) {
        uniform = run(uniform_allocation(alloc.total(), capacities(scores)));
    }

    if (o.fmt() == Format::csv) {
        if (uniform) {
            for (const EvictionReport* r : std::array<const EvictionReport*, 2>{&report, &*uniform}) {
                std::istringstream rows(report_csv(*r));
                std::string line;
                std::getline(rows, line);
                if (r == &report) {
                    out << "method," << line << '\n';
                }
                while (std::getline(rows, line)) {
                    out << (r == &report ? "personalized," : "uniform,") << line << '\n';
                }
            }
        } else {
            out << report_csv(report);
        }
        return kExitOk;
    }
    nlohmann::json j = to_json(report);
    j["allocation_source"] = source;
    std::ostringstream pct;
    pct << std::fixed << std::setprecision(1) << report.compression_ratio * 100.0 << "% ratio / "
        << report.memory_reduction() * 100.0 << "% reduction";
    j["summary"] = pct.str();
    if (uniform) {
        j["uniform_baseline"] = baseline_json(*uniform);
    }
    print_json(out, j);
    return kExitOk;
}

int cmd_profile(const std::vector<std::string>& traces, const std::string& task_type, double ratio,
                std::uint64_t seed, const std::string& output, const CommonOpts& o, const ConstraintOpts& c,
                std::ostream& out) {
    if (traces.empty()) {
        throw ValidationError("profile needs at least one trace");
    }
    const auto constraint = c.get();
    const std::size_t k = sample_count(traces.size(), ratio);
    std::vector<std::size_t> order(traces.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    SeededRng rng(seed);
    for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[rng.below(i + 1)]);
    }
    order.resize(k);
    std::sort(order.begin(), order.end());

    std::vector<AllocationList> samples;
    for (std::size_t idx : order) {
        samples.push_back(allocate(process_trace(load_trace(traces[idx]), o.settings()), constraint));
    }
    const AllocationProfile profile = build_profile(task_type, std::move(samples), ratio);
    if (!output.empty()) {
        save_profile(profile, output);
    }
    nlohmann::json j = to_json(profile);
    std::vector<std::string> used;
    for (std::size_t idx : order) {
        used.push_back(traces[idx]);
    }
    j["sampled_traces"] = used;
    if (profile.samples.size() >= 2) {
        try {
            j["similarity"] = profile_similarity(profile.samples);
        } catch (const DomainError&) {
            j["similarity"] = nullptr;
        }
    }
    print_json(out, j);
    return kExitOk;
}

std::vector<std::size_t> parse_size_list(const std::string& s) {
    std::vector<std::size_t> v;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        v.push_back(std::stoul(item));
    }
    return v;
}

int cmd_curves(const std::string& path, const std::string& kind, const std::vector<std::size_t>& sizes,
               const std::vector<double>& targets, const CommonOpts& o, std::ostream& out) {
    const auto scores = process_trace(load_trace(path), o.settings());
    if (kind == "retention") {
        out << "layer,n,R\n";
        for (const auto& s : scores) {
            const RetentionCurve curve(s.scores);
            if (sizes.empty()) {
                for (std::size_t n = 0; n <= curve.capacity(); ++n) {
                    out << s.layer << ',' << n << ',' << format_double(curve.at(n)) << '\n';
                }
            } else {
                for (std::size_t n : sizes) {
                    out << s.layer << ',' << n << ',' << format_double(curve.at(n)) << '\n';
                }
            }
        }
        return kExitOk;
    }
    if (targets.empty()) {
        throw ValidationError("--targets is required for min-size curves");
    }
    out << "layer,R_target,n_min\n";
    for (const auto& s : scores) {
        const RetentionCurve curve(s.scores);
        for (double target : targets) {
            out << s.layer << ',' << format_double(target) << ',' << curve.min_size_for(target) << '\n';
        }
    }
    return kExitOk;
}

int cmd_toy(const ToyOpts& toy, bool mini, const std::string& output, std::ostream& out) {
    const ToyModel model(toy.config);
    const Matrix input = toy.input();
    const PrefillResult r = mini ? model.mini_prefill(input) : model.full_prefill(input);
    save_trace(r.per_layer_attention, output);
    print_json(out, {{"path", output}, {"mode", mini ? "mini" : "full"}, {"live_kv_bytes", r.live_kv_bytes}});
    return kExitOk;
}

} // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
    CLI::App app{"Personalized per-layer KV-cache budgeting and eviction toolkit", "xkv"};
    app.require_subcommand(1);

    SyntheticSpec gen_spec;
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "Generate a synthetic attention trace");
    gen->add_option("--layers", gen_spec.layers)->capture_default_str();
    gen->add_option("--heads", gen_spec.heads)->capture_default_str();
    gen->add_option("--seq-len", gen_spec.seq_len)->capture_default_str();
    gen->add_option("--sparsity", gen_spec.sparsity)->capture_default_str();
    gen->add_option("--layer-skew", gen_spec.layer_skew)->capture_default_str();
    gen->add_option("--seed", gen_spec.seed)->capture_default_str();
    gen->add_option("-o,--output", gen_out, "Trace file to write")->required();

    CommonOpts scores_opts;
    std::string scores_path;
    auto* scores = app.add_subcommand("scores", "Per-layer token importance scores of a trace");
    scores->add_option("trace", scores_path)->required();
    add_common(scores, scores_opts);

    CommonOpts alloc_opts;
    ConstraintOpts alloc_c;
    std::string alloc_path;
    bool alloc_oracle = false;
    auto* alloc = app.add_subcommand("allocate", "Greedy per-layer cache-size allocation for a trace");
    alloc->add_option("trace", alloc_path)->required();
    add_common(alloc, alloc_opts);
    add_constraint(alloc, alloc_c);
    alloc->add_flag("--oracle", alloc_oracle, "Cross-check against exhaustive search (small inputs only)");

    CommonOpts sim_opts;
    ConstraintOpts sim_c;
    SimulateOpts sim_s;
    ToyOpts sim_toy;
    auto* sim = app.add_subcommand("simulate", "Evict per an allocation and report retention and memory");
    sim->add_option("--trace", sim_s.trace, "Trace file input");
    sim->add_flag("--toy", sim_s.toy, "Run the toy transformer (mini-prefill, allocate, prefill, evict)");
    add_toy(sim, sim_toy);
    sim->add_option("--allocation", sim_s.allocation, "Allocation file (.json or .csv)");
    sim->add_option("--profile", sim_s.profile, "Reuse the averaged list of a sampling profile");
    sim->add_flag("--auto", sim_s.auto_alloc, "Allocate from the input's own scores");
    add_constraint(sim, sim_c);
    sim->add_flag("--compare-uniform", sim_s.compare_uniform, "Add a uniform allocation of equal total");
    sim->add_option("--kv-width", sim_s.kv_width, "K/V elements per token per layer (trace input)")
        ->capture_default_str();
    add_common(sim, sim_opts);

    CommonOpts prof_opts;
    ConstraintOpts prof_c;
    std::vector<std::string> prof_traces;
    std::string prof_type = "default";
    std::string prof_out;
    double prof_ratio = kDefaultSampleRatio;
    std::uint64_t prof_seed = 0;
    auto* prof = app.add_subcommand("profile", "Average allocations over a sample of same-type tasks");
    prof->add_option("traces", prof_traces)->required();
    prof->add_option("--task-type", prof_type)->capture_default_str();
    prof->add_option("--sample-ratio", prof_ratio)->capture_default_str();
    prof->add_option("--seed", prof_seed, "Seed for choosing the sampled tasks")->capture_default_str();
    prof->add_option("-o,--output", prof_out, "Profile JSON to write");
    add_common(prof, prof_opts, false);
    add_constraint(prof, prof_c);

    CommonOpts curve_opts;
    std::string curve_path;
    std::string curve_kind = "retention";
    std::string curve_sizes;
    std::vector<double> curve_targets;
    auto* curves = app.add_subcommand("curves", "CSV of R versus n, or minimal n per R target");
    curves->add_option("trace", curve_path)->required();
    curves->add_option("--kind", curve_kind)
        ->check(CLI::IsMember({"retention", "min-size"}))
        ->capture_default_str();
    curves->add_option("--sizes", curve_sizes, "Comma-separated cache sizes (default: all)");
    curves->add_option("--targets", curve_targets, "Retention targets for --kind min-size")->delimiter(',');
    add_common(curves, curve_opts, false);

    ToyOpts toy_opts;
    std::string toy_out;
    bool toy_mini = false;
    auto* toy = app.add_subcommand("toy", "Dump the toy model's attention as a trace file");
    add_toy(toy, toy_opts);
    toy->add_flag("--mini", toy_mini, "Record via mini-prefill instead of full prefill");
    toy->add_option("-o,--output", toy_out)->required();

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(reversed);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e, out, err);
    } catch (const CLI::ParseError& e) {
        app.exit(e, out, err);
        return kExitValidation;
    }

    try {
        if (*gen) {
            return cmd_gen(gen_spec, gen_out, out);
        }
        if (*scores) {
            return cmd_scores(scores_path, scores_opts, out);
        }
        if (*alloc) {
            return cmd_allocate(alloc_path, alloc_opts, alloc_c, alloc_oracle, out, err);
        }
        if (*sim) {
            return cmd_simulate(sim_s, sim_toy, sim_opts, sim_c, out);
        }
        if (*prof) {
            return cmd_profile(prof_traces, prof_type, prof_ratio, prof_seed, prof_out, prof_opts, prof_c, out);
        }
        if (*curves) {
            std::vector<std::size_t> sizes;
            try {
                sizes = parse_size_list(curve_sizes);
            } catch (const std::exception&) {
                throw ValidationError("--sizes must be a comma-separated list of integers");
            }
            return cmd_curves(curve_path, curve_kind, sizes, curve_targets, curve_opts, out);
        }
        if (*toy) {
            return cmd_toy(toy_opts, toy_mini, toy_out, out);
        }
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitValidation;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << '\n';
        return kExitInternal;
    }
    return kExitInternal;
}

} // namespace xkv::cli
