// menas: maximum-entropy scoring, search and analysis for CNN-Transformer
// backbones. Subcommands: score, search, correlate, sweep, uniformize.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "manifest.hpp"
#include "menas/analysis.hpp"
#include "menas/evolution.hpp"

namespace fs = std::filesystem;
using Json = nlohmann::ordered_json;
using namespace menas;

namespace {

InputShape parse_shape(const std::string& text) {
    const auto sep = text.find('x');
    if (sep == std::string::npos) throw ConfigError("shape: expected HxW, got \"" + text + "\"");
    try {
        InputShape shape;
        shape.height = std::stoi(text.substr(0, sep));
        shape.width = std::stoi(text.substr(sep + 1));
        if (shape.height <= 0 || shape.width <= 0) throw ConfigError("shape: must be positive");
        return shape;
    } catch (const ConfigError&) {
        throw;
    } catch (const std::exception&) {
        throw ConfigError("shape: expected HxW, got \"" + text + "\"");
    }
}

std::string shape_string(const InputShape& s) {
    return std::to_string(s.height) + "x" + std::to_string(s.width);
}

void ensure_out_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw ConfigError("cannot create output directory " + dir.string());
}

Architecture load_and_validate(const fs::path& path) {
    const Architecture arch = load_arch(path);
    const ValidationReport report = validate(arch);
    if (!report.ok()) {
        throw ValidationError(path.string() + " failed validation:\n" + report.to_string());
    }
    return arch;
}

MutationKind parse_kind(const std::string& name) {
    for (MutationKind k : {MutationKind::kernel, MutationKind::layers, MutationKind::channels,
                           MutationKind::bottleneck_width, MutationKind::hidden_dim,
                           MutationKind::dim_feedforward}) {
        if (name == mutation_kind_name(k)) return k;
    }
    throw ConfigError("unknown mutation kind \"" + name + "\"");
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreOptions {
    std::string arch_path;
    std::string scorer = "mc";
    std::string weights = "A1";
    std::string shape = "320x320";
    int repeats = 8;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir;
};

int run_score(const ScoreOptions& opt) {
    const std::string started = timestamp_utc();
    const Architecture arch = load_and_validate(opt.arch_path);
    const Scorer scorer = parse_scorer(opt.scorer);
    const FitnessWeights weights = FitnessWeights::parse(opt.weights);

    McConfig mc;
    mc.repeats = opt.repeats;
    mc.seed = opt.seed;
    mc.shape = parse_shape(opt.shape);
    mc.workers = opt.workers;

    const StageStatsArray stats = [&] {
        if (scorer == Scorer::analytic) return analytic_stage_stats(arch, mc.shape);
        const auto mc_stats = mc_stage_stats(arch, mc);
        if (!mc_stats) throw ScoringError("degenerate variance while scoring " + opt.arch_path);
        return *mc_stats;
    }();
    const FitnessValue fv = fitness(stats, weights);
    const FlopsCount flops = estimate_flops(arch, mc.shape);

    std::printf("architecture: %s (%s)\n", arch.name.c_str(), opt.arch_path.c_str());
    std::printf("scorer: %s  weights: %s  input: %sx3  seed: %llu\n", scorer_name(scorer).c_str(),
                weights.label().c_str(), shape_string(mc.shape).c_str(),
                static_cast<unsigned long long>(opt.seed));
    std::printf("%-6s %18s %14s %16s\n", "stage", "ln(var_eff)", "Z'", "FLOPs");
    for (int i = 0; i < kNumStages; ++i) {
        std::printf("C%-5d %18.4f %14.4f %16lld\n", i + 1, stats[i].log_effective_variance,
                    fv.per_stage_z[i], static_cast<long long>(flops.per_stage[i]));
    }
    std::printf("Z(G) = %.6f\n", fv.value);
    std::printf("total FLOPs = %lld\n", static_cast<long long>(flops.total));

    if (!opt.out_dir.empty()) {
        const fs::path dir(opt.out_dir);
        ensure_out_dir(dir);
        Json report;
        report["architecture"] = arch.name;
        report["stages"] = Json::array();
        for (int i = 0; i < kNumStages; ++i) {
            Json row;
            row["stage"] = i + 1;
            row["log_effective_variance"] = stats[i].log_effective_variance;
            row["z"] = fv.per_stage_z[i];
            row["flops"] = flops.per_stage[i];
            report["stages"].push_back(row);
        }
        report["fitness"] = fv.value;
        report["total_flops"] = flops.total;
        std::ofstream out(dir / "score.json");
        out << report.dump(2) << "\n";

        RunManifest manifest;
        manifest.command = "score";
        manifest.seed = opt.seed;
        manifest.config = {{"arch", opt.arch_path},
                           {"scorer", scorer_name(scorer)},
                           {"weights", weights.label()},
                           {"shape", shape_string(mc.shape)},
                           {"repeats", opt.repeats},
                           {"workers", opt.workers}};
        manifest.started_at = started;
        manifest.finished_at = timestamp_utc();
        manifest.write(dir / "manifest.json");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// search
// ---------------------------------------------------------------------------

struct SearchOverrides {
    std::string config_path;
    std::optional<long long> iterations;
    std::optional<int> population;
    std::optional<std::int64_t> flops_budget;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> scorer;
    std::optional<std::string> weights;
    std::optional<std::string> shape;
    std::optional<int> repeats;
    std::optional<int> workers;
    std::string out_dir = "search_out";
};

SearchConfig resolve_search_config(const SearchOverrides& opt, Json& resolved) {
    std::ifstream in(opt.config_path);
    if (!in) throw ConfigError("cannot open config file " + opt.config_path);
    Json doc;
    try {
        doc = Json::parse(in);
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config file is not valid JSON: " + std::string(e.what()));
    }

    SearchConfig cfg;

    // seed architecture: path (relative to the config file) or inline object
    if (!doc.contains("seed_arch")) throw ConfigError("config: missing seed_arch");
    if (doc["seed_arch"].is_string()) {
        fs::path seed_path = doc["seed_arch"].get<std::string>();
        if (seed_path.is_relative()) seed_path = fs::path(opt.config_path).parent_path() / seed_path;
        cfg.seed_arch = load_and_validate(seed_path);
        resolved["seed_arch"] = seed_path.string();
    } else {
        cfg.seed_arch = from_json(doc["seed_arch"].dump());
        resolved["seed_arch"] = doc["seed_arch"];
    }

    const auto get_or = [&](const char* key, auto fallback) {
        using T = decltype(fallback);
        if (doc.contains(key)) return doc[key].get<T>();
        return fallback;
    };

    cfg.population = opt.population.value_or(get_or("population", 64));
    cfg.iterations = opt.iterations.value_or(get_or("iterations", 1000ll));
    cfg.seed = opt.seed.value_or(get_or("seed", std::uint64_t{0}));
    cfg.mc.repeats = opt.repeats.value_or(get_or("repeats", 8));
    cfg.workers = opt.workers.value_or(get_or("workers", 1));
    cfg.scorer = parse_scorer(opt.scorer.value_or(get_or("scorer", std::string("mc"))));

    std::string weights_text = opt.weights.value_or("");
    if (weights_text.empty()) {
        if (doc.contains("weights") && doc["weights"].is_array()) {
            std::string joined;
            for (const auto& v : doc["weights"]) {
                if (!joined.empty()) joined += ",";
                joined += std::to_string(v.get<double>());
            }
            weights_text = joined;
        } else {
            weights_text = get_or("weights", std::string("A1"));
        }
    }
    cfg.weights = FitnessWeights::parse(weights_text);

    cfg.mc.shape = parse_shape(opt.shape.value_or(get_or("shape", std::string("320x320"))));
    cfg.mc.workers = cfg.workers;

    if (!doc.contains("flops_budget") && !opt.flops_budget) {
        throw ConfigError("config: missing flops_budget");
    }
    cfg.flops_budget = opt.flops_budget.value_or(doc.value("flops_budget", std::int64_t{0}));

    if (doc.contains("mutable_stages")) {
        cfg.mutable_stages = StageMask{};
        for (const auto& v : doc["mutable_stages"]) {
            const int idx = v.get<int>();
            if (idx < 1 || idx > kNumStages) throw ConfigError("config: mutable_stages entries must be 1..6");
            cfg.mutable_stages[idx - 1] = true;
        }
    }
    if (doc.contains("allowed_kinds")) {
        for (const auto& v : doc["allowed_kinds"]) {
            cfg.allowed_kinds.push_back(parse_kind(v.get<std::string>()));
        }
    }

    resolved["population"] = cfg.population;
    resolved["iterations"] = cfg.iterations;
    resolved["flops_budget"] = cfg.flops_budget;
    resolved["seed"] = cfg.seed;
    resolved["scorer"] = scorer_name(cfg.scorer);
    resolved["weights"] = cfg.weights.label();
    resolved["shape"] = shape_string(cfg.mc.shape);
    resolved["repeats"] = cfg.mc.repeats;
    resolved["workers"] = cfg.workers;
    {
        Json stages = Json::array();
        for (int i = 0; i < kNumStages; ++i) {
            if (cfg.mutable_stages[i]) stages.push_back(i + 1);
        }
        resolved["mutable_stages"] = stages;
        Json kinds = Json::array();
        for (MutationKind k : cfg.allowed_kinds) kinds.push_back(mutation_kind_name(k));
        resolved["allowed_kinds"] = kinds;
    }
    return cfg;
}

int run_search(const SearchOverrides& opt) {
    const std::string started = timestamp_utc();
    Json resolved;
    const SearchConfig cfg = resolve_search_config(opt, resolved);

    const SearchResult result = evolve(cfg);

    const fs::path dir(opt.out_dir);
    ensure_out_dir(dir);
    save_arch(result.best, dir / "best.arch");

    std::ofstream history(dir / "history.jsonl");
    for (const IterationRecord& rec : result.history.records) {
        Json line;
        line["iteration"] = rec.iteration;
        line["best_fitness"] = rec.best_fitness;
        line["mean_fitness"] = rec.mean_fitness;
        line["best_digest"] = rec.best_digest;
        line["rejected_total"] = rec.rejected_total;
        history << line.dump() << "\n";
    }

    RunManifest manifest;
    manifest.command = "search";
    manifest.seed = cfg.seed;
    manifest.config = resolved;
    manifest.started_at = started;
    manifest.finished_at = timestamp_utc();
    manifest.write(dir / "manifest.json");

    std::printf("search finished: %lld iterations, best fitness %.6f\n",
                static_cast<long long>(cfg.iterations), result.best_fitness);
    std::printf("best architecture: %s\n", (dir / "best.arch").string().c_str());
    std::printf("history: %s\n", (dir / "history.jsonl").string().c_str());
    return 0;
}

// ---------------------------------------------------------------------------
// correlate
// ---------------------------------------------------------------------------

struct CorrelateOptions {
    std::string arch_path;
    int n = 10000;
    std::string weights = "A1";
    std::string scorer = "analytic";
    std::string shape = "64x64";
    double budget_multiplier = 10.0;
    std::int64_t flops_budget = 0;  // 0: budget_multiplier * seed flops
    int walk_length = 25;
    int shuffles = 1000;
    std::uint64_t seed = 0;
    int repeats = 8;
    int workers = 1;
    std::string out_dir;
};

int run_correlate(const CorrelateOptions& opt) {
    const std::string started = timestamp_utc();
    const Architecture seed_arch = load_and_validate(opt.arch_path);
    const FitnessWeights weights = FitnessWeights::parse(opt.weights);
    const Scorer scorer = parse_scorer(opt.scorer);

    McConfig mc;
    mc.shape = parse_shape(opt.shape);
    mc.repeats = opt.repeats;
    mc.workers = opt.workers;

    const std::int64_t budget =
        opt.flops_budget > 0
            ? opt.flops_budget
            : static_cast<std::int64_t>(opt.budget_multiplier *
                                        static_cast<double>(estimate_flops(seed_arch, mc.shape).total));

    const CorrelationDataset dataset =
        sample_dataset(seed_arch, opt.n, weights, scorer, budget, mc, opt.seed, opt.walk_length);
    const std::vector<CorrelationEntry> table = correlation_table(dataset, opt.shuffles, opt.seed);

    std::printf("dataset: %d rows, weights %s, scorer %s, budget %lld\n", opt.n,
                weights.label().c_str(), scorer_name(scorer).c_str(), static_cast<long long>(budget));
    std::printf("%-18s %10s %12s %6s\n", "parameter", "rho", "p-value", "sig");
    for (const CorrelationEntry& e : table) {
        std::printf("%-18s %10.4f %12.5f %6s\n", e.parameter.c_str(), e.rho, e.p_value, e.stars.c_str());
    }

    if (!opt.out_dir.empty()) {
        const fs::path dir(opt.out_dir);
        ensure_out_dir(dir);
        {
            std::ofstream csv(dir / "dataset.csv");
            write_dataset_csv(csv, dataset);
        }
        {
            std::ofstream csv(dir / "correlations.csv");
            csv << "parameter,rho,p_value,significance\n";
            for (const CorrelationEntry& e : table) {
                csv << e.parameter << ',' << e.rho << ',' << e.p_value << ',' << e.stars << '\n';
            }
        }
        RunManifest manifest;
        manifest.command = "correlate";
        manifest.seed = opt.seed;
        manifest.config = {{"arch", opt.arch_path},     {"n", opt.n},
                           {"weights", weights.label()}, {"scorer", scorer_name(scorer)},
                           {"shape", shape_string(mc.shape)}, {"flops_budget", budget},
                           {"walk_length", opt.walk_length}, {"shuffles", opt.shuffles},
                           {"repeats", opt.repeats},     {"workers", opt.workers}};
        manifest.started_at = started;
        manifest.finished_at = timestamp_utc();
        manifest.write(dir / "manifest.json");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// sweep
// ---------------------------------------------------------------------------

struct SweepOptions {
    std::string fixed_arch;
    std::string weights = "A1";
    std::string shape = "320x320";
    int shuffles = 1000;
    std::uint64_t seed = 0;
    int workers = 1;
    std::string out_dir;
};

int run_sweep(const SweepOptions& opt) {
    const std::string started = timestamp_utc();
    const Architecture fixed = load_and_validate(opt.fixed_arch);
    const FitnessWeights weights = FitnessWeights::parse(opt.weights);
    const InputShape shape = parse_shape(opt.shape);

    const std::vector<SweepPoint> points = bivariate_sweep(fixed, weights, shape, opt.workers);

    std::vector<double> d(points.size()), f(points.size()), e(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        d[i] = points[i].d_model;
        f[i] = points[i].dim_feedforward;
        e[i] = points[i].entropy;
    }
    const double rho_d = spearman(d, e);
    const double rho_f = spearman(f, e);
    const double p_d = spearman_permutation_pvalue(d, e, opt.shuffles, opt.seed);
    const double p_f = spearman_permutation_pvalue(f, e, opt.shuffles, opt.seed + 1);

    std::printf("sweep: %zu grid points (%zu x %zu), weights %s\n", points.size(),
                sweep_d_model_grid().size(), sweep_dim_feedforward_grid().size(),
                weights.label().c_str());
    std::printf("rho(d_model, entropy)      = %.4f%s\n", rho_d, significance_stars(p_d).c_str());
    std::printf("rho(d_feedforward, entropy) = %.4f%s\n", rho_f, significance_stars(p_f).c_str());

    if (!opt.out_dir.empty()) {
        const fs::path dir(opt.out_dir);
        ensure_out_dir(dir);
        {
            std::ofstream csv(dir / "sweep.csv");
            write_sweep_csv(csv, points);
        }
        RunManifest manifest;
        manifest.command = "sweep";
        manifest.seed = opt.seed;
        manifest.config = {{"fixed", opt.fixed_arch},
                           {"weights", weights.label()},
                           {"shape", shape_string(shape)},
                           {"shuffles", opt.shuffles},
                           {"workers", opt.workers}};
        manifest.started_at = started;
        manifest.finished_at = timestamp_utc();
        manifest.write(dir / "manifest.json");
    }
    return 0;
}

// ---------------------------------------------------------------------------
// uniformize
// ---------------------------------------------------------------------------

struct UniformizeOptions {
    std::string arch_path;
    std::string out_dir;
};

int run_uniformize(const UniformizeOptions& opt) {
    const std::string started = timestamp_utc();
    const Architecture arch = load_and_validate(opt.arch_path);
    const UniformConvNet uniform = uniformize(arch);
    const double source_entropy = conv_entropy(arch);
    const double uniform_entropy = uniform_net_log_variance(uniform);

    std::printf("architecture: %s\n", arch.name.c_str());
    std::printf("conv layers L = %d\n", uniform.layers);
    std::printf("avg channels (geometric) = %.6f\n", uniform.channels);
    std::printf("avg kernel (geometric)   = %.6f\n", uniform.kernel);
    std::printf("conv entropy: source %.9f, uniform %.9f\n", source_entropy, uniform_entropy);

    if (!opt.out_dir.empty()) {
        const fs::path dir(opt.out_dir);
        ensure_out_dir(dir);
        Json doc;
        doc["source"] = arch.name;
        doc["layers"] = uniform.layers;
        doc["channels"] = uniform.channels;
        doc["kernel"] = uniform.kernel;
        doc["source_conv_entropy"] = source_entropy;
        doc["uniform_conv_entropy"] = uniform_entropy;
        std::ofstream out(dir / "uniform.json");
        out << doc.dump(2) << "\n";

        RunManifest manifest;
        manifest.command = "uniformize";
        manifest.seed = 0;
        manifest.config = {{"arch", opt.arch_path}};
        manifest.started_at = started;
        manifest.finished_at = timestamp_utc();
        manifest.write(dir / "manifest.json");
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"maximum-entropy scoring and search for CNN-Transformer backbones"};
    app.require_subcommand(1);

    ScoreOptions score_opt;
    CLI::App* score = app.add_subcommand("score", "score an architecture file");
    score->add_option("arch", score_opt.arch_path, "architecture file (.arch)")->required();
    score->add_option("--scorer", score_opt.scorer, "analytic|mc (default mc)");
    score->add_option("--weights", score_opt.weights, "A1|A2|a1,a2,a3,a4,a5,a6");
    score->add_option("--shape", score_opt.shape, "input HxW (default 320x320)");
    score->add_option("--repeats", score_opt.repeats, "monte-carlo repeats (default 8)");
    score->add_option("--seed", score_opt.seed, "rng seed");
    score->add_option("--workers", score_opt.workers, "parallel workers");
    score->add_option("--out", score_opt.out_dir, "output directory for score.json + manifest");

    SearchOverrides search_opt;
    CLI::App* search = app.add_subcommand("search", "evolutionary search from a config file");
    search->add_option("config", search_opt.config_path, "search config (.json)")->required();
    long long it_override = -1;
    int pop_override = -1, rep_override = -1, workers_override = -1;
    std::int64_t budget_override = -1;
    std::uint64_t seed_override = 0;
    bool seed_set = false;
    std::string scorer_override, weights_override, shape_override;
    search->add_option("--iterations", it_override, "override iteration count");
    search->add_option("--population", pop_override, "override population size");
    search->add_option("--flops-budget", budget_override, "override FLOPs budget");
    search->add_option("--seed", seed_override, "override seed")->each([&](const std::string&) { seed_set = true; });
    search->add_option("--scorer", scorer_override, "override scorer");
    search->add_option("--weights", weights_override, "override weights");
    search->add_option("--shape", shape_override, "override input shape");
    search->add_option("--repeats", rep_override, "override mc repeats");
    search->add_option("--workers", workers_override, "override workers");
    search->add_option("--out", search_opt.out_dir, "output directory (default search_out)");

    CorrelateOptions corr_opt;
    CLI::App* correlate = app.add_subcommand("correlate", "sample a dataset and rank-correlate parameters");
    correlate->add_option("--arch", corr_opt.arch_path, "seed architecture file")->required();
    correlate->add_option("--n", corr_opt.n, "dataset rows (default 10000)");
    correlate->add_option("--weights", corr_opt.weights, "A1|A2|six numbers");
    correlate->add_option("--scorer", corr_opt.scorer, "analytic|mc (default analytic)");
    correlate->add_option("--shape", corr_opt.shape, "input HxW (default 64x64)");
    correlate->add_option("--flops-budget", corr_opt.flops_budget, "absolute FLOPs budget");
    correlate->add_option("--budget-multiplier", corr_opt.budget_multiplier,
                          "budget = multiplier * seed FLOPs (default 10)");
    correlate->add_option("--walk-length", corr_opt.walk_length, "steps before a walk restarts");
    correlate->add_option("--shuffles", corr_opt.shuffles, "permutation-test shuffles (default 1000)");
    correlate->add_option("--seed", corr_opt.seed, "rng seed");
    correlate->add_option("--repeats", corr_opt.repeats, "mc repeats when scorer=mc");
    correlate->add_option("--workers", corr_opt.workers, "parallel workers");
    correlate->add_option("--out", corr_opt.out_dir, "output directory for CSVs + manifest");

    SweepOptions sweep_opt;
    CLI::App* sweep = app.add_subcommand("sweep", "fixed-CNN bivariate transformer sweep");
    sweep->add_option("--fixed", sweep_opt.fixed_arch, "architecture whose CNN stages stay fixed")->required();
    sweep->add_option("--weights", sweep_opt.weights, "A1|A2|six numbers");
    sweep->add_option("--shape", sweep_opt.shape, "input HxW (default 320x320)");
    sweep->add_option("--shuffles", sweep_opt.shuffles, "permutation-test shuffles");
    sweep->add_option("--seed", sweep_opt.seed, "rng seed for the permutation test");
    sweep->add_option("--workers", sweep_opt.workers, "parallel workers");
    sweep->add_option("--out", sweep_opt.out_dir, "output directory for sweep.csv + manifest");

    UniformizeOptions uni_opt;
    CLI::App* uniformize_cmd = app.add_subcommand("uniformize", "entropy-preserving uniform summary");
    uniformize_cmd->add_option("arch", uni_opt.arch_path, "architecture file")->required();
    uniformize_cmd->add_option("--out", uni_opt.out_dir, "output directory for uniform.json + manifest");

    try {
        app.parse(argc, argv);
        if (*score) return run_score(score_opt);
        if (*search) {
            if (it_override >= 0) search_opt.iterations = it_override;
            if (pop_override > 0) search_opt.population = pop_override;
            if (budget_override > 0) search_opt.flops_budget = budget_override;
            if (seed_set) search_opt.seed = seed_override;
            if (!scorer_override.empty()) search_opt.scorer = scorer_override;
            if (!weights_override.empty()) search_opt.weights = weights_override;
            if (!shape_override.empty()) search_opt.shape = shape_override;
            if (rep_override > 0) search_opt.repeats = rep_override;
            if (workers_override > 0) search_opt.workers = workers_override;
            return run_search(search_opt);
        }
        if (*correlate) return run_correlate(corr_opt);
        if (*sweep) return run_sweep(sweep_opt);
        if (*uniformize_cmd) return run_uniformize(uni_opt);
        return 2;
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    } catch (const ValidationError& e) {
        std::cerr << "validation error: " << e.what() << "\n";
        return 1;
    } catch (const ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const ScoringError& e) {
        std::cerr << "scoring error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
}
