#include "menas/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <ostream>

#include "menas/parallel.hpp"

namespace menas {

ArchSummary summarize_layers(std::span<const ConvLayerSpec> layers) {
    ArchSummary s;
    s.total_layers = static_cast<int>(layers.size());
    double log_c = 0.0;
    double log_k = 0.0;
    for (const ConvLayerSpec& layer : layers) {
        log_c += std::log(static_cast<double>(layer.in_channels));
        log_k += std::log(static_cast<double>(layer.kernel));
    }
    const double n = static_cast<double>(layers.size());
    s.avg_channels = std::exp(log_c / n);
    s.avg_kernel = std::exp(log_k / n);
    return s;
}

ArchSummary summarize(const Architecture& arch) {
    ArchSummary s = summarize_layers(conv_layer_expansion(arch));
    s.hidden_dim = arch.transformer.hidden_dim;
    s.dim_feedforward = arch.transformer.dim_feedforward;
    return s;
}

UniformConvNet uniformize(const Architecture& arch) {
    const ArchSummary s = summarize(arch);
    return {s.total_layers, s.avg_channels, s.avg_kernel};
}

double uniform_net_log_variance(const UniformConvNet& net) {
    return net.layers * std::log(net.channels * net.kernel * net.kernel);
}

double conv_entropy(const Architecture& arch) {
    return conv_stack_log_variance(conv_layer_expansion(arch));
}

// ---------------------------------------------------------------------------
// Spearman
// ---------------------------------------------------------------------------

namespace {

std::vector<double> average_ranks(std::span<const double> values, bool& tied) {
    const std::size_t n = values.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    std::vector<double> ranks(n);
    std::size_t i = 0;
    while (i < n) {
        std::size_t j = i;
        while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
        const double rank = 0.5 * static_cast<double>(i + j) + 1.0;  // 1-based average rank
        if (j > i) tied = true;
        for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
        i = j + 1;
    }
    return ranks;
}

double pearson(std::span<const double> x, std::span<const double> y) {
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        mx += x[i];
        my += y[i];
    }
    mx /= n;
    my /= n;
    double sxy = 0.0, sxx = 0.0, syy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = x[i] - mx;
        const double dy = y[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    return sxy / std::sqrt(sxx * syy);
}

bool constant(std::span<const double> v) {
    for (double x : v) {
        if (x != v.front()) return false;
    }
    return true;
}

}  // namespace

double spearman(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size()) throw ScoringError("spearman: length mismatch");
    if (x.size() < 2) throw ScoringError("spearman: need at least two observations");
    if (constant(x) || constant(y)) throw ScoringError("spearman: undefined correlation for a constant sequence");

    bool tied = false;
    const std::vector<double> rx = average_ranks(x, tied);
    const std::vector<double> ry = average_ranks(y, tied);
    if (tied) return pearson(rx, ry);

    const double n = static_cast<double>(x.size());
    double d2 = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = rx[i] - ry[i];
        d2 += d * d;
    }
    return 1.0 - 6.0 * d2 / (n * (n * n - 1.0));
}

double spearman_permutation_pvalue(std::span<const double> x, std::span<const double> y,
                                   int shuffles, std::uint64_t seed) {
    const double observed = std::abs(spearman(x, y));
    std::vector<double> permuted(y.begin(), y.end());
    Rng rng(derive_seed(seed, 0x7065726dull));
    int hits = 0;
    for (int s = 0; s < shuffles; ++s) {
        for (std::size_t i = permuted.size() - 1; i > 0; --i) {
            const std::size_t j = static_cast<std::size_t>(rng.uniform_int(static_cast<int>(i + 1)));
            std::swap(permuted[i], permuted[j]);
        }
        if (std::abs(spearman(x, permuted)) >= observed) ++hits;
    }
    return static_cast<double>(hits + 1) / static_cast<double>(shuffles + 1);
}

std::string significance_stars(double p_value) {
    if (p_value <= 0.01) return "***";
    if (p_value <= 0.05) return "**";
    if (p_value <= 0.10) return "*";
    return "";
}

// ---------------------------------------------------------------------------
// Dataset sampling
// ---------------------------------------------------------------------------

CorrelationDataset sample_dataset(const Architecture& seed_arch, int n, const FitnessWeights& weights,
                                  Scorer scorer, std::int64_t flops_budget, const McConfig& mc,
                                  std::uint64_t seed, int walk_length) {
    if (n < 1) throw ConfigError("sample_dataset: n must be >= 1");
    if (walk_length < 1) throw ConfigError("sample_dataset: walk_length must be >= 1");
    const ValidationReport report = validate(seed_arch);
    if (!report.ok()) throw ConfigError("sample_dataset: invalid seed architecture:\n" + report.to_string());
    if (estimate_flops(seed_arch, mc.shape).total > flops_budget) {
        throw ConfigError("sample_dataset: seed architecture exceeds the FLOPs budget");
    }

    CorrelationDataset dataset;
    dataset.weight_label = weights.label();
    dataset.rows.reserve(n);

    Rng rng(derive_seed(seed, 0x77616c6bull));
    Architecture current = seed_arch;
    for (int i = 0; i < n; ++i) {
        if (i % walk_length == 0) current = seed_arch;
        for (int attempt = 0; attempt < 8; ++attempt) {
            Architecture candidate = current;
            mutate_arch(candidate, rng);
            if (estimate_flops(candidate, mc.shape).total <= flops_budget) {
                current = std::move(candidate);
                break;
            }
        }
        McConfig row_mc = mc;
        row_mc.seed = derive_seed(seed, 0x726f77ull, static_cast<std::uint64_t>(i));
        const std::optional<FitnessValue> fv = score_architecture(current, scorer, weights, row_mc);
        dataset.rows.push_back({summarize(current), fv ? fv->value : failed_fitness()});
    }
    return dataset;
}

std::vector<CorrelationEntry> correlation_table(const CorrelationDataset& dataset, int shuffles,
                                                std::uint64_t seed) {
    const std::size_t n = dataset.rows.size();
    std::vector<double> score(n);
    for (std::size_t i = 0; i < n; ++i) score[i] = dataset.rows[i].score;

    const auto column = [&](auto getter) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = static_cast<double>(getter(dataset.rows[i].summary));
        return v;
    };

    std::vector<std::pair<std::string, std::vector<double>>> params;
    params.emplace_back("L", column([](const ArchSummary& s) { return s.total_layers; }));
    params.emplace_back("avg_channels", column([](const ArchSummary& s) { return s.avg_channels; }));
    params.emplace_back("avg_kernel", column([](const ArchSummary& s) { return s.avg_kernel; }));
    params.emplace_back("hidden_dim", column([](const ArchSummary& s) { return s.hidden_dim; }));
    params.emplace_back("dim_feedforward", column([](const ArchSummary& s) { return s.dim_feedforward; }));

    std::vector<CorrelationEntry> table;
    for (const auto& [name, values] : params) {
        CorrelationEntry entry;
        entry.parameter = name;
        entry.rho = spearman(values, score);
        entry.p_value = spearman_permutation_pvalue(values, score, shuffles, seed);
        entry.stars = significance_stars(entry.p_value);
        table.push_back(std::move(entry));
    }
    return table;
}

void write_dataset_csv(std::ostream& out, const CorrelationDataset& dataset) {
    out << "L,avg_channels,avg_kernel,hidden_dim,dim_feedforward,score\n";
    for (const DatasetRow& row : dataset.rows) {
        out << row.summary.total_layers << ',' << row.summary.avg_channels << ','
            << row.summary.avg_kernel << ',' << row.summary.hidden_dim << ','
            << row.summary.dim_feedforward << ',' << row.score << '\n';
    }
}

// ---------------------------------------------------------------------------
// Bivariate sweep
// ---------------------------------------------------------------------------

std::vector<int> sweep_d_model_grid() {
    std::vector<int> grid;
    for (int v = 256; v <= 512; v += 8) grid.push_back(v);
    return grid;
}

std::vector<int> sweep_dim_feedforward_grid() {
    std::vector<int> grid;
    for (int v = 512; v <= 2048; ++v) {
        if (v % 12 == 0) grid.push_back(v);
    }
    return grid;
}

std::vector<SweepPoint> bivariate_sweep(const Architecture& fixed_cnn, const FitnessWeights& weights,
                                        const InputShape& shape, int workers) {
    const ValidationReport report = validate(fixed_cnn);
    if (!report.ok()) throw ConfigError("bivariate_sweep: invalid architecture:\n" + report.to_string());

    const std::vector<int> models = sweep_d_model_grid();
    const std::vector<int> ffns = sweep_dim_feedforward_grid();
    std::vector<SweepPoint> points(models.size() * ffns.size());

    const StageStatsArray base = analytic_stage_stats(fixed_cnn, shape);
    const double c5_cum = base[kNumConvStages - 1].log_effective_variance;
    const int downsample = total_stride(fixed_cnn);
    const int tokens = (shape.height / downsample) * (shape.width / downsample);
    const int encoder_layers = fixed_cnn.transformer.layers;
    const double in_gain = std::log(static_cast<double>(fixed_cnn.transformer.in_channels));

    // The grid is honored verbatim, so dim_feedforward values that are not
    // multiples of 8 skip validation and go straight to the analytic scorer.
    parallel_for(static_cast<int>(points.size()), workers, [&](int idx) {
        const int mi = idx / static_cast<int>(ffns.size());
        const int fi = idx % static_cast<int>(ffns.size());
        StageStatsArray stats = base;
        stats[kNumStages - 1].log_effective_variance =
            c5_cum + in_gain + encoder_layers * transformer_layer_log_gain(models[mi], ffns[fi], tokens);
        points[idx] = {models[mi], ffns[fi], fitness(stats, weights).value};
    });
    return points;
}

void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points) {
    out << "d_model,d_feedforward,entropy\n";
    for (const SweepPoint& p : points) {
        out << p.d_model << ',' << p.dim_feedforward << ',' << p.entropy << '\n';
    }
}

}  // namespace menas
