#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "menas/evolution.hpp"

namespace menas {

// ---------------------------------------------------------------------------
// Geometric-mean architecture summaries
// ---------------------------------------------------------------------------

/// Summary parameters of the conv trunk plus the transformer widths.
/// avg_channels and avg_kernel are geometric means over the per-layer
/// expansion, so a uniform net built from them has the same total conv
/// log variance.
struct ArchSummary {
    int total_layers = 0;       // conv layers of the expansion
    double avg_channels = 0.0;  // geometric mean of per-layer input channels
    double avg_kernel = 0.0;    // geometric mean of per-layer kernels
    int hidden_dim = 0;
    int dim_feedforward = 0;
};

ArchSummary summarize_layers(std::span<const ConvLayerSpec> layers);
ArchSummary summarize(const Architecture& arch);

/// Uniform conv net with real-valued width and kernel: every layer carries
/// the geometric means, so total_layers * ln(channels * kernel^2) equals the
/// source's conv log variance exactly.
struct UniformConvNet {
    int layers = 0;
    double channels = 0.0;
    double kernel = 0.0;
};

UniformConvNet uniformize(const Architecture& arch);
double uniform_net_log_variance(const UniformConvNet& net);

/// Total conv-trunk log variance of an architecture (transformer excluded).
double conv_entropy(const Architecture& arch);

// ---------------------------------------------------------------------------
// Spearman rank correlation
// ---------------------------------------------------------------------------

/// Spearman's rho. Tie-free inputs use 1 - 6*sum(d^2)/(n(n^2-1)); tied inputs
/// fall back to Pearson on average ranks. Throws ScoringError for n < 2 or a
/// constant sequence (undefined correlation).
double spearman(std::span<const double> x, std::span<const double> y);

/// Two-sided permutation p-value for spearman(x, y) with the estimator
/// (hits + 1) / (shuffles + 1).
double spearman_permutation_pvalue(std::span<const double> x, std::span<const double> y,
                                   int shuffles, std::uint64_t seed);

/// Significance stars: *** at 1%, ** at 5%, * at 10%.
std::string significance_stars(double p_value);

// ---------------------------------------------------------------------------
// Correlation dataset (random-walk sampling)
// ---------------------------------------------------------------------------

struct DatasetRow {
    ArchSummary summary;
    double score = 0.0;
};

struct CorrelationDataset {
    std::vector<DatasetRow> rows;
    std::string weight_label;
};

/// n rows sampled from iterated mutation random walks started at seed_arch:
/// walks restart from the seed every walk_length accepted steps, so the rows
/// form an ensemble of short trajectories instead of one drifting path.
/// Proposals over the FLOPs budget are retried, and every recorded state is
/// scored with the multi-scale fitness. Deterministic per seed.
CorrelationDataset sample_dataset(const Architecture& seed_arch, int n, const FitnessWeights& weights,
                                  Scorer scorer, std::int64_t flops_budget, const McConfig& mc,
                                  std::uint64_t seed, int walk_length = 25);

struct CorrelationEntry {
    std::string parameter;
    double rho = 0.0;
    double p_value = 1.0;
    std::string stars;
};

/// rho and permutation p-value of each summary parameter against the score.
std::vector<CorrelationEntry> correlation_table(const CorrelationDataset& dataset, int shuffles,
                                                std::uint64_t seed);

/// Header: L,avg_channels,avg_kernel,hidden_dim,dim_feedforward,score
void write_dataset_csv(std::ostream& out, const CorrelationDataset& dataset);

// ---------------------------------------------------------------------------
// Fixed-CNN bivariate transformer sweep
// ---------------------------------------------------------------------------

struct SweepPoint {
    int d_model = 0;
    int dim_feedforward = 0;
    double entropy = 0.0;  // multi-scale fitness under the given weights
};

/// d_model grid: 256..512 step 8. dim_feedforward grid: multiples of 12 in
/// [512, 2048]. The feedforward grid intentionally bypasses the
/// multiple-of-8 search-space rule; this is sweep-only behavior.
std::vector<int> sweep_d_model_grid();
std::vector<int> sweep_dim_feedforward_grid();

/// Full Cartesian product, scored analytically with the CNN stages fixed and
/// the C6 hyperparameters overwritten per grid point.
std::vector<SweepPoint> bivariate_sweep(const Architecture& fixed_cnn, const FitnessWeights& weights,
                                        const InputShape& shape, int workers = 1);

/// Header: d_model,d_feedforward,entropy
void write_sweep_csv(std::ostream& out, std::span<const SweepPoint> points);

}  // namespace menas
