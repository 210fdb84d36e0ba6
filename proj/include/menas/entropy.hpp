#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "menas/arch.hpp"

namespace menas {

// ---------------------------------------------------------------------------
// Stage statistics
// ---------------------------------------------------------------------------

/// Per-stage differential-entropy proxy: the natural log of the effective
/// variance of a single output element at the end of the stage, plus the
/// stage's input channel count for the width term of the fitness score.
struct StageStats {
    int stage_index = 0;  // 1..6
    double log_effective_variance = 0.0;
    int in_channels = 0;

    bool operator==(const StageStats&) const = default;
};

using StageStatsArray = std::array<StageStats, kNumStages>;

/// Ordered log-variance records taken at each scale-normalization point.
/// The effective (unscaled-equivalent) log variance of any later observation
/// is the observed log variance plus the sum of all prior entries.
struct ScaleLedger {
    std::vector<double> entries;

    double sum() const {
        double s = 0.0;
        for (double e : entries) s += e;
        return s;
    }
};

struct McConfig {
    int repeats = 8;
    std::uint64_t seed = 0;
    InputShape shape{};
    int workers = 1;
};

// ---------------------------------------------------------------------------
// Analytic path (random-matrix variance recursion)
// ---------------------------------------------------------------------------

/// ln(c * k^2): log variance gain of one conv layer with c input channels and
/// kernel k under standard-Gaussian weights and input.
double conv_layer_log_gain(int in_channels, int kernel);

/// 2*ln(d_model) + ln(dim_feedforward) + ln(tokens): log variance gain of one
/// encoder layer, with the softmax replaced by its token-count upper bound.
double transformer_layer_log_gain(int d_model, int dim_feedforward, int tokens);

/// Cumulative log variance of a bare conv stack (sum of per-layer gains).
double conv_stack_log_variance(std::span<const ConvLayerSpec> layers);

/// Cumulative log effective variance at the end of each stage, assuming a
/// unit-variance Gaussian input. Conv stages sum the per-layer gains of the
/// bottleneck expansion; the transformer stage adds ln(C_in) for the
/// in-projection once, then the per-encoder-layer gain. The stage statistic
/// is taken at the encoder output, before the out-projection.
/// Throws ValidationError / ConfigError like estimate_flops.
StageStatsArray analytic_stage_stats(const Architecture& arch, const InputShape& shape);

// ---------------------------------------------------------------------------
// Scale normalization and reconstruction
// ---------------------------------------------------------------------------

/// Divides the values by their sample standard deviation in place and returns
/// ln of the pre-scaling sample variance. Returns nullopt (values untouched)
/// when the variance is zero or non-finite.
std::optional<double> scale_normalize(std::span<double> values);

/// final_log_variance plus the sum of all ledger entries: the log variance
/// the unscaled network would have produced.
double reconstruct_effective_log_variance(const ScaleLedger& ledger, double final_log_variance);

// ---------------------------------------------------------------------------
// Monte-Carlo path
// ---------------------------------------------------------------------------

/// Monte-Carlo stage statistics: per repeat, draws a fresh standard-Gaussian
/// input and fresh standard-Gaussian weights for every conv / linear map,
/// forward-propagates with scale normalization once per residual unit and
/// once per transformer sublayer, and reconstructs effective log variances
/// from the ledger. Per-stage results are averaged over repeats in the log
/// domain. Deterministic given (seed, arch, shape, repeats), independent of
/// worker count. Returns nullopt when any repeat hits a degenerate variance.
std::optional<StageStatsArray> mc_stage_stats(const Architecture& arch, const McConfig& cfg);

enum class ScalingMode { none, per_layer };

/// Monte-Carlo statistics for a bare conv stack (test and diagnostics
/// surface). per_layer_log_variance[i] is the mean effective log variance
/// after layer i; with ScalingMode::none those are raw log variances.
struct ConvStackMcResult {
    double mean_log_variance = 0.0;
    std::vector<double> per_layer_log_variance;
    bool all_finite = true;
};

ConvStackMcResult mc_conv_stack(std::span<const ConvLayerSpec> layers, int height, int width,
                                int repeats, std::uint64_t seed, ScalingMode mode,
                                int workers = 1);

}  // namespace menas
