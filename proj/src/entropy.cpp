#include "menas/entropy.hpp"

#include <cmath>
#include <limits>

#include "menas/parallel.hpp"
#include "menas/rng.hpp"
#include "menas/tensor.hpp"

namespace menas {

namespace {

constexpr std::uint64_t kMcStreamTag = 0x6d63726570ull;  // repeat streams

int scoring_downsample(const Architecture& arch, const InputShape& shape) {
    const ValidationReport report = validate(arch);
    if (!report.ok()) {
        throw ValidationError("scoring an invalid architecture:\n" + report.to_string());
    }
    if (arch.conv_stages[0].in_channels != shape.channels) {
        throw ConfigError("input has " + std::to_string(shape.channels) + " channels but C1 expects " +
                          std::to_string(arch.conv_stages[0].in_channels));
    }
    const int downsample = total_stride(arch);
    if (shape.height % downsample != 0 || shape.width % downsample != 0) {
        throw ConfigError("input " + std::to_string(shape.height) + "x" + std::to_string(shape.width) +
                          " is not divisible by the total stride " + std::to_string(downsample));
    }
    return downsample;
}

}  // namespace

double conv_layer_log_gain(int in_channels, int kernel) {
    return std::log(static_cast<double>(in_channels) * kernel * kernel);
}

double transformer_layer_log_gain(int d_model, int dim_feedforward, int tokens) {
    return 2.0 * std::log(static_cast<double>(d_model)) +
           std::log(static_cast<double>(dim_feedforward)) + std::log(static_cast<double>(tokens));
}

double conv_stack_log_variance(std::span<const ConvLayerSpec> layers) {
    double sum = 0.0;
    for (const ConvLayerSpec& layer : layers) {
        sum += conv_layer_log_gain(layer.in_channels, layer.kernel);
    }
    return sum;
}

StageStatsArray analytic_stage_stats(const Architecture& arch, const InputShape& shape) {
    const int downsample = scoring_downsample(arch, shape);

    StageStatsArray stats{};
    double cum = 0.0;
    for (int i = 0; i < kNumConvStages; ++i) {
        const ConvStage& s = arch.conv_stages[i];
        for (int u = 0; u < s.layers; ++u) {
            const int c_in = (u == 0) ? s.in_channels : s.out_channels;
            cum += conv_layer_log_gain(c_in, 1);
            cum += conv_layer_log_gain(s.bottleneck_width, s.kernel);
            cum += conv_layer_log_gain(s.bottleneck_width, 1);
        }
        stats[i] = {i + 1, cum, s.in_channels};
    }

    const TransformerStage& t = arch.transformer;
    const int tokens = (shape.height / downsample) * (shape.width / downsample);
    cum += std::log(static_cast<double>(t.in_channels));
    for (int l = 0; l < t.layers; ++l) {
        cum += transformer_layer_log_gain(t.hidden_dim, t.dim_feedforward, tokens);
    }
    stats[kNumStages - 1] = {kNumStages, cum, t.in_channels};
    return stats;
}

std::optional<double> scale_normalize(std::span<double> values) {
    if (values.size() < 2) return std::nullopt;
    const double var = sample_variance(values);
    if (!(var > 0.0) || !std::isfinite(var)) return std::nullopt;
    const double inv = 1.0 / std::sqrt(var);
    for (double& v : values) v *= inv;
    return std::log(var);
}

double reconstruct_effective_log_variance(const ScaleLedger& ledger, double final_log_variance) {
    return final_log_variance + ledger.sum();
}

// ---------------------------------------------------------------------------
// Monte-Carlo forward pass
// ---------------------------------------------------------------------------

namespace {

struct ArchRepeatResult {
    std::array<double, kNumStages> stage_log_variance{};
    bool ok = false;
};

FeatureMap gaussian_map(Rng& rng, int channels, int height, int width) {
    FeatureMap m(channels, height, width);
    rng.fill_gaussian(m.data);
    return m;
}

FeatureMap random_conv(Rng& rng, const FeatureMap& x, int kernel, int out_channels, int stride) {
    std::vector<double> w(static_cast<std::size_t>(out_channels) * x.channels * kernel * kernel);
    rng.fill_gaussian(w);
    return conv2d_circular(x, w, kernel, out_channels, stride);
}

TokenMatrix random_linear(Rng& rng, const TokenMatrix& x, int out_cols) {
    std::vector<double> w(static_cast<std::size_t>(x.cols) * out_cols);
    rng.fill_gaussian(w);
    return matmul(x, w, out_cols);
}

bool record_and_normalize(std::span<double> values, ScaleLedger& ledger) {
    const std::optional<double> lv = scale_normalize(values);
    if (!lv) return false;
    ledger.entries.push_back(*lv);
    return true;
}

ArchRepeatResult run_arch_repeat(const Architecture& arch, const InputShape& shape, std::uint64_t seed) {
    Rng rng(seed);
    ArchRepeatResult res;
    FeatureMap x = gaussian_map(rng, shape.channels, shape.height, shape.width);
    ScaleLedger ledger;

    for (int i = 0; i < kNumConvStages; ++i) {
        const ConvStage& s = arch.conv_stages[i];
        int stage_stride = s.stride;
        if (s.has_pool) {
            x = max_pool_2x2(x);
            stage_stride /= 2;
        }
        for (int u = 0; u < s.layers; ++u) {
            const int unit_stride = (u == 0) ? stage_stride : 1;
            const int c_in = x.channels;
            FeatureMap y = random_conv(rng, x, 1, s.bottleneck_width, 1);
            y = random_conv(rng, y, s.kernel, s.bottleneck_width, unit_stride);
            y = random_conv(rng, y, 1, s.out_channels, 1);
            if (c_in == s.out_channels && unit_stride == 1) {
                add_inplace(y, x);
            } else {
                const FeatureMap shortcut = random_conv(rng, x, 1, s.out_channels, unit_stride);
                add_inplace(y, shortcut);
            }
            if (!record_and_normalize(y.data, ledger)) return res;
            x = std::move(y);
        }
        const double stat =
            reconstruct_effective_log_variance(ledger, std::log(sample_variance(x.data)));
        if (!std::isfinite(stat)) return res;
        res.stage_log_variance[i] = stat;
    }

    const TransformerStage& t = arch.transformer;
    TokenMatrix tok = flatten_tokens(x);
    tok = random_linear(rng, tok, t.hidden_dim);
    const double attn_scale = 1.0 / std::sqrt(static_cast<double>(t.hidden_dim));
    for (int l = 0; l < t.layers; ++l) {
        const TokenMatrix q = random_linear(rng, tok, t.hidden_dim);
        const TokenMatrix k = random_linear(rng, tok, t.hidden_dim);
        const TokenMatrix v = random_linear(rng, tok, t.hidden_dim);
        TokenMatrix attn = matmul_transposed(q, k, attn_scale);
        softmax_rows(attn);
        tok = matmul_mm(attn, v);
        if (!record_and_normalize(tok.data, ledger)) return res;
        tok = random_linear(rng, tok, t.dim_feedforward);
        tok = random_linear(rng, tok, t.hidden_dim);
        if (!record_and_normalize(tok.data, ledger)) return res;
    }
    const double stat =
        reconstruct_effective_log_variance(ledger, std::log(sample_variance(tok.data)));
    if (!std::isfinite(stat)) return res;
    res.stage_log_variance[kNumStages - 1] = stat;
    res.ok = true;
    return res;
}

}  // namespace

std::optional<StageStatsArray> mc_stage_stats(const Architecture& arch, const McConfig& cfg) {
    if (cfg.repeats < 1) throw ConfigError("mc repeats must be >= 1");
    scoring_downsample(arch, cfg.shape);

    std::vector<ArchRepeatResult> slots(cfg.repeats);
    parallel_for(cfg.repeats, cfg.workers, [&](int r) {
        slots[r] = run_arch_repeat(arch, cfg.shape, derive_seed(cfg.seed, kMcStreamTag, r));
    });

    for (const ArchRepeatResult& r : slots) {
        if (!r.ok) return std::nullopt;
    }

    StageStatsArray stats{};
    for (int i = 0; i < kNumStages; ++i) {
        double mean = 0.0;
        for (const ArchRepeatResult& r : slots) mean += r.stage_log_variance[i];
        mean /= static_cast<double>(cfg.repeats);
        const int in_channels =
            (i < kNumConvStages) ? arch.conv_stages[i].in_channels : arch.transformer.in_channels;
        stats[i] = {i + 1, mean, in_channels};
    }
    return stats;
}

namespace {

struct StackRepeatResult {
    std::vector<double> per_layer;
    bool finite = true;
};

StackRepeatResult run_stack_repeat(std::span<const ConvLayerSpec> layers, int height, int width,
                                   std::uint64_t seed, ScalingMode mode) {
    Rng rng(seed);
    StackRepeatResult res;
    res.per_layer.assign(layers.size(), std::numeric_limits<double>::infinity());
    FeatureMap x = gaussian_map(rng, layers[0].in_channels, height, width);
    ScaleLedger ledger;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        const ConvLayerSpec& spec = layers[l];
        x = random_conv(rng, x, spec.kernel, spec.out_channels, spec.stride);
        const double raw = sample_variance(x.data);
        const double effective = reconstruct_effective_log_variance(ledger, std::log(raw));
        res.per_layer[l] = effective;
        if (!std::isfinite(effective)) {
            res.finite = false;
            return res;
        }
        if (mode == ScalingMode::per_layer) {
            if (!record_and_normalize(x.data, ledger)) {
                res.finite = false;
                return res;
            }
        }
    }
    return res;
}

}  // namespace

ConvStackMcResult mc_conv_stack(std::span<const ConvLayerSpec> layers, int height, int width,
                                int repeats, std::uint64_t seed, ScalingMode mode, int workers) {
    if (layers.empty()) throw ConfigError("mc_conv_stack needs at least one layer");
    if (repeats < 1) throw ConfigError("mc repeats must be >= 1");

    std::vector<StackRepeatResult> slots(repeats);
    parallel_for(repeats, workers, [&](int r) {
        slots[r] = run_stack_repeat(layers, height, width, derive_seed(seed, kMcStreamTag, r), mode);
    });

    ConvStackMcResult out;
    out.per_layer_log_variance.assign(layers.size(), 0.0);
    for (const StackRepeatResult& r : slots) out.all_finite = out.all_finite && r.finite;
    for (std::size_t l = 0; l < layers.size(); ++l) {
        double mean = 0.0;
        for (const StackRepeatResult& r : slots) mean += r.per_layer[l];
        out.per_layer_log_variance[l] = mean / static_cast<double>(repeats);
    }
    out.mean_log_variance = out.per_layer_log_variance.back();
    return out;
}

}  // namespace menas
