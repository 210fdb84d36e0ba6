#include "menas/fitness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

namespace menas {

namespace {

std::string lower(std::string s) {
    std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
    return s;
}

}  // namespace

FitnessWeights FitnessWeights::parse(const std::string& text) {
    const std::string t = lower(text);
    if (t == "a1") return a1();
    if (t == "a2") return a2();
    FitnessWeights w;
    std::istringstream in(text);
    std::string item;
    int i = 0;
    while (std::getline(in, item, ',')) {
        if (i >= kNumStages) throw ConfigError("weights: expected six comma-separated values");
        try {
            w.a[i] = std::stod(item);
        } catch (const std::exception&) {
            throw ConfigError("weights: cannot parse \"" + item + "\" as a number");
        }
        ++i;
    }
    if (i != kNumStages) throw ConfigError("weights: expected six comma-separated values, got " + std::to_string(i));
    if (!w.valid()) throw ConfigError("weights: must be non-negative with at least one positive entry");
    return w;
}

bool FitnessWeights::valid() const {
    bool any_positive = false;
    for (double v : a) {
        if (v < 0.0 || !std::isfinite(v)) return false;
        if (v > 0.0) any_positive = true;
    }
    return any_positive;
}

std::string FitnessWeights::label() const {
    if (*this == a1()) return "A1";
    if (*this == a2()) return "A2";
    std::ostringstream os;
    for (int i = 0; i < kNumStages; ++i) os << (i ? "," : "") << a[i];
    return os.str();
}

double stage_score(const StageStats& stats) {
    return stats.log_effective_variance + std::log(static_cast<double>(stats.in_channels));
}

FitnessValue fitness(const StageStatsArray& stats, const FitnessWeights& weights) {
    FitnessValue out;
    double sum = 0.0;
    for (int i = 0; i < kNumStages; ++i) {
        out.per_stage_z[i] = stage_score(stats[i]);
        sum += weights.a[i] * out.per_stage_z[i];
    }
    out.value = sum / static_cast<double>(kNumStages);
    return out;
}

double failed_fitness() { return -std::numeric_limits<double>::infinity(); }

Scorer parse_scorer(const std::string& text) {
    const std::string t = lower(text);
    if (t == "analytic") return Scorer::analytic;
    if (t == "mc" || t == "monte-carlo" || t == "montecarlo") return Scorer::monte_carlo;
    throw ConfigError("scorer: expected \"analytic\" or \"mc\", got \"" + text + "\"");
}

std::string scorer_name(Scorer s) {
    return s == Scorer::analytic ? "analytic" : "monte-carlo";
}

std::optional<FitnessValue> score_architecture(const Architecture& arch, Scorer scorer,
                                               const FitnessWeights& weights, const McConfig& cfg) {
    if (scorer == Scorer::analytic) {
        return fitness(analytic_stage_stats(arch, cfg.shape), weights);
    }
    const std::optional<StageStatsArray> stats = mc_stage_stats(arch, cfg);
    if (!stats) return std::nullopt;
    return fitness(*stats, weights);
}

}  // namespace menas
