#pragma once

#include <array>
#include <optional>
#include <string>

#include "menas/entropy.hpp"

namespace menas {

/// Six-element weight vector of the multi-scale fitness. Presets A1 and A2
/// match the two search settings of the bundled fixtures.
struct FitnessWeights {
    std::array<double, kNumStages> a{};

    static FitnessWeights a1() { return {{0, 0, 1, 1, 2, 4}}; }
    static FitnessWeights a2() { return {{0, 0, 1, 1, 3, 6}}; }

    /// Accepts "A1", "A2" (case-insensitive) or six comma-separated numbers.
    static FitnessWeights parse(const std::string& text);

    /// Non-negative with at least one positive entry.
    bool valid() const;
    std::string label() const;

    bool operator==(const FitnessWeights&) const = default;
};

struct FitnessValue {
    double value = 0.0;
    std::array<double, kNumStages> per_stage_z{};
};

/// Z'(stage) = log(effective variance) + log(C_in).
double stage_score(const StageStats& stats);

/// Z(G) = (1/6) * sum_i a_i * Z'(C_i), the weights applied verbatim.
FitnessValue fitness(const StageStatsArray& stats, const FitnessWeights& weights);

/// Fitness assigned to candidates whose scoring degenerated; ranks below
/// every finite score.
double failed_fitness();

enum class Scorer { analytic, monte_carlo };

Scorer parse_scorer(const std::string& text);  // "analytic" | "mc" | "monte-carlo"
std::string scorer_name(Scorer s);

/// Scores an architecture with either path. Returns nullopt only for a
/// degenerate Monte-Carlo run; the analytic path always succeeds on valid
/// input. cfg.shape is used by both scorers.
std::optional<FitnessValue> score_architecture(const Architecture& arch, Scorer scorer,
                                               const FitnessWeights& weights, const McConfig& cfg);

}  // namespace menas
