#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "menas/fitness.hpp"
#include "menas/rng.hpp"

namespace menas {

// ---------------------------------------------------------------------------
// Mutation scheme
// ---------------------------------------------------------------------------

enum class MutationKind {
    kernel,           // choose from {3, 5}                      (plain conv stages)
    layers,           // +/- {1, 2}, clamped to >= 1             (plain conv stages)
    channels,         // x {1.5, 1.25, 0.8, 0.6, 0.5}, rounded   (all conv stages)
    bottleneck_width, // x {1.5, 1.25, 0.8, 0.6, 0.5}, rounded   (all conv stages)
    hidden_dim,       // +/- {8, 16, 32, 64, 128}, floor 8       (transformer)
    dim_feedforward,  // +/- {8, 16, 32}, floor 8                (transformer)
};

inline constexpr std::array<int, 2> kKernelChoices{3, 5};
inline constexpr std::array<int, 2> kLayerDeltas{1, 2};  // sign drawn separately
inline constexpr std::array<double, 5> kChannelFactors{1.5, 1.25, 0.8, 0.6, 0.5};
inline constexpr std::array<int, 5> kHiddenDeltas{8, 16, 32, 64, 128};
inline constexpr std::array<int, 3> kFeedforwardDeltas{8, 16, 32};

const char* mutation_kind_name(MutationKind kind);

/// One drawn mutation: the target parameter kind plus its action value
/// (set choice, signed additive delta, or multiplicative factor).
struct MutationOp {
    MutationKind kind = MutationKind::kernel;
    int choice = 0;      // kernel
    int delta = 0;       // layers / hidden_dim / dim_feedforward (signed)
    double factor = 0.0; // channels / bottleneck_width
};

/// Nearest multiple of 8 with floor 8.
int round_to_multiple_of_8(double value);

/// Kinds applicable to a stage. Pooled conv stages mutate only channels and
/// bottleneck width; plain conv stages add kernel and layers; the transformer
/// stage mutates hidden_dim and dim_feedforward.
std::vector<MutationKind> applicable_kinds(const ConvStage& stage);
std::vector<MutationKind> applicable_kinds(const TransformerStage& stage);

MutationOp draw_mutation(std::span<const MutationKind> kinds, Rng& rng);

void apply_mutation(ConvStage& stage, const MutationOp& op);
void apply_mutation(TransformerStage& stage, const MutationOp& op);

/// Draws one applicable mutation and applies it. Clamping and rounding keep
/// every result inside the search space; a draw may be a no-op (e.g. the
/// kernel choice equals the current kernel).
MutationOp mutate_block(ConvStage& stage, Rng& rng);
MutationOp mutate_block(TransformerStage& stage, Rng& rng);

struct MutationRecord {
    int stage_index = 0;  // 1-based
    MutationOp op;
};

using StageMask = std::array<bool, kNumStages>;

inline constexpr StageMask kAllStages{true, true, true, true, true, true};

/// Selects min(4, #mutable) distinct stages uniformly and applies two
/// sequential mutations to each, then repairs the in/out channel chain.
/// `allowed` further restricts the mutation kinds (empty = all).
std::vector<MutationRecord> mutate_arch(Architecture& arch, Rng& rng,
                                        const StageMask& mutable_stages = kAllStages,
                                        std::span<const MutationKind> allowed = {});

/// Re-establishes stage_{i+1}.in_channels == stage_i.out_channels.
void repair_chaining(Architecture& arch);

// ---------------------------------------------------------------------------
// Evolutionary search
// ---------------------------------------------------------------------------

struct SearchConfig {
    int population = 64;
    long long iterations = 0;
    std::int64_t flops_budget = 0;
    FitnessWeights weights = FitnessWeights::a1();
    Scorer scorer = Scorer::monte_carlo;
    McConfig mc{};  // shape shared by both scorers; seed below overrides mc.seed
    std::uint64_t seed = 0;
    Architecture seed_arch;
    StageMask mutable_stages = kAllStages;
    std::vector<MutationKind> allowed_kinds;  // empty = all
    int workers = 1;
};

struct IterationRecord {
    long long iteration = 0;
    double best_fitness = 0.0;
    double mean_fitness = 0.0;
    std::string best_digest;
    long long rejected_total = 0;  // cumulative count of over-budget mutants
};

struct SearchHistory {
    std::vector<IterationRecord> records;
};

struct SearchResult {
    Architecture best;
    double best_fitness = 0.0;
    SearchHistory history;
    std::vector<Architecture> final_population;
};

/// Elitist (top-N) evolutionary search under the FLOPs budget: each iteration
/// mutates a uniformly chosen parent, discards the mutant if it exceeds the
/// budget, otherwise scores it and keeps the N fittest individuals (ties
/// broken by lower FLOPs, then insertion order). Deterministic given the
/// config. Throws ConfigError when the seed architecture misses the budget.
SearchResult evolve(const SearchConfig& cfg);

}  // namespace menas
