#include "menas/evolution.hpp"

#include <algorithm>
#include <cmath>

namespace menas {

namespace {

constexpr std::uint64_t kInitTag = 0x696e6974ull;
constexpr std::uint64_t kIterTag = 0x69746572ull;
constexpr std::uint64_t kScoreTag = 0x73636f72ull;

}  // namespace

const char* mutation_kind_name(MutationKind kind) {
    switch (kind) {
        case MutationKind::kernel: return "kernel";
        case MutationKind::layers: return "layers";
        case MutationKind::channels: return "channels";
        case MutationKind::bottleneck_width: return "bottleneck_width";
        case MutationKind::hidden_dim: return "hidden_dim";
        case MutationKind::dim_feedforward: return "dim_feedforward";
    }
    return "?";
}

int round_to_multiple_of_8(double value) {
    const long long rounded = std::llround(value / 8.0) * 8;
    return static_cast<int>(std::max(8ll, rounded));
}

std::vector<MutationKind> applicable_kinds(const ConvStage& stage) {
    if (stage.has_pool) {
        return {MutationKind::channels, MutationKind::bottleneck_width};
    }
    return {MutationKind::kernel, MutationKind::layers, MutationKind::channels,
            MutationKind::bottleneck_width};
}

std::vector<MutationKind> applicable_kinds(const TransformerStage&) {
    return {MutationKind::hidden_dim, MutationKind::dim_feedforward};
}

MutationOp draw_mutation(std::span<const MutationKind> kinds, Rng& rng) {
    MutationOp op;
    op.kind = kinds[rng.uniform_int(static_cast<int>(kinds.size()))];
    switch (op.kind) {
        case MutationKind::kernel:
            op.choice = kKernelChoices[rng.uniform_int(kKernelChoices.size())];
            break;
        case MutationKind::layers: {
            const int magnitude = kLayerDeltas[rng.uniform_int(kLayerDeltas.size())];
            op.delta = rng.uniform_int(2) == 0 ? magnitude : -magnitude;
            break;
        }
        case MutationKind::channels:
        case MutationKind::bottleneck_width:
            op.factor = kChannelFactors[rng.uniform_int(kChannelFactors.size())];
            break;
        case MutationKind::hidden_dim: {
            const int magnitude = kHiddenDeltas[rng.uniform_int(kHiddenDeltas.size())];
            op.delta = rng.uniform_int(2) == 0 ? magnitude : -magnitude;
            break;
        }
        case MutationKind::dim_feedforward: {
            const int magnitude = kFeedforwardDeltas[rng.uniform_int(kFeedforwardDeltas.size())];
            op.delta = rng.uniform_int(2) == 0 ? magnitude : -magnitude;
            break;
        }
    }
    return op;
}

void apply_mutation(ConvStage& stage, const MutationOp& op) {
    switch (op.kind) {
        case MutationKind::kernel:
            stage.kernel = op.choice;
            break;
        case MutationKind::layers:
            stage.layers = std::max(1, stage.layers + op.delta);
            break;
        case MutationKind::channels:
            stage.out_channels = round_to_multiple_of_8(stage.out_channels * op.factor);
            break;
        case MutationKind::bottleneck_width:
            stage.bottleneck_width = round_to_multiple_of_8(stage.bottleneck_width * op.factor);
            break;
        default:
            throw ConfigError(std::string("mutation kind ") + mutation_kind_name(op.kind) +
                              " does not apply to a conv stage");
    }
}

void apply_mutation(TransformerStage& stage, const MutationOp& op) {
    switch (op.kind) {
        case MutationKind::hidden_dim:
            stage.hidden_dim = std::max(8, stage.hidden_dim + op.delta);
            break;
        case MutationKind::dim_feedforward:
            stage.dim_feedforward = std::max(8, stage.dim_feedforward + op.delta);
            break;
        default:
            throw ConfigError(std::string("mutation kind ") + mutation_kind_name(op.kind) +
                              " does not apply to the transformer stage");
    }
}

MutationOp mutate_block(ConvStage& stage, Rng& rng) {
    const std::vector<MutationKind> kinds = applicable_kinds(stage);
    const MutationOp op = draw_mutation(kinds, rng);
    apply_mutation(stage, op);
    return op;
}

MutationOp mutate_block(TransformerStage& stage, Rng& rng) {
    const std::vector<MutationKind> kinds = applicable_kinds(stage);
    const MutationOp op = draw_mutation(kinds, rng);
    apply_mutation(stage, op);
    return op;
}

void repair_chaining(Architecture& arch) {
    for (int i = 1; i < kNumConvStages; ++i) {
        arch.conv_stages[i].in_channels = arch.conv_stages[i - 1].out_channels;
    }
    arch.transformer.in_channels = arch.conv_stages[kNumConvStages - 1].out_channels;
}

std::vector<MutationRecord> mutate_arch(Architecture& arch, Rng& rng,
                                        const StageMask& mutable_stages,
                                        std::span<const MutationKind> allowed) {
    std::vector<int> candidates;
    for (int i = 0; i < kNumStages; ++i) {
        if (mutable_stages[i]) candidates.push_back(i);
    }
    if (candidates.empty()) return {};

    // Four of the six blocks per round; fewer when the mutable set is smaller.
    const int picks = std::min<int>(4, static_cast<int>(candidates.size()));
    for (int i = 0; i < picks; ++i) {
        const int j = i + rng.uniform_int(static_cast<int>(candidates.size()) - i);
        std::swap(candidates[i], candidates[j]);
    }
    candidates.resize(picks);
    std::sort(candidates.begin(), candidates.end());

    const auto filter = [&](std::vector<MutationKind> kinds) {
        if (allowed.empty()) return kinds;
        std::vector<MutationKind> out;
        for (MutationKind k : kinds) {
            if (std::find(allowed.begin(), allowed.end(), k) != allowed.end()) out.push_back(k);
        }
        return out;
    };

    std::vector<MutationRecord> records;
    for (int index : candidates) {
        for (int rep = 0; rep < 2; ++rep) {
            if (index < kNumConvStages) {
                const std::vector<MutationKind> kinds = filter(applicable_kinds(arch.conv_stages[index]));
                if (kinds.empty()) continue;
                const MutationOp op = draw_mutation(kinds, rng);
                apply_mutation(arch.conv_stages[index], op);
                records.push_back({index + 1, op});
            } else {
                const std::vector<MutationKind> kinds = filter(applicable_kinds(arch.transformer));
                if (kinds.empty()) continue;
                const MutationOp op = draw_mutation(kinds, rng);
                apply_mutation(arch.transformer, op);
                records.push_back({index + 1, op});
            }
        }
    }
    repair_chaining(arch);
    return records;
}

// ---------------------------------------------------------------------------
// Evolutionary search
// ---------------------------------------------------------------------------

namespace {

struct Individual {
    Architecture arch;
    double fitness_value = 0.0;
    std::int64_t flops = 0;
    std::uint64_t sequence = 0;
};

bool better(const Individual& a, const Individual& b) {
    if (a.fitness_value != b.fitness_value) return a.fitness_value > b.fitness_value;
    if (a.flops != b.flops) return a.flops < b.flops;
    return a.sequence < b.sequence;
}

}  // namespace

SearchResult evolve(const SearchConfig& cfg) {
    if (cfg.population < 2) throw ConfigError("population must be >= 2");
    if (cfg.flops_budget <= 0) throw ConfigError("flops_budget must be positive");
    if (cfg.iterations < 0) throw ConfigError("iterations must be >= 0");
    const ValidationReport seed_report = validate(cfg.seed_arch);
    if (!seed_report.ok()) {
        throw ConfigError("seed architecture is invalid:\n" + seed_report.to_string());
    }
    const std::int64_t seed_flops = estimate_flops(cfg.seed_arch, cfg.mc.shape).total;
    if (seed_flops > cfg.flops_budget) {
        throw ConfigError("seed architecture FLOPs " + std::to_string(seed_flops) +
                          " exceed the budget " + std::to_string(cfg.flops_budget));
    }

    const auto score = [&](const Architecture& arch, std::uint64_t candidate_id) {
        McConfig mc = cfg.mc;
        mc.seed = derive_seed(cfg.seed, kScoreTag, candidate_id);
        mc.workers = cfg.workers;
        const std::optional<FitnessValue> fv = score_architecture(arch, cfg.scorer, cfg.weights, mc);
        return fv ? fv->value : failed_fitness();
    };

    std::uint64_t sequence = 0;
    std::vector<Individual> population;
    population.reserve(cfg.population + 1);

    const double seed_fitness = score(cfg.seed_arch, sequence);
    population.push_back({cfg.seed_arch, seed_fitness, seed_flops, sequence++});

    if (cfg.iterations == 0) {
        // No rounds: the sole initial individual fills the population untouched.
        while (static_cast<int>(population.size()) < cfg.population) {
            population.push_back({cfg.seed_arch, seed_fitness, seed_flops, sequence++});
        }
    } else {
        Rng init_rng(derive_seed(cfg.seed, kInitTag));
        while (static_cast<int>(population.size()) < cfg.population) {
            Architecture candidate = cfg.seed_arch;
            bool within_budget = false;
            for (int attempt = 0; attempt < 16 && !within_budget; ++attempt) {
                candidate = cfg.seed_arch;
                mutate_arch(candidate, init_rng, cfg.mutable_stages, cfg.allowed_kinds);
                within_budget = estimate_flops(candidate, cfg.mc.shape).total <= cfg.flops_budget;
            }
            if (!within_budget) candidate = cfg.seed_arch;
            const std::int64_t flops = estimate_flops(candidate, cfg.mc.shape).total;
            const double fitness_value = score(candidate, sequence);
            population.push_back({std::move(candidate), fitness_value, flops, sequence});
            ++sequence;
        }
    }

    std::sort(population.begin(), population.end(), better);

    Individual best = {cfg.seed_arch, seed_fitness, seed_flops, 0};
    if (better(population.front(), best)) best = population.front();
    SearchResult result;
    result.history.records.reserve(static_cast<std::size_t>(cfg.iterations) + 1);

    long long rejected_total = 0;
    const auto record = [&](long long iteration) {
        double mean = 0.0;
        for (const Individual& ind : population) mean += ind.fitness_value;
        mean /= static_cast<double>(population.size());
        result.history.records.push_back(
            {iteration, best.fitness_value, mean, digest(best.arch), rejected_total});
    };
    record(0);

    for (long long t = 1; t <= cfg.iterations; ++t) {
        Rng iter_rng(derive_seed(cfg.seed, kIterTag, static_cast<std::uint64_t>(t)));
        const int parent_index = iter_rng.uniform_int(static_cast<int>(population.size()));
        Architecture child = population[parent_index].arch;
        mutate_arch(child, iter_rng, cfg.mutable_stages, cfg.allowed_kinds);

        const std::int64_t child_flops = estimate_flops(child, cfg.mc.shape).total;
        if (child_flops > cfg.flops_budget) {
            ++rejected_total;
            record(t);
            continue;
        }

        const double child_fitness = score(child, sequence);
        Individual individual{std::move(child), child_fitness, child_flops, sequence++};
        if (better(individual, best)) best = individual;

        population.push_back(std::move(individual));
        std::sort(population.begin(), population.end(), better);
        population.resize(cfg.population);
        record(t);
    }

    result.best = best.arch;
    result.best_fitness = best.fitness_value;
    result.final_population.reserve(population.size());
    for (Individual& ind : population) result.final_population.push_back(std::move(ind.arch));
    return result;
}

}  // namespace menas
