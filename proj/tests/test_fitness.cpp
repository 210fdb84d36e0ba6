#include "doctest.h"

#include <cmath>

#include "menas/fitness.hpp"
#include "test_util.hpp"

using namespace menas;

namespace {

StageStatsArray stats_with_z(const std::array<double, 6>& z) {
    // C_in = 1 makes Z' equal the log variance directly.
    StageStatsArray stats{};
    for (int i = 0; i < kNumStages; ++i) stats[i] = {i + 1, z[i], 1};
    return stats;
}

}  // namespace

TEST_CASE("stage_score worked examples") {
    CHECK(stage_score({1, 0.0, 64}) == doctest::Approx(std::log(64.0)).epsilon(1e-12));
    CHECK(stage_score({1, 2.5, 1}) == 2.5);
    CHECK(stage_score({3, 13.733866569, 128}) == doctest::Approx(18.585896833).epsilon(1e-9));
}

TEST_CASE("fitness applies the 1/6-weighted combination verbatim") {
    const StageStatsArray ones = stats_with_z({1, 1, 1, 1, 1, 1});
    CHECK(fitness(ones, FitnessWeights::a1()).value == doctest::Approx(4.0 / 3.0).epsilon(1e-12));
    CHECK(fitness(ones, FitnessWeights::a2()).value == doctest::Approx(11.0 / 6.0).epsilon(1e-12));

    FitnessWeights only_c6;
    only_c6.a = {0, 0, 0, 0, 0, 6};
    CHECK(fitness(stats_with_z({5, 4, 3, 2, 1, 2}), only_c6).value == doctest::Approx(2.0).epsilon(1e-12));
}

TEST_CASE("fitness is linear in the stage scores") {
    Rng rng(31);
    for (int trial = 0; trial < 50; ++trial) {
        std::array<double, 6> z1{}, z2{}, mix{};
        const double alpha = rng.uniform() * 4 - 2;
        const double beta = rng.uniform() * 4 - 2;
        for (int i = 0; i < kNumStages; ++i) {
            z1[i] = rng.uniform() * 10 - 5;
            z2[i] = rng.uniform() * 10 - 5;
            mix[i] = alpha * z1[i] + beta * z2[i];
        }
        const FitnessWeights w = rng.uniform_int(2) == 0 ? FitnessWeights::a1() : FitnessWeights::a2();
        const double lhs = fitness(stats_with_z(mix), w).value;
        const double rhs = alpha * fitness(stats_with_z(z1), w).value +
                           beta * fitness(stats_with_z(z2), w).value;
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-10));
    }
}

TEST_CASE("zero-weight stages never affect the value") {
    const StageStatsArray base = stats_with_z({1, 2, 3, 4, 5, 6});
    StageStatsArray perturbed = base;
    perturbed[0].log_effective_variance = 1e9;
    perturbed[1].log_effective_variance = -1e9;
    CHECK(fitness(base, FitnessWeights::a1()).value == fitness(perturbed, FitnessWeights::a1()).value);
    CHECK(fitness(base, FitnessWeights::a2()).value == fitness(perturbed, FitnessWeights::a2()).value);
}

TEST_CASE("a constant shift moves every fitness by the same amount") {
    Rng rng(32);
    const double shift = 3.25;
    for (int trial = 0; trial < 20; ++trial) {
        std::array<double, 6> z{}, shifted{};
        for (int i = 0; i < kNumStages; ++i) {
            z[i] = rng.uniform() * 10;
            shifted[i] = z[i] + shift;
        }
        const FitnessWeights w = FitnessWeights::a1();
        double weight_sum = 0.0;
        for (double a : w.a) weight_sum += a;
        const double expected = fitness(stats_with_z(z), w).value + shift * weight_sum / 6.0;
        CHECK(fitness(stats_with_z(shifted), w).value == doctest::Approx(expected).epsilon(1e-10));
    }
}

TEST_CASE("weight parsing accepts presets and six numbers") {
    CHECK(FitnessWeights::parse("A1") == FitnessWeights::a1());
    CHECK(FitnessWeights::parse("a2") == FitnessWeights::a2());
    const FitnessWeights custom = FitnessWeights::parse("0,0,1,1,2,4");
    CHECK(custom == FitnessWeights::a1());
    CHECK(custom.label() == "A1");
    CHECK_THROWS_AS(FitnessWeights::parse("1,2,3"), ConfigError);
    CHECK_THROWS_AS(FitnessWeights::parse("0,0,0,0,0,0"), ConfigError);
    CHECK_THROWS_AS(FitnessWeights::parse("a,b,c,d,e,f"), ConfigError);
}

TEST_CASE("failed candidates rank below every finite score") {
    CHECK(failed_fitness() < -1e300);
    CHECK(std::isinf(failed_fitness()));
}

TEST_CASE("both scorer paths produce finite fitness on the A1 fixture") {
    const Architecture a1 = test::load_fixture("a1.arch");
    McConfig cfg;
    cfg.shape = {64, 64, 3};
    cfg.repeats = 1;
    const auto analytic = score_architecture(a1, Scorer::analytic, FitnessWeights::a1(), cfg);
    REQUIRE(analytic.has_value());
    CHECK(analytic->value > 0.0);
    const auto mc = score_architecture(a1, Scorer::monte_carlo, FitnessWeights::a1(), cfg);
    REQUIRE(mc.has_value());
    CHECK(std::isfinite(mc->value));
}

TEST_CASE("scorer names parse both spellings") {
    CHECK(parse_scorer("analytic") == Scorer::analytic);
    CHECK(parse_scorer("mc") == Scorer::monte_carlo);
    CHECK(parse_scorer("monte-carlo") == Scorer::monte_carlo);
    CHECK_THROWS_AS(parse_scorer("magic"), ConfigError);
}
