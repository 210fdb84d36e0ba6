#include "doctest.h"

#include <cmath>
#include <vector>

#include "menas/entropy.hpp"
#include "menas/tensor.hpp"
#include "test_util.hpp"

using namespace menas;

namespace {

// Frozen by tests/oracles/fixture_oracle.py.
constexpr std::array<double, 6> kA1LogVar320{
    10.227308672, 55.187009302, 198.636024946, 398.361719918, 615.939442866, 647.084338938};

}  // namespace

TEST_CASE("per-layer log gains") {
    CHECK(conv_layer_log_gain(1, 1) == 0.0);
    CHECK(conv_layer_log_gain(16, 3) == doctest::Approx(std::log(144.0)).epsilon(1e-12));
    CHECK(transformer_layer_log_gain(1, 1, 1) == 0.0);
}

TEST_CASE("two-layer stack matches the worked value") {
    const std::vector<ConvLayerSpec> layers{{3, 32, 128}, {5, 128, 64}};
    CHECK(conv_stack_log_variance(layers) == doctest::Approx(13.733866569).epsilon(1e-9));
}

TEST_CASE("analytic stage stats of the A1 fixture") {
    const Architecture a1 = test::load_fixture("a1.arch");
    const StageStatsArray stats = analytic_stage_stats(a1, {320, 320, 3});
    for (int i = 0; i < kNumStages; ++i) {
        CHECK(stats[i].stage_index == i + 1);
        CHECK(stats[i].log_effective_variance == doctest::Approx(kA1LogVar320[i]).epsilon(1e-9));
    }
    CHECK(stats[0].in_channels == 3);
    CHECK(stats[5].in_channels == 2048);
}

TEST_CASE("analytic stats reject invalid input") {
    Architecture broken = test::load_fixture("a1.arch");
    broken.conv_stages[0].kernel = 7;
    CHECK_THROWS_AS(analytic_stage_stats(broken, {320, 320, 3}), ValidationError);
    const Architecture a1 = test::load_fixture("a1.arch");
    CHECK_THROWS_AS(analytic_stage_stats(a1, {100, 100, 3}), ConfigError);
    CHECK_THROWS_AS(analytic_stage_stats(a1, {320, 320, 1}), ConfigError);
}

TEST_CASE("appending a gainful layer strictly increases the analytic value") {
    Rng rng(3);
    std::vector<ConvLayerSpec> layers{{3, 8, 16}};
    double prev = conv_stack_log_variance(layers);
    for (int i = 0; i < 20; ++i) {
        const int in = layers.back().out_channels;
        layers.push_back({rng.uniform_int(2) == 0 ? 3 : 5, in, 8 * (1 + rng.uniform_int(8))});
        const double next = conv_stack_log_variance(layers);
        CHECK(next > prev);
        prev = next;
    }
}

TEST_CASE("scale_normalize records ln variance and rescales to unit variance") {
    std::vector<double> values{-2.0, 2.0};  // sample variance 4
    const auto recorded = scale_normalize(values);
    REQUIRE(recorded.has_value());
    CHECK(*recorded == doctest::Approx(std::log(4.0)).epsilon(1e-12));
    CHECK(sample_variance(values) == doctest::Approx(1.0).epsilon(1e-12));

    std::vector<double> unit{-1.0, 1.0};
    const auto zero = scale_normalize(unit);
    REQUIRE(zero.has_value());
    CHECK(*zero == doctest::Approx(0.0).epsilon(1e-6));
    CHECK(unit[0] == doctest::Approx(-1.0).epsilon(1e-6));
    CHECK(unit[1] == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("scale_normalize rejects degenerate tensors") {
    std::vector<double> zeros{0.0, 0.0, 0.0};
    CHECK(!scale_normalize(zeros).has_value());
    std::vector<double> single{1.0};
    CHECK(!scale_normalize(single).has_value());
    std::vector<double> bad{1.0, std::nan("")};
    CHECK(!scale_normalize(bad).has_value());
}

TEST_CASE("effective log variance reconstruction") {
    CHECK(reconstruct_effective_log_variance({}, 2.0) == 2.0);

    ScaleLedger ledger;
    ledger.entries = {std::log(4.0)};
    CHECK(reconstruct_effective_log_variance(ledger, std::log(9.0)) ==
          doctest::Approx(std::log(36.0)).epsilon(1e-12));

    const double a = 2.5, b = 0.75, c = 1.25;
    ledger.entries = {std::log(a), std::log(b)};
    CHECK(reconstruct_effective_log_variance(ledger, std::log(c)) ==
          doctest::Approx(std::log(a * b * c)).epsilon(1e-12));
}

TEST_CASE("monte-carlo conv variance law: k=3, C=16 gives ~144") {
    const std::vector<ConvLayerSpec> layer{{3, 16, 16}};
    const ConvStackMcResult res = mc_conv_stack(layer, 32, 32, 16, 42, ScalingMode::per_layer);
    REQUIRE(res.all_finite);
    const double variance = std::exp(res.mean_log_variance);
    CHECK(variance > 144.0 * 0.85);
    CHECK(variance < 144.0 * 1.15);
}

TEST_CASE("identity 1x1 conv preserves the sample variance exactly") {
    Rng rng(5);
    FeatureMap x(1, 8, 8);
    rng.fill_gaussian(x.data);
    const std::vector<double> w{1.0};
    const FeatureMap y = conv2d_circular(x, w, 1, 1, 1);
    CHECK(sample_variance(y.data) == doctest::Approx(sample_variance(x.data)).epsilon(1e-12));
}

TEST_CASE("mc_stage_stats is deterministic for a fixed seed") {
    const Architecture a1 = test::load_fixture("a1.arch");
    McConfig cfg;
    cfg.repeats = 1;
    cfg.seed = 0;
    cfg.shape = {64, 64, 3};
    const auto first = mc_stage_stats(a1, cfg);
    const auto second = mc_stage_stats(a1, cfg);
    REQUIRE(first.has_value());
    REQUIRE(second.has_value());
    for (int i = 0; i < kNumStages; ++i) {
        CHECK(first->at(i).log_effective_variance == second->at(i).log_effective_variance);
    }
}

TEST_CASE("mc_stage_stats is independent of the worker count") {
    Rng rng(17);
    const Architecture arch = test::random_arch(rng);
    McConfig cfg;
    cfg.repeats = 4;
    cfg.seed = 9;
    cfg.shape = {64, 64, 3};
    cfg.workers = 1;
    const auto serial = mc_stage_stats(arch, cfg);
    cfg.workers = 4;
    const auto parallel = mc_stage_stats(arch, cfg);
    REQUIRE(serial.has_value());
    REQUIRE(parallel.has_value());
    for (int i = 0; i < kNumStages; ++i) {
        CHECK(serial->at(i).log_effective_variance == parallel->at(i).log_effective_variance);
    }
}

TEST_CASE("scaled and unscaled conv stacks reconstruct the same log variance") {
    // Two layers sized so the raw run stays finite; agreement is statistical.
    const std::vector<ConvLayerSpec> layers{{3, 16, 24}, {5, 24, 16}};
    const ConvStackMcResult scaled = mc_conv_stack(layers, 32, 32, 64, 21, ScalingMode::per_layer);
    const ConvStackMcResult raw = mc_conv_stack(layers, 32, 32, 64, 22, ScalingMode::none);
    REQUIRE(scaled.all_finite);
    REQUIRE(raw.all_finite);
    CHECK(std::abs(scaled.mean_log_variance - raw.mean_log_variance) <
          0.10 * std::abs(raw.mean_log_variance));
}
