#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "menas/analysis.hpp"
#include "test_util.hpp"

using namespace menas;

namespace {

// Explicit O(n^2) ranks plus the rank-difference formula, kept independent of
// the library implementation.
double spearman_bruteforce(const std::vector<double>& x, const std::vector<double>& y) {
    const std::size_t n = x.size();
    const auto rank_of = [n](const std::vector<double>& v, std::size_t i) {
        double r = 1.0;
        for (std::size_t j = 0; j < n; ++j) {
            if (v[j] < v[i]) r += 1.0;
        }
        return r;
    };
    double d2 = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
        const double d = rank_of(x, i) - rank_of(y, i);
        d2 += d * d;
    }
    const double nn = static_cast<double>(n);
    return 1.0 - 6.0 * d2 / (nn * (nn * nn - 1.0));
}

}  // namespace

TEST_CASE("summaries use geometric means over the layer expansion") {
    const std::vector<ConvLayerSpec> two{{3, 32, 128}, {5, 128, 64}};
    const ArchSummary s = summarize_layers(two);
    CHECK(s.total_layers == 2);
    CHECK(s.avg_kernel == doctest::Approx(std::sqrt(15.0)).epsilon(1e-12));
    CHECK(s.avg_channels == doctest::Approx(64.0).epsilon(1e-12));

    const std::vector<ConvLayerSpec> uniform{{3, 64, 64}, {3, 64, 64}, {3, 64, 64}};
    CHECK(summarize_layers(uniform).avg_channels == doctest::Approx(64.0).epsilon(1e-12));
    CHECK(summarize_layers(uniform).avg_kernel == doctest::Approx(3.0).epsilon(1e-12));

    const std::vector<ConvLayerSpec> single{{5, 48, 8}};
    const ArchSummary one = summarize_layers(single);
    CHECK(one.avg_channels == doctest::Approx(48.0).epsilon(1e-12));
    CHECK(one.avg_kernel == doctest::Approx(5.0).epsilon(1e-12));
}

TEST_CASE("the uniform net built from the means keeps the entropy") {
    const std::vector<ConvLayerSpec> two{{3, 32, 128}, {5, 128, 64}};
    const ArchSummary s = summarize_layers(two);
    const UniformConvNet uniform{2, s.avg_channels, s.avg_kernel};
    CHECK(uniform_net_log_variance(uniform) ==
          doctest::Approx(conv_stack_log_variance(two)).epsilon(1e-12));
    CHECK(uniform_net_log_variance(uniform) == doctest::Approx(13.733866569).epsilon(1e-9));
}

TEST_CASE("uniformize preserves the conv entropy of random architectures") {
    Rng rng(23);
    for (int trial = 0; trial < 300; ++trial) {
        const Architecture arch = test::random_arch(rng, test::kAnalyticScale);
        const UniformConvNet uniform = uniformize(arch);
        CHECK(std::abs(uniform_net_log_variance(uniform) - conv_entropy(arch)) < 1e-9);
    }
}

TEST_CASE("spearman worked examples") {
    const std::vector<double> x{1, 2, 3};
    CHECK(spearman(x, {std::vector<double>{1, 2, 3}}) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(spearman(x, {std::vector<double>{3, 2, 1}}) == doctest::Approx(-1.0).epsilon(1e-12));
    const std::vector<double> x5{1, 2, 3, 4, 5};
    const std::vector<double> y5{1, 3, 2, 5, 4};
    CHECK(spearman(x5, y5) == doctest::Approx(0.8).epsilon(1e-12));
}

TEST_CASE("spearman error cases") {
    CHECK_THROWS_AS(spearman(std::vector<double>{1.0}, std::vector<double>{2.0}), ScoringError);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 1, 1}, std::vector<double>{1, 2, 3}), ScoringError);
    CHECK_THROWS_AS(spearman(std::vector<double>{1, 2}, std::vector<double>{1, 2, 3}), ScoringError);
}

TEST_CASE("spearman handles ties with average ranks") {
    const std::vector<double> x{1, 1, 2};
    const std::vector<double> y{1, 2, 3};
    CHECK(spearman(x, y) == doctest::Approx(1.5 / std::sqrt(3.0)).epsilon(1e-12));
}

TEST_CASE("spearman agrees with the brute-force oracle on tie-free input") {
    Rng rng(77);
    for (int trial = 0; trial < 100; ++trial) {
        const int n = 2 + rng.uniform_int(60);
        std::vector<double> x(n), y(n);
        std::iota(x.begin(), x.end(), 0.0);
        std::iota(y.begin(), y.end(), 0.0);
        for (int i = n - 1; i > 0; --i) {
            std::swap(x[i], x[rng.uniform_int(i + 1)]);
            std::swap(y[i], y[rng.uniform_int(i + 1)]);
        }
        CHECK(spearman(x, y) == doctest::Approx(spearman_bruteforce(x, y)).epsilon(1e-12));
    }
}

TEST_CASE("spearman is invariant under strictly increasing transforms") {
    Rng rng(78);
    for (int trial = 0; trial < 50; ++trial) {
        const int n = 3 + rng.uniform_int(40);
        std::vector<double> x(n), y(n);
        for (int i = 0; i < n; ++i) {
            x[i] = rng.uniform() * 100;
            y[i] = rng.uniform() * 100;
        }
        std::vector<double> gy(n);
        for (int i = 0; i < n; ++i) gy[i] = std::exp(0.05 * y[i]) + 3.0;
        CHECK(spearman(x, gy) == doctest::Approx(spearman(x, y)).epsilon(1e-10));
        std::vector<double> neg(n);
        for (int i = 0; i < n; ++i) neg[i] = -y[i];
        CHECK(spearman(x, neg) == doctest::Approx(-spearman(x, y)).epsilon(1e-10));
    }
}

TEST_CASE("permutation p-value is small for a perfect correlation") {
    std::vector<double> x(30), y(30);
    std::iota(x.begin(), x.end(), 0.0);
    for (std::size_t i = 0; i < y.size(); ++i) y[i] = x[i] * x[i] + 1.0;
    const double p = spearman_permutation_pvalue(x, y, 199, 4);
    CHECK(p == doctest::Approx(1.0 / 200.0).epsilon(1e-12));
    CHECK(significance_stars(p) == "***");
    CHECK(significance_stars(0.04) == "**");
    CHECK(significance_stars(0.09) == "*");
    CHECK(significance_stars(0.5) == "");
}

TEST_CASE("sample_dataset is deterministic and budget-bounded") {
    const Architecture a1 = test::load_fixture("a1.arch");
    McConfig mc;
    mc.shape = {64, 64, 3};
    const std::int64_t budget = 2 * estimate_flops(a1, mc.shape).total;

    const CorrelationDataset d1 = sample_dataset(a1, 2, FitnessWeights::a1(), Scorer::analytic, budget, mc, 3);
    const CorrelationDataset d2 = sample_dataset(a1, 2, FitnessWeights::a1(), Scorer::analytic, budget, mc, 3);
    REQUIRE(d1.rows.size() == 2);
    for (std::size_t i = 0; i < d1.rows.size(); ++i) {
        CHECK(d1.rows[i].score == d2.rows[i].score);
        CHECK(d1.rows[i].summary.total_layers == d2.rows[i].summary.total_layers);
    }

    const CorrelationDataset big =
        sample_dataset(a1, 50, FitnessWeights::a2(), Scorer::analytic, budget, mc, 4);
    CHECK(big.weight_label == "A2");
    for (const DatasetRow& row : big.rows) CHECK(std::isfinite(row.score));
}

TEST_CASE("sweep grids match their set definitions") {
    const std::vector<int> models = sweep_d_model_grid();
    CHECK(models.size() == 33);
    CHECK(models.front() == 256);
    CHECK(models.back() == 512);
    for (int v : models) CHECK(v % 8 == 0);

    const std::vector<int> ffns = sweep_dim_feedforward_grid();
    CHECK(ffns.size() == 128);
    CHECK(ffns.front() == 516);
    CHECK(ffns.back() == 2040);
    for (int v : ffns) CHECK(v % 12 == 0);
}

TEST_CASE("the fixed-CNN sweep correlates both widths positively") {
    const Architecture a1 = test::load_fixture("a1.arch");
    const std::vector<SweepPoint> points = bivariate_sweep(a1, FitnessWeights::a1(), {320, 320, 3});
    REQUIRE(points.size() == 33u * 128u);

    std::vector<double> d(points.size()), f(points.size()), e(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        d[i] = points[i].d_model;
        f[i] = points[i].dim_feedforward;
        e[i] = points[i].entropy;
    }
    CHECK(spearman(d, e) > 0.5);
    CHECK(spearman(f, e) > 0.5);
}
