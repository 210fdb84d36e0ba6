#include "doctest.h"

#include <cstdint>

#include "menas/arch.hpp"
#include "menas/evolution.hpp"
#include "test_util.hpp"

using namespace menas;

namespace {

// Frozen by tests/oracles/fixture_oracle.py (independent per-layer arithmetic).
constexpr std::int64_t kA1Total320 = 20638681600ll;
constexpr std::array<std::int64_t, 6> kA1PerStage320{
    137216000ll, 1932492800ll, 6130892800ll, 6409420800ll, 5517824000ll, 510835200ll};
constexpr std::int64_t kA2Total320 = 20433574400ll;
constexpr std::int64_t kA1Total64 = 824896000ll;

}  // namespace

TEST_CASE("fixtures validate cleanly") {
    const Architecture a1 = test::load_fixture("a1.arch");
    const Architecture a2 = test::load_fixture("a2.arch");
    CHECK(validate(a1).ok());
    CHECK(validate(a2).ok());
    CHECK(total_stride(a1) == 32);
}

TEST_CASE("validate reports a broken channel chain") {
    Architecture arch = test::load_fixture("a1.arch");
    arch.conv_stages[0].out_channels = 48;  // C2 still expects 32
    const ValidationReport report = validate(arch);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].stage_index == 2);
    CHECK(report.violations[0].field == "in");
}

TEST_CASE("validate rejects a kernel outside {3,5}") {
    Architecture arch = test::load_fixture("a1.arch");
    arch.conv_stages[2].kernel = 7;
    const ValidationReport report = validate(arch);
    REQUIRE(report.violations.size() == 1);
    CHECK(report.violations[0].stage_index == 3);
    CHECK(report.violations[0].field == "kernel");
}

TEST_CASE("validate flags non-multiples of 8 and bad layer counts") {
    Architecture arch = test::load_fixture("a1.arch");
    arch.conv_stages[1].bottleneck_width = 20;
    arch.transformer.layers = 0;
    const ValidationReport report = validate(arch);
    CHECK(report.violations.size() == 2);
}

TEST_CASE("conv_layer_flops worked examples") {
    CHECK(conv_layer_flops(3, 3, 32, 16, 16) == 442368);
    CHECK(conv_layer_flops(1, 1, 1, 1, 1) == 2);
}

TEST_CASE("fixture FLOPs match the per-layer oracle") {
    const Architecture a1 = test::load_fixture("a1.arch");
    const FlopsCount fc = estimate_flops(a1, {320, 320, 3});
    CHECK(fc.total == kA1Total320);
    for (int i = 0; i < kNumStages; ++i) CHECK(fc.per_stage[i] == kA1PerStage320[i]);

    std::int64_t sum = 0;
    for (std::int64_t v : fc.per_stage) sum += v;
    CHECK(sum == fc.total);

    CHECK(estimate_flops(a1, {64, 64, 3}).total == kA1Total64);
    const Architecture a2 = test::load_fixture("a2.arch");
    CHECK(estimate_flops(a2, {320, 320, 3}).total == kA2Total320);
}

TEST_CASE("estimate_flops rejects shapes not divisible by the total stride") {
    const Architecture a1 = test::load_fixture("a1.arch");
    CHECK_THROWS_AS(estimate_flops(a1, {100, 100, 3}), ConfigError);
    CHECK_THROWS_AS(estimate_flops(a1, {320, 300, 3}), ConfigError);
}

TEST_CASE("estimate_flops is strictly monotone in layers") {
    const Architecture a1 = test::load_fixture("a1.arch");
    const std::int64_t base = estimate_flops(a1, {320, 320, 3}).total;
    for (int i = 0; i < kNumConvStages; ++i) {
        Architecture more = a1;
        more.conv_stages[i].layers += 1;
        CHECK(estimate_flops(more, {320, 320, 3}).total > base);
    }
}

TEST_CASE("doubling the input side quadruples every conv stage count") {
    Rng rng(7);
    for (int trial = 0; trial < 20; ++trial) {
        const Architecture arch = test::random_arch(rng, test::kAnalyticScale);
        const FlopsCount small = estimate_flops(arch, {64, 64, 3});
        const FlopsCount big = estimate_flops(arch, {128, 128, 3});
        for (int i = 0; i < kNumConvStages; ++i) {
            CHECK(big.per_stage[i] == 4 * small.per_stage[i]);
        }
        CHECK(big.per_stage[5] >= 4 * small.per_stage[5]);  // token count quadruples
    }
}

TEST_CASE("per-layer expansion covers three convs per unit") {
    const Architecture a1 = test::load_fixture("a1.arch");
    int units = 0;
    for (const ConvStage& s : a1.conv_stages) units += s.layers;
    CHECK(conv_layer_expansion(a1).size() == static_cast<std::size_t>(3 * units));
}

TEST_CASE("serialization round-trips the fixtures") {
    const Architecture a1 = test::load_fixture("a1.arch");
    CHECK(from_json(to_json(a1)) == a1);

    const Architecture a2 = test::load_fixture("a2.arch");
    CHECK(a2.transformer.hidden_dim == 504);
    CHECK(a2.transformer.dim_feedforward == 1024);
    CHECK(a2.conv_stages[4].out_channels == 2000);
}

TEST_CASE("serialization round-trips randomly mutated architectures") {
    Architecture arch = test::load_fixture("a1.arch");
    Rng rng(11);
    for (int step = 0; step < 200; ++step) {
        mutate_arch(arch, rng);
        const Architecture back = from_json(to_json(arch));
        REQUIRE(back == arch);
    }
}

TEST_CASE("load errors carry the field path") {
    CHECK_THROWS_WITH_AS(from_json("{\"stages\": []}"),
                         doctest::Contains("expected 6 entries"), ArchParseError);

    // stage 6 missing entirely
    std::string five_stages = "{\"name\": \"x\", \"stages\": [";
    for (int i = 0; i < 5; ++i) {
        five_stages += "{\"type\": \"conv\", \"kernel\": 3, \"in\": 8, \"out\": 8, \"stride\": 1,"
                       " \"bottleneck\": 8, \"layers\": 1, \"has_pool\": false}";
        if (i < 4) five_stages += ", ";
    }
    five_stages += "]}";
    CHECK_THROWS_WITH_AS(from_json(five_stages), doctest::Contains("stage 6"), ArchParseError);

    CHECK_THROWS_WITH_AS(
        from_json("{\"stages\": [{\"type\": \"conv\", \"kernel\": \"three\"}, {}, {}, {}, {}, {}]}"),
        doctest::Contains("stages[0].kernel"), ArchParseError);
    CHECK_THROWS_AS(from_json("not json at all"), ArchParseError);
}

TEST_CASE("digest is stable and structure-sensitive") {
    const Architecture a1 = test::load_fixture("a1.arch");
    CHECK(digest(a1) == digest(a1));
    CHECK(digest(a1).size() == 16);
    Architecture other = a1;
    other.conv_stages[1].layers += 1;
    CHECK(digest(other) != digest(a1));
}
