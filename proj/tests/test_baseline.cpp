#include <gtest/gtest.h>

#include <set>

#include "test_util.hpp"
#include "trussrl/baseline.hpp"

using namespace trussrl;

namespace {

Scenario two_targets() {
    Scenario s;
    s.height = 6;
    s.width = 14;
    s.support = {5, 6};
    s.targets = {{{2, 0}, 150.0}, {{2, 13}, 150.0}};
    s.inventory = {20, 10};
    s.validate();
    return s;
}

}  // namespace

TEST(ManhattanPath, MonotoneAndMinimal) {
    Rng rng(1);
    for (int trial = 0; trial < 200; ++trial) {
        const Cell a{static_cast<int>(rng.uniform_int(0, 9)), static_cast<int>(rng.uniform_int(0, 9))};
        const Cell b{static_cast<int>(rng.uniform_int(0, 9)), static_cast<int>(rng.uniform_int(0, 9))};
        const auto path = manhattan_path(a, b, rng);
        ASSERT_EQ(static_cast<int>(path.size()), manhattan(a, b) + 1);
        EXPECT_EQ(path.front(), a);
        EXPECT_EQ(path.back(), b);
        for (std::size_t k = 1; k < path.size(); ++k) {
            EXPECT_EQ(manhattan(path[k - 1], path[k]), 1);
            EXPECT_EQ(manhattan(path[k], b), manhattan(path[k - 1], b) - 1);
        }
    }
    const auto single = manhattan_path({2, 2}, {2, 2}, rng);
    EXPECT_EQ(single, (std::vector<Cell>{{2, 2}}));
}

TEST(ManhattanPath, SamplesEveryInterleaving) {
    Rng rng(4);
    std::set<std::vector<Cell>> seen;
    for (int k = 0; k < 500; ++k) seen.insert(manhattan_path({2, 0}, {0, 2}, rng));
    EXPECT_EQ(seen.size(), 6u);  // C(4, 2)
}

TEST(Baseline, WithoutExpansionIsTheUnionOfPaths) {
    const Scenario s = two_targets();
    BaselineConfig cfg;
    cfg.p_expand = 0.0;
    Rng rng(2);
    for (int k = 0; k < 50; ++k) {
        const GridState g = generate_baseline(s, rng, cfg);
        // Paths of 8 and 9 placements that can share at most their first 3 upward steps.
        EXPECT_LE(g.frames_used(), 17);
        EXPECT_GE(g.frames_used(), 14);
        EXPECT_DOUBLE_EQ(connected_fraction(g, s), 1.0);
    }
}

TEST(Baseline, LightOnlyInventoryUsesLightFrames) {
    Scenario s = two_targets();
    s.inventory = {40, 0};
    Rng rng(3);
    for (int k = 0; k < 30; ++k) {
        const GridState g = generate_baseline(s, rng);
        for (int v : g.design) EXPECT_NE(v, 3);
        EXPECT_EQ(g.remaining[1], 0);
        EXPECT_EQ(g.remaining[0], 40 - g.frames_used());
    }
}

TEST(Baseline, DesignsPassTheTerminateMask) {
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        Scenario s = fixtures::random_scenario(rng);
        s.inventory = {40, 20};
        GridState g;
        try {
            g = generate_baseline(s, rng);
        } catch (const Error& e) {
            EXPECT_EQ(e.category(), ErrorCategory::generation);
            continue;
        }
        EXPECT_TRUE(feasible_actions(g, s)[0]);
        EXPECT_FALSE(g.done());
        int placed = 0;
        for (std::size_t t = 0; t < g.remaining.size(); ++t) placed += s.inventory[t] - g.remaining[t];
        EXPECT_EQ(placed, g.frames_used());
        for (int r : g.remaining) EXPECT_GE(r, 0);
    }
}

TEST(Baseline, DeterministicForASeed) {
    const Scenario s = two_targets();
    Rng a(77), b(77);
    for (int k = 0; k < 20; ++k) EXPECT_EQ(generate_baseline(s, a), generate_baseline(s, b));
}

TEST(Baseline, ImpossibleInventoryIsAGenerationError) {
    Scenario s = two_targets();
    s.inventory = {3, 0};
    Rng rng(1);
    try {
        generate_baseline(s, rng);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::generation);
    }
}
