#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>

#include "test_util.hpp"
#include "trussrl/scenario_io.hpp"

using namespace trussrl;

namespace {

Scenario grid_6x14() {
    Scenario s;
    s.height = 6;
    s.width = 14;
    s.support = {5, 6};
    s.targets = {{{2, 0}, 100.0}, {{2, 13}, 0.0}};
    s.inventory = {20, 10};
    s.validate();
    return s;
}

int count_value(const StateTensor& t, int rows, int v) {
    return static_cast<int>(std::count(t.data.begin(), t.data.begin() + rows * t.cols, v));
}

}  // namespace

TEST(EncodeState, FullStockFillsThreeRowsRowMajor) {
    const Scenario s = grid_6x14();
    const StateTensor t = encode_state(initial_state(s), s);
    ASSERT_EQ(t.rows, 9);
    ASSERT_EQ(t.cols, 14);
    for (int k = 0; k < 20; ++k) EXPECT_EQ(t.data[k], 4) << k;
    for (int k = 20; k < 30; ++k) EXPECT_EQ(t.data[k], 5) << k;
    for (int k = 30; k < 42; ++k) EXPECT_EQ(t.data[k], 0) << k;
    EXPECT_EQ(t(3 + 5, 6), kSupport);
    EXPECT_EQ(t(3 + 2, 0), kLoadMarker);
    EXPECT_EQ(t(3 + 2, 13), kLoadMarker);
}

TEST(EncodeState, PartiallyUsedStock) {
    const Scenario s = grid_6x14();
    GridState g = initial_state(s);
    g.design[s.flat({5, 5})] = 2;
    g.design[s.flat({5, 4})] = 2;
    g.design[s.flat({4, 4})] = 2;
    g.design[s.flat({5, 7})] = 3;
    g.remaining = {17, 9};
    const StateTensor t = encode_state(g, s);
    EXPECT_EQ(count_value(t, 3, 4), 17);
    EXPECT_EQ(count_value(t, 3, 5), 9);
    EXPECT_EQ(t(3 + 5, 7), 3);
}

TEST(EncodeState, EmptyStockGivesZeroRows) {
    const Scenario s = grid_6x14();
    GridState g = initial_state(s);
    g.remaining = {0, 0};
    const StateTensor t = encode_state(g, s);
    EXPECT_EQ(t.rows, 9);
    for (int k = 0; k < 42; ++k) EXPECT_EQ(t.data[k], 0);
}

TEST(EncodeState, WithoutInventoryRowsIsTheDesignGrid) {
    Scenario s = grid_6x14();
    s.include_inventory_rows = false;
    const GridState g = initial_state(s);
    const StateTensor t = encode_state(g, s);
    EXPECT_EQ(t.rows, 6);
    EXPECT_EQ(t.data, g.design);
}

TEST(EncodeState, OverCapacityIsAnEncodingError) {
    Scenario s = grid_6x14();
    s.inventory_rows = 3;
    GridState g = initial_state(s);
    g.remaining = {40, 10};
    try {
        encode_state(g, s);
        FAIL() << "expected an encoding error";
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::encoding);
    }
    s.inventory = {40, 10};
    EXPECT_THROW(s.validate(), Error);
}

TEST(EncodeState, StockCellsMatchRemainingInventoryProperty) {
    Rng rng(11);
    for (int trial = 0; trial < 200; ++trial) {
        const Scenario s = fixtures::random_scenario(rng);
        Rng play(trial);
        const GridState g = fixtures::random_rollout(s, play, static_cast<int>(rng.uniform_int(0, 12)));
        const StateTensor t = encode_state(g, s);
        const int inv_rows = s.inventory_row_count();
        EXPECT_EQ(count_value(t, inv_rows, 4), g.remaining[0]);
        EXPECT_EQ(count_value(t, inv_rows, 5), g.remaining[1]);
        EXPECT_EQ(encode_state(g, s), t);
    }
}

TEST(ActionCodec, SixByFourteenSizeAndFirstSlots) {
    const Scenario s = grid_6x14();
    const ActionCodec codec(s);
    EXPECT_EQ(codec.size(), 169);
    EXPECT_EQ(codec.encode(Action::stop()), 0);
    EXPECT_EQ(codec.encode(Action::place(2, {0, 0})), 1);
    const Action a = codec.decode(1);
    EXPECT_FALSE(a.terminate);
    EXPECT_EQ(a.frame_code, 2);
    EXPECT_EQ(a.cell, (Cell{0, 0}));
    EXPECT_EQ(codec.encode(Action::place(3, {5, 13})), 168);
    EXPECT_TRUE(codec.decode(0).terminate);
}

TEST(ActionCodec, RoundTripsEveryIndex) {
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        const Scenario s = fixtures::random_scenario(rng);
        const ActionCodec codec(s);
        for (int i = 0; i < codec.size(); ++i) ASSERT_EQ(codec.encode(codec.decode(i)), i);
    }
}

TEST(ActionCodec, OutOfRangeIndexIsADecodeError) {
    const ActionCodec codec(grid_6x14());
    for (int bad : {-1, 169, 10000}) {
        try {
            codec.decode(bad);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.category(), ErrorCategory::decode);
        }
    }
}

TEST(ConnectedFraction, Examples) {
    Scenario s;
    s.height = 4;
    s.width = 8;
    s.support = {3, 0};
    s.targets = {{{3, 5}, 100.0}, {{0, 0}, 0.0}};
    s.inventory = {20, 0};
    s.validate();

    GridState g = initial_state(s);
    EXPECT_DOUBLE_EQ(connected_fraction(g, s), 0.0);

    for (int j = 1; j <= 4; ++j) g.design[s.flat({3, j})] = 2;
    EXPECT_DOUBLE_EQ(connected_fraction(g, s), 0.5);

    g.design[s.flat({2, 0})] = 2;
    g.design[s.flat({1, 0})] = 2;
    EXPECT_DOUBLE_EQ(connected_fraction(g, s), 1.0);

    // A frame next to a target but not linked to the support does not count.
    Scenario lone = s;
    lone.targets = {{{0, 5}, 100.0}};
    GridState h = initial_state(lone);
    h.design[lone.flat({0, 4})] = 2;
    EXPECT_DOUBLE_EQ(connected_fraction(h, lone), 0.0);
}

TEST(ConnectedFraction, MonotoneUnderFrameAddition) {
    Rng rng(5);
    for (int trial = 0; trial < 100; ++trial) {
        const Scenario s = fixtures::random_scenario(rng);
        GridState g = initial_state(s);
        double prev = connected_fraction(g, s);
        for (int k = 0; k < 40; ++k) {
            const int idx = static_cast<int>(rng.index(static_cast<std::size_t>(s.cell_count())));
            if (g.design[idx] != kEmpty) continue;
            g.design[idx] = 2;
            const double now = connected_fraction(g, s);
            ASSERT_GE(now, prev);
            prev = now;
        }
    }
}

TEST(Scenario, RejectsInvalidDefinitions) {
    Scenario s = grid_6x14();
    auto expect_input_error = [](Scenario bad) {
        try {
            bad.validate();
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.category(), ErrorCategory::input);
        }
    };
    Scenario a = s;
    a.targets.push_back({s.support, 0});
    expect_input_error(a);
    Scenario b = s;
    b.targets[0].cell = {9, 0};
    expect_input_error(b);
    Scenario c = s;
    c.targets[0].load_kN = 0;
    expect_input_error(c);
    EXPECT_NO_THROW(c.validate(/*require_external_load=*/false));
    Scenario d = s;
    d.inventory = {-1, 3};
    expect_input_error(d);
    Scenario e = s;
    e.inventory = {0, 0};
    expect_input_error(e);
}

TEST(Scenario, SupportNeedsAFreeNeighbour) {
    Scenario s;
    s.height = 3;
    s.width = 3;
    s.support = {0, 0};
    s.targets = {{{0, 1}, 100.0}, {{1, 0}, 0.0}};
    s.inventory = {5, 0};
    EXPECT_THROW(s.validate(), Error);
    s.targets[1].cell = {2, 2};
    EXPECT_NO_THROW(s.validate());
    EXPECT_FALSE(mask_indices(feasible_actions(initial_state(s), s)).empty());
}

TEST(Scenario, CantileverLengthUsesFarthestLoadedTarget) {
    Scenario s = grid_6x14();
    s.support = {5, 3};
    s.targets = {{{2, 11}, 150.0}, {{1, 0}, 0.0}};
    EXPECT_DOUBLE_EQ(s.cantilever_length(), 8.0);
    s.module_size = 2.0;
    EXPECT_DOUBLE_EQ(s.cantilever_length(), 16.0);
}

TEST(ScenarioJson, ReadsDocumentedKeysAndRoundTrips) {
    const auto j = json::parse(R"({
        "name": "demo",
        "grid": {"height": 6, "width": 10},
        "support": [5, 4],
        "targets": [{"cell": [2, 0], "load_kN": 150}, {"cell": [3, 9], "load_kN": 0}],
        "inventory": {"light": 20, "medium": 10},
        "module_size_m": 1.5
    })");
    const Scenario s = scenario_from_json(j);
    EXPECT_EQ(s.height, 6);
    EXPECT_EQ(s.width, 10);
    EXPECT_EQ(s.support, (Cell{5, 4}));
    ASSERT_EQ(s.targets.size(), 2u);
    EXPECT_DOUBLE_EQ(s.targets[0].load_kN, 150.0);
    EXPECT_EQ(s.inventory, (std::vector<int>{20, 10}));
    EXPECT_DOUBLE_EQ(s.module_size, 1.5);

    const auto path = std::filesystem::temp_directory_path() / "trussrl_scenario_roundtrip.json";
    save_scenario(s, path.string());
    const Scenario back = load_scenario(path.string());
    EXPECT_EQ(scenario_to_json(back), scenario_to_json(s));
    std::filesystem::remove(path);
}

TEST(ScenarioJson, MalformedInputIsAnInputError) {
    try {
        scenario_from_json(json::parse(R"({"grid": {"height": 6}})"));
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), ErrorCategory::input);
    }
    EXPECT_THROW(scenario_from_json(json::parse(
                     R"({"grid":{"height":3,"width":3},"support":[0,0],"targets":[{"cell":[2,2],"load_kN":1}],"inventory":{"heavy":3}})")),
                 Error);
}
