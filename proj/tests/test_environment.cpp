#include <gtest/gtest.h>

#include <sstream>

#include "test_util.hpp"

using namespace trussrl;

namespace {

// 4x6 grid with the support bottom-left; a loaded target on the bottom row, a reach-only one top-right.
Scenario small() {
    Scenario s;
    s.height = 4;
    s.width = 6;
    s.support = {3, 0};
    s.targets = {{{3, 3}, 100.0}, {{0, 5}, 0.0}};
    s.inventory = {12, 4};
    s.validate();
    return s;
}

template <class F>
void expect_category(ErrorCategory c, F&& f) {
    try {
        f();
        FAIL() << "expected " << category_name(c);
    } catch (const Error& e) {
        EXPECT_EQ(e.category(), c) << e.what();
    }
}

}  // namespace

TEST(FeasibleActions, InitialMaskOffersOnlySupportNeighbours) {
    const Scenario s = small();
    const ActionCodec codec(s);
    const auto idx = mask_indices(feasible_actions(initial_state(s), s));
    // Neighbours (2,0) and (3,1), each with both frame types; no terminate.
    std::vector<int> expected;
    for (int code : {2, 3})
        for (Cell c : {Cell{2, 0}, Cell{3, 1}}) expected.push_back(codec.encode(Action::place(code, c)));
    std::sort(expected.begin(), expected.end());
    EXPECT_EQ(idx, expected);
}

TEST(FeasibleActions, ExhaustedTypeAndMarkersAreMasked) {
    const Scenario s = small();
    GridState g = initial_state(s);
    g.design[s.flat({3, 1})] = 2;
    g.design[s.flat({3, 2})] = 2;
    g.remaining = {10, 0};
    const ActionCodec codec(s);
    const auto mask = feasible_actions(g, s);
    for (int i : mask_indices(mask)) {
        if (i == 0) continue;
        const Action a = codec.decode(i);
        EXPECT_EQ(a.frame_code, 2);
        EXPECT_FALSE(s.is_target(a.cell));
    }
    EXPECT_FALSE(mask[codec.encode(Action::place(2, {3, 3}))]);
    EXPECT_TRUE(mask[codec.encode(Action::place(2, {2, 2}))]);
    EXPECT_FALSE(mask[0]);
}

TEST(FeasibleActions, SoundOnRandomEpisodes) {
    Rng rng(17);
    for (int trial = 0; trial < 300; ++trial) {
        const Scenario s = fixtures::random_scenario(rng);
        const ActionCodec codec(s);
        GridState g = initial_state(s);
        while (!g.done()) {
            const auto mask = feasible_actions(g, s);
            const auto idx = mask_indices(mask);
            ASSERT_FALSE(idx.empty());
            for (int i : idx) {
                if (i == 0) {
                    ASSERT_DOUBLE_EQ(connected_fraction(g, s), 1.0);
                    continue;
                }
                const Action a = codec.decode(i);
                ASSERT_EQ(g.at(s, a.cell), kEmpty);
                ASSERT_GT(g.remaining[s.ordinal_of(a.frame_code)], 0);
            }
            const auto out = step(g, codec.decode(idx[rng.index(idx.size())]), s);
            g = out.next_state;
            for (int r : g.remaining) ASSERT_GE(r, 0);
            ASSERT_LE(g.frames_used(), s.total_inventory());
        }
    }
}

TEST(Step, InterimRewardScalesWithConnectedFraction) {
    const Scenario s = small();
    GridState g = initial_state(s);
    g.design[s.flat({3, 1})] = 2;
    g.remaining = {11, 4};
    const auto out = step(g, Action::place(2, {3, 2}), s);
    EXPECT_DOUBLE_EQ(out.reward, 0.0025 * 0.5);
    EXPECT_FALSE(out.terminated);
    EXPECT_FALSE(out.truncated);
    EXPECT_EQ(out.next_state.remaining, (std::vector<int>{10, 4}));
    EXPECT_EQ(out.next_state.step_count, 1);

    const auto none = step(initial_state(s), Action::place(3, {2, 0}), s);
    EXPECT_DOUBLE_EQ(none.reward, 0.0);
}

TEST(Step, RunningOutOfStockTruncatesWithZeroReward) {
    Scenario s = small();
    s.inventory = {1, 0};
    const auto out = step(initial_state(s), Action::place(2, {3, 1}), s);
    EXPECT_TRUE(out.truncated);
    EXPECT_FALSE(out.terminated);
    EXPECT_DOUBLE_EQ(out.reward, 0.0);
    EXPECT_FALSE(any_feasible(feasible_actions(out.next_state, s)));
}

TEST(Step, InfeasibleActionIsAContractError) {
    const Scenario s = small();
    expect_category(ErrorCategory::contract, [&] { step(initial_state(s), Action::place(2, {0, 3}), s); });
    expect_category(ErrorCategory::contract, [&] { step(initial_state(s), Action::stop(), s); });
    GridState g = initial_state(s);
    g.terminated = true;
    expect_category(ErrorCategory::contract, [&] { step(g, Action::place(2, {3, 1}), s); });
}

TEST(Step, TerminationRunsTheAnalysis) {
    const Scenario s = small();
    GridState g = initial_state(s);
    for (Cell c : {Cell{3, 1}, Cell{3, 2}, Cell{2, 2}, Cell{1, 2}, Cell{0, 2}, Cell{0, 3}, Cell{0, 4}}) {
        g = step(g, Action::place(2, c), s).next_state;
    }
    const auto out = step(g, Action::stop(), s);
    ASSERT_TRUE(out.terminated);
    ASSERT_TRUE(out.evaluation);
    EXPECT_EQ(out.evaluation->frame_count, 7);
    EXPECT_DOUBLE_EQ(out.reward, out.evaluation->reward);
    EXPECT_DOUBLE_EQ(out.reward, terminal_reward(g, s));
    EXPECT_TRUE(out.next_state.done());
    EXPECT_FALSE(any_feasible(feasible_actions(out.next_state, s)));
}

TEST(Reward, Arithmetic) {
    DesignEvaluation ev;
    ev.target_count = 2;
    ev.frame_count = 10;
    ev.inventory_total = 30;
    ev.max_deflection = 0.01;
    ev.allowable_deflection = 8.0 / 120.0;
    EXPECT_NEAR(assemble_reward(ev), 2 - 1.0 / 3.0, 1e-12);

    ev.frame_count = 12;
    ev.max_deflection = 0.08;
    ev.failed_count = 3;
    EXPECT_NEAR(assemble_reward(ev), -2.4, 1e-12);

    ev.max_deflection = ev.allowable_deflection;  // equality counts as exceeding
    EXPECT_NEAR(assemble_reward(ev), -2.4, 1e-12);

    ev.frame_count = 45;
    ev.failed_count = 0;
    ev.max_deflection = 0;
    EXPECT_NEAR(assemble_reward(ev), 1.0, 1e-12);  // usage penalty capped at 1
}

TEST(Reward, AllowableDeflectionFromSpan) {
    Scenario s;
    s.height = 6;
    s.width = 14;
    s.support = {5, 3};
    s.targets = {{{2, 11}, 100.0}, {{2, 0}, 0.0}};
    s.inventory = {20, 10};
    s.validate();
    GridState g = initial_state(s);
    for (int j = 4; j <= 10; ++j) g.design[s.flat({5, j})] = 2;
    for (int i = 2; i <= 4; ++i) g.design[s.flat({i, 10})] = 2;
    for (int j = 0; j <= 2; ++j) g.design[s.flat({3, j})] = 2;
    g.design[s.flat({4, 2})] = 2;
    g.design[s.flat({5, 2})] = 2;
    g.remaining = {5, 10};
    const auto ev = evaluate_design(g, s);
    EXPECT_DOUBLE_EQ(ev.allowable_deflection, 8.0 / 120.0);
    EXPECT_LE(ev.reward, ev.target_count);
}

TEST(Reward, TerminalRewardNeedsConnectedTargets) {
    const Scenario s = small();
    expect_category(ErrorCategory::contract, [&] { terminal_reward(initial_state(s), s); });
}

TEST(Reward, BoundedAboveByTargetCount) {
    Rng rng(31);
    for (int trial = 0; trial < 100; ++trial) {
        const Scenario s = fixtures::random_scenario(rng);
        Rng play(trial);
        const GridState g = fixtures::random_rollout(s, play);
        if (connected_fraction(g, s) < 1.0) continue;
        const auto ev = evaluate_design(g, s);
        EXPECT_LE(ev.reward, static_cast<double>(s.targets.size()));
        EXPECT_GE(ev.reward, static_cast<double>(s.targets.size()) - 2 - ev.failed_count);
    }
}

TEST(Reset, DeterministicAndWithinBudget) {
    const Scenario s = small();
    for (int n_rand : {0, 1, 2, 5}) {
        Rng a(9), b(9);
        const GridState ga = reset(s, a, n_rand), gb = reset(s, b, n_rand);
        EXPECT_EQ(ga, gb);
        EXPECT_LE(ga.frames_used(), n_rand);
        EXPECT_EQ(ga.step_count, 0);
        EXPECT_EQ(a, b);
    }
    Rng r(1);
    EXPECT_EQ(reset(s, r, 0), initial_state(s));
}

TEST(EnvironmentWrapper, EpisodeAndTrace) {
    Environment env(small());
    Rng rng(5);
    EpisodeTrace trace;
    StateTensor obs = env.reset(rng, 0);
    while (!env.state().done()) {
        const auto idx = mask_indices(env.mask());
        const int a = idx.front() == 0 ? 0 : idx[rng.index(idx.size())];
        const auto out = env.step(a);
        trace.push_back({obs, a, out.reward});
        obs = env.observe();
    }
    std::ostringstream os;
    write_trace_jsonl(os, 3, trace);
    std::istringstream is(os.str());
    std::string line;
    std::size_t n = 0;
    while (std::getline(is, line)) {
        const auto j = nlohmann::json::parse(line);
        EXPECT_EQ(j["episode"], 3);
        EXPECT_EQ(j["step"], n);
        EXPECT_EQ(j["state"].size(), static_cast<std::size_t>(j["rows"].get<int>() * j["cols"].get<int>()));
        ++n;
    }
    EXPECT_EQ(n, trace.size());
}
