#pragma once

// The frame-placement MDP: action masking and transitions with their rewards.

#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include <json.hpp>

#include "trussrl/fea.hpp"
#include "trussrl/rng.hpp"

namespace trussrl {

struct RewardConfig {
    double interim_coefficient = 0.0025;
    double deflection_ratio = 1.0 / 120.0;
    double inventory_penalty_cap = 1.0;
};

/// Structural outcome of a finished design together with its terminal reward.
struct DesignEvaluation {
    double reward = 0;
    int target_count = 0;
    int frame_count = 0;
    int inventory_total = 0;
    int failed_count = 0;
    double max_deflection = 0;        // m
    double allowable_deflection = 0;  // m
    double utilization_p90 = 0;

    bool within_deflection() const { return max_deflection < allowable_deflection; }
};

using ActionMask = std::vector<std::uint8_t>;

inline bool any_feasible(const ActionMask& m) {
    for (auto v : m)
        if (v) return true;
    return false;
}

/// Reward from the design statistics alone; no analysis involved.
inline double assemble_reward(const DesignEvaluation& ev, const RewardConfig& cfg = {}) {
    const double usage = ev.inventory_total > 0 ? static_cast<double>(ev.frame_count) / ev.inventory_total : 0.0;
    return ev.target_count - std::min(usage, cfg.inventory_penalty_cap) -
           (ev.max_deflection >= ev.allowable_deflection ? 1.0 : 0.0) - ev.failed_count;
}

/// Runs the FEA and assembles
///   N_target - min(N_used / N_inventory, cap) - 1{delta_max >= delta_allowable} - |failed|.
/// Throws analysis errors from the solver unchanged.
inline DesignEvaluation evaluate_design(const GridState& g, const Scenario& s, const RewardConfig& cfg = {},
                                        const StructureConfig& structure = {}) {
    const FEModel model = build_fe_model(g, s, structure);
    const FEAResult fea = solve_static(model);

    DesignEvaluation ev;
    ev.target_count = static_cast<int>(s.targets.size());
    ev.frame_count = g.frames_used();
    ev.inventory_total = s.total_inventory();
    ev.failed_count = fea.failed_count();
    ev.max_deflection = fea.max_deflection;
    ev.allowable_deflection = cfg.deflection_ratio * s.cantilever_length();
    ev.utilization_p90 = utilization_p90(fea);

    ev.reward = assemble_reward(ev, cfg);
    return ev;
}

inline double terminal_reward(const GridState& g, const Scenario& s, const RewardConfig& cfg = {},
                              const StructureConfig& structure = {}) {
    if (connected_fraction(g, s) < 1.0)
        throw Error(ErrorCategory::contract, "terminal reward requested for a design with unconnected targets");
    return evaluate_design(g, s, cfg, structure).reward;
}

/// Conditions: empty non-marker cell, edge-adjacent to the design, stock left;
/// terminate only when every target is connected.
inline ActionMask feasible_actions(const GridState& g, const Scenario& s) {
    const int hw = s.cell_count();
    ActionMask mask(static_cast<std::size_t>(1 + s.frame_type_count() * hw), 0);
    if (g.done()) return mask;
    for (int idx = 0; idx < hw; ++idx) {
        if (g.design[idx] != kEmpty) continue;
        const Cell c = s.unflat(idx);
        bool adjacent = false;
        for (Cell n : neighbours4(c)) adjacent = adjacent || g.occupied(s, n);
        if (!adjacent) continue;
        for (int t = 0; t < s.frame_type_count(); ++t)
            if (g.remaining[t] >= 1) mask[static_cast<std::size_t>(1 + t * hw + idx)] = 1;
    }
    mask[0] = connected_fraction(g, s) >= 1.0 ? 1 : 0;
    return mask;
}

struct StepOutcome {
    GridState next_state;
    double reward = 0;
    bool terminated = false;
    bool truncated = false;
    std::optional<DesignEvaluation> evaluation;  // set on successful termination
};

inline StepOutcome step(const GridState& g, const Action& a, const Scenario& s, const RewardConfig& cfg = {},
                        const StructureConfig& structure = {}) {
    const ActionCodec codec(s);
    const ActionMask mask = feasible_actions(g, s);
    const int index = codec.encode(a);
    if (!mask[static_cast<std::size_t>(index)])
        throw Error(ErrorCategory::contract, "infeasible action " + std::to_string(index));

    StepOutcome out;
    out.next_state = g;
    out.next_state.step_count += 1;
    if (a.terminate) {
        try {
            out.evaluation = evaluate_design(g, s, cfg, structure);
            out.reward = out.evaluation->reward;
            out.terminated = true;
        } catch (const Error& e) {
            if (e.category() != ErrorCategory::analysis && e.category() != ErrorCategory::numeric) throw;
            out.reward = 0;
            out.truncated = true;
        }
    } else {
        out.next_state.design[s.flat(a.cell)] = a.frame_code;
        out.next_state.remaining[s.ordinal_of(a.frame_code)] -= 1;
        if (!any_feasible(feasible_actions(out.next_state, s))) {
            out.truncated = true;
            out.reward = 0;
        } else {
            out.reward = cfg.interim_coefficient * connected_fraction(out.next_state, s);
        }
    }
    out.next_state.terminated = out.terminated;
    out.next_state.truncated = out.truncated;
    return out;
}

inline std::vector<int> mask_indices(const ActionMask& m) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < m.size(); ++i)
        if (m[i]) idx.push_back(static_cast<int>(i));
    return idx;
}

/// Support-only start followed by up to n_rand uniformly random placements.
inline GridState reset(const Scenario& s, Rng& rng, int n_rand) {
    GridState g = initial_state(s);
    const ActionCodec codec(s);
    for (int k = 0; k < n_rand; ++k) {
        auto mask = feasible_actions(g, s);
        mask[0] = 0;
        const auto options = mask_indices(mask);
        if (options.empty()) break;
        const Action a = codec.decode(options[rng.index(options.size())]);
        g.design[s.flat(a.cell)] = a.frame_code;
        g.remaining[s.ordinal_of(a.frame_code)] -= 1;
    }
    if (!any_feasible(feasible_actions(g, s))) g.truncated = true;
    return g;
}

struct TraceStep {
    StateTensor state;
    int action = 0;
    double reward = 0;
};

using EpisodeTrace = std::vector<TraceStep>;

/// Gym-style wrapper owning one episode's state.
class Environment {
public:
    Environment(Scenario scenario, RewardConfig reward = {}, StructureConfig structure = {})
        : scenario_(std::move(scenario)), reward_(reward), structure_(structure), codec_(scenario_),
          state_(initial_state(scenario_)) {}

    const Scenario& scenario() const { return scenario_; }
    const GridState& state() const { return state_; }
    const ActionCodec& codec() const { return codec_; }
    int action_count() const { return codec_.size(); }

    StateTensor reset(Rng& rng, int n_rand) {
        state_ = trussrl::reset(scenario_, rng, n_rand);
        return observe();
    }

    StateTensor observe() const { return encode_state(state_, scenario_); }
    ActionMask mask() const { return feasible_actions(state_, scenario_); }

    StepOutcome step(int action_index) {
        StepOutcome out = trussrl::step(state_, codec_.decode(action_index), scenario_, reward_, structure_);
        state_ = out.next_state;
        return out;
    }

private:
    Scenario scenario_;
    RewardConfig reward_;
    StructureConfig structure_;
    ActionCodec codec_;
    GridState state_;
};

/// One JSON object per step: {"episode", "step", "rows", "cols", "state", "action", "reward"}.
inline void write_trace_jsonl(std::ostream& os, int episode, const EpisodeTrace& trace) {
    for (std::size_t t = 0; t < trace.size(); ++t) {
        nlohmann::json j{{"episode", episode},         {"step", t},
                         {"rows", trace[t].state.rows}, {"cols", trace[t].state.cols},
                         {"state", trace[t].state.data}, {"action", trace[t].action},
                         {"reward", trace[t].reward}};
        os << j.dump() << '\n';
    }
}

}  // namespace trussrl
