#pragma once

// Rollout collection and the two training phases.
//
// Phase 1 trains on freshly sampled scenarios (random reach-only targets,
// self-load only, a single frame type) starting from n_rand random
// placements. Phase 2 fine-tunes the same network on one fixed scenario with
// external loads and the full mixed inventory.

#include <functional>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <vector>

#include "trussrl/ppo.hpp"

namespace trussrl {

/// A terminated episode's design with its structural outcome.
struct DesignRecord {
    GridState design;
    StateTensor state;
    DesignEvaluation evaluation;
    int iteration = 0;
    long long step = 0;  // phase step count when the design was produced
};

struct IterationLog {
    int iteration = 0;
    long long steps = 0;     // phase steps so far
    long long episodes = 0;  // phase episodes so far
    int iteration_episodes = 0;
    int terminated = 0;
    int truncated = 0;
    double mean_reward = 0;  // mean undiscounted episode return
    double mean_length = 0;
    double epsilon = 0;
    UpdateStats update;
};

inline void write_log_header(std::ostream& os) {
    os << "iteration,steps,episodes,iteration_episodes,terminated,truncated,mean_reward,mean_episode_length,"
          "policy_loss,value_loss,entropy,approx_kl,clip_fraction,grad_norm,epsilon\n";
}

inline void write_log_row(std::ostream& os, const IterationLog& l) {
    std::ostringstream r;
    r << std::setprecision(10) << l.iteration << ',' << l.steps << ',' << l.episodes << ',' << l.iteration_episodes << ','
      << l.terminated << ',' << l.truncated << ',' << l.mean_reward << ',' << l.mean_length << ','
      << l.update.policy_loss << ',' << l.update.value_loss << ',' << l.update.entropy << ',' << l.update.approx_kl
      << ',' << l.update.clip_fraction << ',' << l.update.grad_norm << ',' << l.epsilon << '\n';
    os << r.str();
}

using ScenarioSampler = std::function<Scenario(Rng&)>;

struct TrainHooks {
    std::function<void(const IterationLog&)> on_iteration;
    std::function<void(const DesignRecord&)> on_design;
    /// Called after each iteration with the phase step count reached.
    std::function<void(long long)> on_steps;
};

class Trainer {
public:
    Trainer(const InputSpec& spec, TrainConfig cfg, std::uint64_t seed)
        : config(std::move(cfg)), rng(seed), network(spec, config.network) {
        config.validate();
        network.init(rng);
    }

    TrainConfig config;
    Rng rng;
    PolicyNetwork<float> network;
    nn::Adam<float> optimizer;
    int iteration = 0;        // total update iterations over the trainer's life
    long long total_steps = 0;
    int phase = 1;

    /// Collects complete episodes until at least `min_steps` transitions.
    TrajectoryBuffer collect(const ScenarioSampler& sampler, int n_rand, double epsilon, int min_steps,
                             IterationLog& log, std::vector<DesignRecord>& designs, long long phase_step) {
        TrajectoryBuffer buf;
        double return_sum = 0;
        while (static_cast<int>(buf.size()) < min_steps) {
            Environment env(sampler(rng), config.reward);
            StateTensor obs = env.reset(rng, n_rand);
            if (env.state().done()) continue;
            double ep_return = 0;
            int ep_len = 0;
            while (true) {
                Transition tr;
                tr.mask = env.mask();
                auto out = network.forward(obs);
                const auto pick = masked_sample(out.logits.col(0), tr.mask, epsilon, rng);
                tr.state = std::move(obs);
                tr.action = pick.index;
                tr.log_prob = pick.log_prob;
                tr.value = static_cast<double>(out.values(0));
                StepOutcome res = env.step(pick.index);
                tr.reward = res.reward;
                tr.done = res.terminated || res.truncated;
                ep_return += res.reward;
                ++ep_len;
                buf.steps.push_back(std::move(tr));
                if (res.terminated) {
                    ++log.terminated;
                    designs.push_back({res.next_state, encode_state(res.next_state, env.scenario()), *res.evaluation,
                                       iteration + 1, phase_step + static_cast<long long>(buf.size())});
                }
                if (res.truncated) ++log.truncated;
                if (tr.done) break;
                obs = env.observe();
            }
            ++log.iteration_episodes;
            return_sum += ep_return;
        }
        if (log.iteration_episodes > 0) {
            log.mean_reward = return_sum / log.iteration_episodes;
            log.mean_length = static_cast<double>(buf.size()) / log.iteration_episodes;
        }
        return buf;
    }

    /// Runs iterations until `phase_steps` transitions have been collected.
    void train(const ScenarioSampler& sampler, int n_rand, long long phase_steps, const TrainHooks& hooks = {}) {
        long long done_steps = 0, episodes = 0;
        while (done_steps < phase_steps) {
            IterationLog log;
            log.epsilon = config.epsilon_at(done_steps, phase_steps);
            std::vector<DesignRecord> designs;
            const int want = static_cast<int>(std::min<long long>(config.n_rollout, phase_steps - done_steps));
            TrajectoryBuffer buf = collect(sampler, n_rand, log.epsilon, want, log, designs, done_steps);
            compute_gae(buf, config.gamma, config.gae_lambda);
            log.update = ppo_update(buf, network, optimizer, config, rng);
            ++iteration;
            done_steps += static_cast<long long>(buf.size());
            total_steps += static_cast<long long>(buf.size());
            episodes += log.iteration_episodes;
            log.iteration = iteration;
            log.steps = done_steps;
            log.episodes = episodes;
            if (hooks.on_design)
                for (const auto& d : designs) hooks.on_design(d);
            if (hooks.on_iteration) hooks.on_iteration(log);
            if (hooks.on_steps) hooks.on_steps(done_steps);
        }
    }
};

/// Phase-1 scenario distribution derived from a template: same grid, support
/// and inventory-row geometry, all stock converted to the first (lightest)
/// frame type, reach-only targets drawn uniformly from cells that are neither
/// the support nor one of its 4-neighbours.
inline ScenarioSampler phase1_sampler(const Scenario& tmpl, int target_count) {
    Scenario base = tmpl;
    base.inventory_rows = tmpl.inventory_row_count();
    const int total = tmpl.total_inventory();
    std::fill(base.inventory.begin(), base.inventory.end(), 0);
    base.inventory[0] = total;
    const int n_targets = target_count > 0 ? target_count : static_cast<int>(tmpl.targets.size());

    std::vector<Cell> candidates;
    for (int i = 0; i < tmpl.height; ++i)
        for (int j = 0; j < tmpl.width; ++j)
            if (manhattan({i, j}, tmpl.support) > 1) candidates.push_back({i, j});
    if (static_cast<int>(candidates.size()) < n_targets)
        throw Error(ErrorCategory::input, "grid too small for the requested number of phase-1 targets");

    return [base, candidates, n_targets](Rng& rng) {
        Scenario s = base;
        s.name = "phase1";
        s.targets.clear();
        std::vector<Cell> pool = candidates;
        for (int k = 0; k < n_targets; ++k) {
            const std::size_t at = rng.index(pool.size());
            s.targets.push_back({pool[at], 0.0});
            pool.erase(pool.begin() + static_cast<std::ptrdiff_t>(at));
        }
        return s;
    };
}

inline ScenarioSampler fixed_sampler(const Scenario& s) {
    return [s](Rng&) { return s; };
}

/// Phase 1: fresh networks trained on randomized self-load targets with one frame type.
inline Trainer train_phase1(const Scenario& tmpl, const TrainConfig& cfg, std::uint64_t seed,
                            const TrainHooks& hooks = {}) {
    Scenario shape = tmpl;
    shape.inventory_rows = tmpl.inventory_row_count();
    Trainer t(input_spec(shape), cfg, seed);
    t.phase = 1;
    t.train(phase1_sampler(tmpl, cfg.phase1_target_count), cfg.n_rand, cfg.total_steps, hooks);
    return t;
}

/// Phase 2: continue from the base networks on one fixed loaded scenario.
/// The optimiser state is reset; no random initial placements.
inline void train_phase2(Trainer& t, const Scenario& s, const TrainConfig& cfg, const TrainHooks& hooks = {}) {
    if (input_spec(s) != t.network.spec())
        throw Error(ErrorCategory::shape, "scenario tensor shape differs from the base network's input");
    t.config = cfg;
    t.config.validate();
    t.optimizer = nn::Adam<float>();
    t.phase = 2;
    t.train(fixed_sampler(s), 0, cfg.total_steps, hooks);
}

struct PolicySamples {
    std::vector<DesignRecord> designs;
    int truncated = 0;
    int episodes = 0;
};

/// Runs the policy from the support-only state until `count` episodes
/// terminate with a design (or `max_episodes` is hit).
inline PolicySamples sample_policy_designs(PolicyNetwork<float>& net, const Scenario& s, int count, Rng& rng,
                                           bool greedy = false, int max_episodes = 0, const RewardConfig& reward = {},
                                           std::vector<EpisodeTrace>* traces = nullptr) {
    if (input_spec(s) != net.spec()) throw Error(ErrorCategory::shape, "scenario does not match the network input");
    if (max_episodes <= 0) max_episodes = 20 * std::max(count, 1);
    PolicySamples out;
    Environment env(s, reward);
    while (static_cast<int>(out.designs.size()) < count && out.episodes < max_episodes) {
        StateTensor obs = env.reset(rng, 0);
        ++out.episodes;
        EpisodeTrace trace;
        while (true) {
            const ActionMask mask = env.mask();
            auto fwd = net.forward(obs);
            const int a = greedy ? masked_argmax(fwd.logits.col(0), mask) : masked_sample(fwd.logits.col(0), mask, 0.0, rng).index;
            StepOutcome res = env.step(a);
            if (traces) trace.push_back({obs, a, res.reward});
            if (res.terminated) {
                out.designs.push_back({res.next_state, encode_state(res.next_state, s), *res.evaluation, 0, 0});
                break;
            }
            if (res.truncated) {
                ++out.truncated;
                break;
            }
            obs = env.observe();
        }
        if (traces) traces->push_back(std::move(trace));
    }
    return out;
}

}  // namespace trussrl
