#pragma once

// Proximal policy optimisation: trajectory buffer, generalised advantage
// estimation and the clipped-surrogate update.

#include <cmath>
#include <numeric>
#include <span>
#include <sstream>
#include <vector>

#include <json.hpp>

#include "trussrl/policy.hpp"

namespace trussrl {

struct TrainConfig {
    long long total_steps = 100000;
    int n_rollout = 2048;
    int n_epochs = 10;
    int minibatch = 64;
    double gamma = 0.99;
    double gae_lambda = 0.95;
    double clip_ratio = 0.2;
    double learning_rate = 3e-4;
    double entropy_coef = 0.01;
    double value_coef = 0.5;
    double max_grad_norm = 0.5;
    double epsilon_start = 0.10;
    double epsilon_end = 0.01;
    double epsilon_decay_fraction = 0.5;  // of the phase's total_steps
    int n_rand = 2;
    int checkpoint_every = 0;             // iterations; 0 disables periodic checkpoints
    int phase1_target_count = 0;          // 0: same count as the template scenario
    NetworkConfig network{};
    RewardConfig reward{};

    void validate() const {
        auto bad = [](const std::string& m) { throw Error(ErrorCategory::input, "train config: " + m); };
        if (total_steps < 0) bad("total_steps must be >= 0");
        if (n_rollout <= 0 || n_epochs <= 0 || minibatch <= 0) bad("n_rollout, n_epochs and minibatch must be positive");
        if (!(gamma > 0 && gamma <= 1) || !(gae_lambda >= 0 && gae_lambda <= 1)) bad("gamma/lambda out of range");
        if (!(clip_ratio > 0)) bad("clip_ratio must be positive");
        if (!(learning_rate > 0)) bad("learning_rate must be positive");
        if (entropy_coef < 0 || value_coef < 0 || max_grad_norm < 0) bad("coefficients must be non-negative");
        for (double e : {epsilon_start, epsilon_end})
            if (!(e >= 0 && e <= 1)) bad("epsilon must lie in [0,1]");
        if (n_rand < 0) bad("n_rand must be >= 0");
        if (network.conv_channels.empty() || network.hidden <= 0) bad("network shape");
    }

    /// Linear anneal over the first epsilon_decay_fraction of the phase.
    double epsilon_at(long long phase_step, long long phase_total) const {
        const double horizon = epsilon_decay_fraction * static_cast<double>(phase_total);
        if (horizon <= 0) return epsilon_end;
        const double f = std::min(1.0, static_cast<double>(phase_step) / horizon);
        return epsilon_start + f * (epsilon_end - epsilon_start);
    }
};

inline nlohmann::json to_json(const TrainConfig& c) {
    return {{"total_steps", c.total_steps},
            {"n_rollout", c.n_rollout},
            {"n_epochs", c.n_epochs},
            {"minibatch", c.minibatch},
            {"gamma", c.gamma},
            {"gae_lambda", c.gae_lambda},
            {"clip_ratio", c.clip_ratio},
            {"learning_rate", c.learning_rate},
            {"entropy_coef", c.entropy_coef},
            {"value_coef", c.value_coef},
            {"max_grad_norm", c.max_grad_norm},
            {"epsilon_start", c.epsilon_start},
            {"epsilon_end", c.epsilon_end},
            {"epsilon_decay_fraction", c.epsilon_decay_fraction},
            {"n_rand", c.n_rand},
            {"checkpoint_every", c.checkpoint_every},
            {"phase1_target_count", c.phase1_target_count},
            {"network", {{"conv_channels", c.network.conv_channels}, {"hidden", c.network.hidden}}},
            {"reward",
             {{"interim_coefficient", c.reward.interim_coefficient},
              {"deflection_ratio", c.reward.deflection_ratio},
              {"inventory_penalty_cap", c.reward.inventory_penalty_cap}}}};
}

/// Missing keys keep their defaults.
inline TrainConfig train_config_from_json(const nlohmann::json& j, TrainConfig c = {}) {
    try {
        auto get = [&](const char* key, auto& field) {
            if (j.contains(key)) field = j.at(key).get<std::decay_t<decltype(field)>>();
        };
        get("total_steps", c.total_steps);
        get("n_rollout", c.n_rollout);
        get("n_epochs", c.n_epochs);
        get("minibatch", c.minibatch);
        get("gamma", c.gamma);
        get("gae_lambda", c.gae_lambda);
        get("clip_ratio", c.clip_ratio);
        get("learning_rate", c.learning_rate);
        get("entropy_coef", c.entropy_coef);
        get("value_coef", c.value_coef);
        get("max_grad_norm", c.max_grad_norm);
        get("epsilon_start", c.epsilon_start);
        get("epsilon_end", c.epsilon_end);
        get("epsilon_decay_fraction", c.epsilon_decay_fraction);
        get("n_rand", c.n_rand);
        get("checkpoint_every", c.checkpoint_every);
        get("phase1_target_count", c.phase1_target_count);
        if (j.contains("network")) {
            const auto& n = j.at("network");
            if (n.contains("conv_channels")) c.network.conv_channels = n.at("conv_channels").get<std::vector<int>>();
            if (n.contains("hidden")) c.network.hidden = n.at("hidden").get<int>();
        }
        if (j.contains("reward")) {
            const auto& r = j.at("reward");
            c.reward.interim_coefficient = r.value("interim_coefficient", c.reward.interim_coefficient);
            c.reward.deflection_ratio = r.value("deflection_ratio", c.reward.deflection_ratio);
            c.reward.inventory_penalty_cap = r.value("inventory_penalty_cap", c.reward.inventory_penalty_cap);
        }
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorCategory::input, std::string("train config json: ") + e.what());
    }
    c.validate();
    return c;
}

struct Transition {
    StateTensor state;
    ActionMask mask;
    int action = 0;
    double log_prob = 0;  // behaviour log-probability under the masked softmax
    double reward = 0;
    double value = 0;
    bool done = false;    // terminated or truncated after this step
};

struct TrajectoryBuffer {
    std::vector<Transition> steps;
    std::vector<double> advantages;
    std::vector<double> returns;

    std::size_t size() const { return steps.size(); }
    bool empty() const { return steps.empty(); }
    void clear() {
        steps.clear();
        advantages.clear();
        returns.clear();
    }
};

/// GAE with zero bootstrap after done steps; returns = advantages + values.
/// `tail_value` bootstraps a final step that is not marked done.
inline void compute_gae(TrajectoryBuffer& buf, double gamma, double lambda, double tail_value = 0.0) {
    if (buf.empty()) throw Error(ErrorCategory::input, "advantage estimation on an empty buffer");
    const std::size_t n = buf.size();
    buf.advantages.assign(n, 0.0);
    buf.returns.assign(n, 0.0);
    double next_adv = 0, next_value = tail_value;
    for (std::size_t t = n; t-- > 0;) {
        const auto& s = buf.steps[t];
        const double carry = s.done ? 0.0 : 1.0;
        if (t + 1 < n) next_value = buf.steps[t + 1].value;
        const double delta = s.reward + gamma * next_value * carry - s.value;
        next_adv = delta + gamma * lambda * carry * next_adv;
        buf.advantages[t] = next_adv;
        buf.returns[t] = next_adv + s.value;
    }
}

/// Zero mean, unit variance (population std, +1e-8).
inline std::vector<double> normalized(const std::vector<double>& a) {
    if (a.size() < 2) return a;
    const double mean = std::accumulate(a.begin(), a.end(), 0.0) / static_cast<double>(a.size());
    double var = 0;
    for (double x : a) var += (x - mean) * (x - mean);
    const double sd = std::sqrt(var / static_cast<double>(a.size()));
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) out[i] = (a[i] - mean) / (sd + 1e-8);
    return out;
}

struct PPOCoefficients {
    double clip_ratio = 0.2;
    double value_coef = 0.5;
    double entropy_coef = 0.01;
};

struct LossTerms {
    double policy = 0;
    double value = 0;
    double entropy = 0;
    double approx_kl = 0;
    double clip_fraction = 0;
    double total = 0;
};

/// Clipped-surrogate loss over buffer rows `idx`:
///   -mean(min(rho A, clip(rho, 1-c, 1+c) A)) + vf * mean((V - R)^2) - ent * mean(H).
/// With `backward`, accumulates parameter gradients (caller zeroes them).
template <class T>
LossTerms ppo_loss(PolicyNetwork<T>& net, const TrajectoryBuffer& buf, std::span<const int> idx,
                   const std::vector<double>& advantages, const PPOCoefficients& c, bool backward) {
    const int B = static_cast<int>(idx.size());
    std::vector<const StateTensor*> states;
    states.reserve(idx.size());
    for (int i : idx) states.push_back(&buf.steps[static_cast<std::size_t>(i)].state);
    auto out = net.forward(std::span<const StateTensor* const>(states));

    nn::Matrix<T> dlogits = nn::Matrix<T>::Zero(out.logits.rows(), B);
    nn::Vector<T> dvalues = nn::Vector<T>::Zero(B);
    LossTerms L;
    const double inv_b = 1.0 / B;
    for (int b = 0; b < B; ++b) {
        const auto& tr = buf.steps[static_cast<std::size_t>(idx[b])];
        const auto d = masked_distribution(out.logits.col(b), tr.mask);
        const double lp = d.log_probs[static_cast<std::size_t>(tr.action)];
        const double ratio = std::exp(lp - tr.log_prob);
        const double A = advantages[static_cast<std::size_t>(idx[b])];
        const double lo = 1.0 - c.clip_ratio, hi = 1.0 + c.clip_ratio;
        const double clipped = std::min(std::max(ratio, lo), hi);
        const double s1 = ratio * A, s2 = clipped * A;
        L.policy -= std::min(s1, s2) * inv_b;
        const bool clip_active = s2 < s1 && (ratio < lo || ratio > hi);
        const double dlp = clip_active ? 0.0 : -ratio * A;

        const double v = static_cast<double>(out.values(b));
        const double err = v - buf.returns[static_cast<std::size_t>(idx[b])];
        L.value += err * err * inv_b;
        L.entropy += d.entropy * inv_b;
        L.approx_kl += (tr.log_prob - lp) * inv_b;
        L.clip_fraction += (ratio < lo || ratio > hi ? 1.0 : 0.0) * inv_b;

        if (!backward) continue;
        for (std::size_t j = 0; j < tr.mask.size(); ++j) {
            if (!tr.mask[j]) continue;
            const double p = d.probs[j];
            double g = dlp * ((static_cast<int>(j) == tr.action ? 1.0 : 0.0) - p);
            g += c.entropy_coef * p * (d.log_probs[j] + d.entropy);
            dlogits(static_cast<Eigen::Index>(j), b) = static_cast<T>(g * inv_b);
        }
        dvalues(b) = static_cast<T>(2.0 * c.value_coef * err * inv_b);
    }
    L.total = L.policy + c.value_coef * L.value - c.entropy_coef * L.entropy;
    if (!std::isfinite(L.total)) {
        std::ostringstream os;
        os << "non-finite PPO loss (policy " << L.policy << ", value " << L.value << ", entropy " << L.entropy << ")";
        throw Error(ErrorCategory::numeric, os.str());
    }
    if (backward) net.backward(dlogits, dvalues);
    return L;
}

struct UpdateStats {
    double policy_loss = 0;
    double value_loss = 0;
    double entropy = 0;
    double approx_kl = 0;
    double clip_fraction = 0;
    double grad_norm = 0;
    int minibatches = 0;
};

/// n_epochs passes over shuffled minibatches with Adam and global-norm clipping.
/// Expects compute_gae to have run on `buf`.
template <class T>
UpdateStats ppo_update(TrajectoryBuffer& buf, PolicyNetwork<T>& net, nn::Adam<T>& opt, const TrainConfig& cfg,
                       Rng& rng) {
    if (buf.advantages.size() != buf.size())
        throw Error(ErrorCategory::contract, "ppo_update called before advantage estimation");
    const std::vector<double> adv = normalized(buf.advantages);
    const PPOCoefficients coef{cfg.clip_ratio, cfg.value_coef, cfg.entropy_coef};
    auto params = net.parameters();

    std::vector<int> order(buf.size());
    std::iota(order.begin(), order.end(), 0);
    UpdateStats stats;
    for (int epoch = 0; epoch < cfg.n_epochs; ++epoch) {
        rng.shuffle(order);
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.minibatch)) {
            const std::size_t len = std::min<std::size_t>(static_cast<std::size_t>(cfg.minibatch), order.size() - start);
            net.zero_grad();
            const LossTerms L =
                ppo_loss(net, buf, std::span<const int>(order.data() + start, len), adv, coef, /*backward=*/true);
            stats.grad_norm += nn::clip_grad_norm(params, cfg.max_grad_norm);
            opt.step(params, cfg.learning_rate);
            stats.policy_loss += L.policy;
            stats.value_loss += L.value;
            stats.entropy += L.entropy;
            stats.approx_kl += L.approx_kl;
            stats.clip_fraction += L.clip_fraction;
            ++stats.minibatches;
        }
    }
    if (stats.minibatches > 0) {
        const double k = 1.0 / stats.minibatches;
        stats.policy_loss *= k;
        stats.value_loss *= k;
        stats.entropy *= k;
        stats.approx_kl *= k;
        stats.clip_fraction *= k;
        stats.grad_norm *= k;
    }
    return stats;
}

}  // namespace trussrl
