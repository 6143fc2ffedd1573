#pragma once

// Convolutional actor-critic over one-hot encoded state grids, plus the
// masked categorical distribution used to act.

#include <cmath>
#include <limits>
#include <span>
#include <vector>

#include "trussrl/environment.hpp"
#include "trussrl/nn.hpp"

namespace trussrl {

struct NetworkConfig {
    std::vector<int> conv_channels{64, 128, 128};
    int hidden = 512;
};

/// Tensor geometry the network is built for. Two scenarios can share a
/// network only if their InputSpecs compare equal.
struct InputSpec {
    int rows = 0;               // inventory rows + grid height
    int cols = 0;
    int actions = 0;            // 1 + T*H*W
    std::vector<int> codes;     // cell value of each one-hot channel

    int channels() const { return static_cast<int>(codes.size()); }
    int positions() const { return rows * cols; }
    bool operator==(const InputSpec&) const = default;
};

inline InputSpec input_spec(const Scenario& s) {
    InputSpec spec;
    spec.rows = s.inventory_row_count() + s.height;
    spec.cols = s.width;
    spec.actions = ActionCodec(s).size();
    spec.codes = {kLoadMarker, kEmpty, kSupport};
    for (const auto& f : s.frames) spec.codes.push_back(f.code);
    if (s.include_inventory_rows)
        for (int t = 0; t < s.frame_type_count(); ++t) spec.codes.push_back(s.inventory_code(t));
    return spec;
}

/// One channel per cell code; (channels, batch * rows * cols).
template <class T>
nn::RowMatrix<T> one_hot(std::span<const StateTensor* const> states, const InputSpec& spec) {
    const int P = spec.positions();
    nn::RowMatrix<T> x = nn::RowMatrix<T>::Zero(spec.channels(), static_cast<Eigen::Index>(states.size()) * P);
    for (std::size_t b = 0; b < states.size(); ++b) {
        const StateTensor& st = *states[b];
        if (st.rows != spec.rows || st.cols != spec.cols)
            throw Error(ErrorCategory::shape, "state tensor " + std::to_string(st.rows) + "x" + std::to_string(st.cols) +
                                                  " does not match network input " + std::to_string(spec.rows) + "x" +
                                                  std::to_string(spec.cols));
        for (int p = 0; p < P; ++p) {
            const int v = st.data[static_cast<std::size_t>(p)];
            int ch = -1;
            for (int c = 0; c < spec.channels(); ++c)
                if (spec.codes[c] == v) ch = c;
            if (ch < 0) throw Error(ErrorCategory::shape, "cell code " + std::to_string(v) + " has no input channel");
            x(ch, static_cast<Eigen::Index>(b) * P + p) = T(1);
        }
    }
    return x;
}

template <class T>
class PolicyNetwork {
public:
    struct Output {
        nn::Matrix<T> logits;  // (actions, batch)
        nn::Vector<T> values;  // (batch)
    };

    PolicyNetwork(InputSpec spec, NetworkConfig cfg)
        : spec_(std::move(spec)), cfg_(std::move(cfg)),
          fc_(cfg_.conv_channels.back() * spec_.positions(), cfg_.hidden, "fc"),
          actor_(cfg_.hidden, spec_.actions, "actor"), critic_(cfg_.hidden, 1, "critic") {
        int in = spec_.channels();
        for (std::size_t k = 0; k < cfg_.conv_channels.size(); ++k) {
            const std::string name = "conv" + std::to_string(k);
            convs_.emplace_back(in, cfg_.conv_channels[k], spec_.rows, spec_.cols, name);
            norms_.emplace_back(cfg_.conv_channels[k], spec_.positions(), "norm" + std::to_string(k));
            in = cfg_.conv_channels[k];
        }
    }

    void init(Rng& rng) {
        for (auto& c : convs_) c.init(rng);
        fc_.init(rng, std::sqrt(2.0 / (cfg_.conv_channels.back() * spec_.positions())));
        actor_.init(rng, 0.01 / std::sqrt(static_cast<double>(cfg_.hidden)));
        critic_.init(rng, 1.0 / std::sqrt(static_cast<double>(cfg_.hidden)));
    }

    const InputSpec& spec() const { return spec_; }
    const NetworkConfig& config() const { return cfg_; }

    Output forward(const nn::RowMatrix<T>& x, int batch) {
        if (x.rows() != spec_.channels() || x.cols() != static_cast<Eigen::Index>(batch) * spec_.positions())
            throw Error(ErrorCategory::shape, "network input has wrong shape");
        batch_ = batch;
        relu_masks_.resize(convs_.size());
        nn::RowMatrix<T> h = x;
        for (std::size_t k = 0; k < convs_.size(); ++k) {
            h = norms_[k].forward(convs_[k].forward(h, batch), batch);
            relu_masks_[k] = (h.array() > T(0)).template cast<T>();
            h = h.cwiseMax(T(0));
        }
        const int C = cfg_.conv_channels.back(), P = spec_.positions();
        nn::Matrix<T> flat(C * P, batch);
        for (int b = 0; b < batch; ++b)
            for (int c = 0; c < C; ++c)
                flat.col(b).segment(static_cast<Eigen::Index>(c) * P, P) =
                    h.row(c).segment(static_cast<Eigen::Index>(b) * P, P).transpose();
        nn::Matrix<T> z = fc_.forward(flat);
        fc_mask_ = (z.array() > T(0)).template cast<T>();
        z = z.cwiseMax(T(0));
        Output out;
        out.logits = actor_.forward(z);
        out.values = critic_.forward(z).row(0).transpose();
        return out;
    }

    Output forward(std::span<const StateTensor* const> states) {
        return forward(one_hot<T>(states, spec_), static_cast<int>(states.size()));
    }

    Output forward(const StateTensor& state) {
        const StateTensor* p = &state;
        return forward(std::span<const StateTensor* const>(&p, 1));
    }

    /// Accumulates parameter gradients for upstream dL/dlogits and dL/dvalues
    /// of the most recent forward call.
    void backward(const nn::Matrix<T>& dlogits, const nn::Vector<T>& dvalues) {
        nn::Matrix<T> dz = actor_.backward(dlogits);
        dz += critic_.backward(dvalues.transpose());
        dz.array() *= fc_mask_.array();
        const nn::Matrix<T> dflat = fc_.backward(dz);
        const int C = cfg_.conv_channels.back(), P = spec_.positions();
        nn::RowMatrix<T> dh(C, static_cast<Eigen::Index>(batch_) * P);
        for (int b = 0; b < batch_; ++b)
            for (int c = 0; c < C; ++c)
                dh.row(c).segment(static_cast<Eigen::Index>(b) * P, P) =
                    dflat.col(b).segment(static_cast<Eigen::Index>(c) * P, P).transpose();
        for (std::size_t k = convs_.size(); k-- > 0;) {
            dh.array() *= relu_masks_[k].array();
            dh = convs_[k].backward(norms_[k].backward(dh, batch_), batch_);
        }
    }

    std::vector<nn::Parameter<T>*> parameters() {
        std::vector<nn::Parameter<T>*> ps;
        for (std::size_t k = 0; k < convs_.size(); ++k) {
            ps.push_back(&convs_[k].weight);
            ps.push_back(&convs_[k].bias);
            ps.push_back(&norms_[k].gamma);
            ps.push_back(&norms_[k].beta);
        }
        for (auto* l : {&fc_, &actor_, &critic_}) {
            ps.push_back(&l->weight);
            ps.push_back(&l->bias);
        }
        return ps;
    }

    void zero_grad() {
        for (auto* p : parameters()) p->grad.setZero();
    }

    std::size_t parameter_count() {
        std::size_t n = 0;
        for (auto* p : parameters()) n += static_cast<std::size_t>(p->value.size());
        return n;
    }

private:
    InputSpec spec_;
    NetworkConfig cfg_;
    std::vector<nn::Conv2d<T>> convs_;
    std::vector<nn::LayerNorm2d<T>> norms_;
    nn::Linear<T> fc_, actor_, critic_;
    std::vector<nn::RowMatrix<T>> relu_masks_;
    nn::Matrix<T> fc_mask_;
    int batch_ = 0;
};

/// Softmax restricted to mask-true entries; masked entries get probability 0
/// and log-probability -inf.
struct MaskedDistribution {
    std::vector<double> probs;
    std::vector<double> log_probs;
    double entropy = 0;
};

template <class Logits>
MaskedDistribution masked_distribution(const Logits& logits, const ActionMask& mask) {
    const std::size_t n = mask.size();
    MaskedDistribution d;
    d.probs.assign(n, 0.0);
    d.log_probs.assign(n, -std::numeric_limits<double>::infinity());
    double mx = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) mx = std::max(mx, static_cast<double>(logits[i]));
    if (!std::isfinite(mx)) throw Error(ErrorCategory::contract, "masked distribution over an all-false mask");
    double z = 0;
    for (std::size_t i = 0; i < n; ++i)
        if (mask[i]) z += std::exp(static_cast<double>(logits[i]) - mx);
    const double log_z = mx + std::log(z);
    for (std::size_t i = 0; i < n; ++i) {
        if (!mask[i]) continue;
        d.log_probs[i] = static_cast<double>(logits[i]) - log_z;
        d.probs[i] = std::exp(d.log_probs[i]);
        d.entropy -= d.probs[i] * d.log_probs[i];
    }
    return d;
}

struct SampledAction {
    int index = 0;
    double log_prob = 0;  // masked-softmax log-probability, also for epsilon draws
};

/// Epsilon-greedy over the feasible set: with probability epsilon a uniform
/// mask-true index, otherwise a draw from the masked softmax.
template <class Logits>
SampledAction masked_sample(const Logits& logits, const ActionMask& mask, double epsilon, Rng& rng) {
    const MaskedDistribution d = masked_distribution(logits, mask);
    SampledAction out;
    if (epsilon > 0 && rng.uniform01() < epsilon) {
        const auto options = mask_indices(mask);
        out.index = options[rng.index(options.size())];
    } else {
        const double u = rng.uniform01();
        double acc = 0;
        int last = -1;
        out.index = -1;
        for (std::size_t i = 0; i < mask.size(); ++i) {
            if (!mask[i]) continue;
            last = static_cast<int>(i);
            acc += d.probs[i];
            if (u < acc) {
                out.index = static_cast<int>(i);
                break;
            }
        }
        if (out.index < 0) out.index = last;
    }
    out.log_prob = d.log_probs[static_cast<std::size_t>(out.index)];
    return out;
}

/// Most probable feasible action.
template <class Logits>
int masked_argmax(const Logits& logits, const ActionMask& mask) {
    int best = -1;
    for (std::size_t i = 0; i < mask.size(); ++i)
        if (mask[i] && (best < 0 || logits[i] > logits[static_cast<std::size_t>(best)])) best = static_cast<int>(i);
    if (best < 0) throw Error(ErrorCategory::contract, "argmax over an all-false mask");
    return best;
}

}  // namespace trussrl
