#pragma once

// Naive comparator: the union of randomized Manhattan paths from the support
// to every target, grown by one stochastic expansion pass. Frame types are
// assigned at random afterwards.

#include <vector>

#include "trussrl/environment.hpp"

namespace trussrl {

/// Monotone lattice path from `from` to `to` (both included); the interleaving
/// of row and column moves is uniform over all monotone interleavings.
inline std::vector<Cell> manhattan_path(Cell from, Cell to, Rng& rng) {
    enum Move : char { vertical, horizontal };
    std::vector<Move> moves;
    moves.insert(moves.end(), static_cast<std::size_t>(std::abs(to.row - from.row)), vertical);
    moves.insert(moves.end(), static_cast<std::size_t>(std::abs(to.col - from.col)), horizontal);
    rng.shuffle(moves);

    const int dr = to.row > from.row ? 1 : -1;
    const int dc = to.col > from.col ? 1 : -1;
    std::vector<Cell> path{from};
    Cell c = from;
    for (Move m : moves) {
        if (m == vertical) c.row += dr;
        else c.col += dc;
        path.push_back(c);
    }
    return path;
}

struct BaselineConfig {
    double p_expand = 0.3;
    int max_retries = 50;
    bool permute_before_expand = false;  // default order: paths -> expand -> permute
};

namespace detail {

/// In-grid, non-marker neighbour of a target nearest to the support; ties random.
inline std::optional<Cell> path_terminus(const Scenario& s, const Target& t, Rng& rng) {
    std::vector<Cell> best;
    int best_dist = 0;
    for (Cell n : neighbours4(t.cell)) {
        if (!s.in_grid(n) || s.is_target(n)) continue;
        const int d = manhattan(n, s.support);
        if (best.empty() || d < best_dist) {
            best = {n};
            best_dist = d;
        } else if (d == best_dist) {
            best.push_back(n);
        }
    }
    if (best.empty()) return std::nullopt;
    return best[rng.index(best.size())];
}

inline int random_stocked_type(std::vector<int>& remaining, Rng& rng) {
    const int t = static_cast<int>(rng.index(remaining.size()));
    if (remaining[t] > 0) return t;
    std::vector<int> stocked;
    for (std::size_t k = 0; k < remaining.size(); ++k)
        if (remaining[k] > 0) stocked.push_back(static_cast<int>(k));
    if (stocked.empty()) return -1;
    return stocked[rng.index(stocked.size())];
}

inline std::optional<GridState> baseline_attempt(const Scenario& s, Rng& rng, const BaselineConfig& cfg) {
    GridState g = initial_state(s);
    constexpr int kPending = 100;  // occupied, type not yet assigned

    for (const auto& t : s.targets) {
        const auto end = path_terminus(s, t, rng);
        if (!end) return std::nullopt;
        for (Cell c : manhattan_path(s.support, *end, rng)) {
            int& v = g.design[s.flat(c)];
            if (v == kLoadMarker) return std::nullopt;
            if (v == kEmpty) v = kPending;
        }
    }

    auto permute = [&]() {
        for (int& v : g.design) {
            if (v != kPending) continue;
            const int t = random_stocked_type(g.remaining, rng);
            if (t < 0) return false;
            v = s.frames[t].code;
            g.remaining[t] -= 1;
        }
        return true;
    };

    if (cfg.permute_before_expand && !permute()) return std::nullopt;

    std::vector<int> frontier;
    for (int idx = 0; idx < s.cell_count(); ++idx) {
        if (g.design[idx] != kEmpty) continue;
        for (Cell n : neighbours4(s.unflat(idx)))
            if (s.in_grid(n) && g.design[s.flat(n)] >= kSupport) {
                frontier.push_back(idx);
                break;
            }
    }
    for (int idx : frontier)
        if (rng.bernoulli(cfg.p_expand)) g.design[idx] = kPending;

    if (!permute()) return std::nullopt;
    if (connected_fraction(g, s) < 1.0) return std::nullopt;
    g.step_count = g.frames_used();
    return g;
}

}  // namespace detail

/// Complete, terminate-feasible design; throws ErrorCategory::generation when
/// every retry overran the inventory or failed to reach a target.
inline GridState generate_baseline(const Scenario& s, Rng& rng, const BaselineConfig& cfg = {}) {
    for (int attempt = 0; attempt <= cfg.max_retries; ++attempt)
        if (auto g = detail::baseline_attempt(s, rng, cfg)) return *g;
    throw Error(ErrorCategory::generation,
                "baseline generation failed after " + std::to_string(cfg.max_retries) + " retries");
}

}  // namespace trussrl
