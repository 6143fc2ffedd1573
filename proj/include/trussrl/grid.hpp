#pragma once

// Scenario and state model of the frame-placement process.
//
// Cell codes in the design grid:
//   -1 load/target marker, 0 empty, 1 support frame, >= 2 free frame of that
//   type code. Inventory rows (optional) hold code (max_frame_code + 1 + ordinal)
//   per remaining unit, i.e. 4 = light, 5 = medium for the default catalog.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <compare>
#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "trussrl/error.hpp"

namespace trussrl {

inline constexpr int kLoadMarker = -1;
inline constexpr int kEmpty = 0;
inline constexpr int kSupport = 1;

struct Cell {
    int row = 0;
    int col = 0;

    auto operator<=>(const Cell&) const = default;
};

inline int manhattan(Cell a, Cell b) { return std::abs(a.row - b.row) + std::abs(a.col - b.col); }

/// 4-neighbours in fixed order: up, left, right, down.
inline std::array<Cell, 4> neighbours4(Cell c) {
    return {Cell{c.row - 1, c.col}, Cell{c.row, c.col - 1}, Cell{c.row, c.col + 1}, Cell{c.row + 1, c.col}};
}

struct FrameType {
    int code = 2;
    std::string name;
    double outer_radius = 0.1;      // m
    double thickness_ratio = 0.1;   // wall thickness / outer radius
    double self_load_per_node = 4;  // kN, applied downward at each of the 4 corner nodes

    void validate() const {
        if (code < 2) throw Error(ErrorCategory::input, "frame code must be >= 2: " + name);
        if (!(outer_radius > 0)) throw Error(ErrorCategory::input, "outer radius must be positive: " + name);
        if (!(thickness_ratio > 0 && thickness_ratio < 1))
            throw Error(ErrorCategory::input, "thickness ratio must lie in (0,1): " + name);
        if (!(self_load_per_node >= 0)) throw Error(ErrorCategory::input, "self load must be non-negative: " + name);
    }
};

inline FrameType light_frame() { return {2, "light", 0.10, 0.10, 4.0}; }
inline FrameType medium_frame() { return {3, "medium", 0.20, 0.10, 6.0}; }
inline std::vector<FrameType> default_frames() { return {light_frame(), medium_frame()}; }

struct Target {
    Cell cell;
    double load_kN = 0.0;  // downward; 0 means reach-only
};

struct Scenario {
    std::string name;
    int height = 6;
    int width = 14;
    Cell support{};
    std::vector<Target> targets;
    std::vector<FrameType> frames = default_frames();  // sorted by code
    std::vector<int> inventory;                        // count per frame ordinal
    double module_size = 1.0;                          // m
    bool include_inventory_rows = true;
    std::optional<int> inventory_rows;  // fixed row count; default ceil(total / width)

    int frame_type_count() const { return static_cast<int>(frames.size()); }
    int cell_count() const { return height * width; }

    bool in_grid(Cell c) const { return c.row >= 0 && c.row < height && c.col >= 0 && c.col < width; }
    int flat(Cell c) const { return c.row * width + c.col; }
    Cell unflat(int idx) const { return {idx / width, idx % width}; }

    int total_inventory() const {
        int s = 0;
        for (int n : inventory) s += n;
        return s;
    }

    int ordinal_of(int code) const {
        for (int t = 0; t < frame_type_count(); ++t)
            if (frames[t].code == code) return t;
        throw Error(ErrorCategory::input, "unknown frame code " + std::to_string(code));
    }

    int max_frame_code() const {
        int m = 1;
        for (const auto& f : frames) m = std::max(m, f.code);
        return m;
    }

    int inventory_code(int ordinal) const { return max_frame_code() + 1 + ordinal; }

    bool is_target(Cell c) const {
        return std::any_of(targets.begin(), targets.end(), [&](const Target& t) { return t.cell == c; });
    }

    bool has_external_load() const {
        return std::any_of(targets.begin(), targets.end(), [](const Target& t) { return t.load_kN > 0; });
    }

    /// Rows reserved for the inventory stock in the state tensor.
    int inventory_row_count() const {
        if (!include_inventory_rows) return 0;
        if (inventory_rows) return *inventory_rows;
        return (total_inventory() + width - 1) / width;
    }

    /// Cantilever length used for the deflection limit: horizontal distance
    /// from the support to the farthest loaded target (all targets when none
    /// carries an external load), in metres.
    double cantilever_length() const {
        int span = 0;
        const bool loaded = has_external_load();
        for (const auto& t : targets)
            if (!loaded || t.load_kN > 0) span = std::max(span, std::abs(t.cell.col - support.col));
        return span * module_size;
    }

    /// Throws ErrorCategory::input describing the first violated invariant.
    /// Self-load-only scenarios (all targets reach-only) are accepted when
    /// require_external_load is false.
    void validate(bool require_external_load = true) const {
        if (height <= 0 || width <= 0) throw Error(ErrorCategory::input, "grid dimensions must be positive");
        if (frames.empty()) throw Error(ErrorCategory::input, "at least one frame type is required");
        for (std::size_t t = 0; t < frames.size(); ++t) {
            frames[t].validate();
            if (t > 0 && frames[t].code <= frames[t - 1].code)
                throw Error(ErrorCategory::input, "frame codes must be unique and ascending");
        }
        if (static_cast<int>(inventory.size()) != frame_type_count())
            throw Error(ErrorCategory::input, "inventory must list one count per frame type");
        for (int n : inventory)
            if (n < 0) throw Error(ErrorCategory::input, "inventory counts must be non-negative");
        if (!(module_size > 0)) throw Error(ErrorCategory::input, "module size must be positive");
        if (!in_grid(support)) throw Error(ErrorCategory::input, "support cell outside grid");
        if (targets.empty()) throw Error(ErrorCategory::input, "scenario needs at least one target");
        for (std::size_t a = 0; a < targets.size(); ++a) {
            const auto& t = targets[a];
            if (!in_grid(t.cell)) throw Error(ErrorCategory::input, "target cell outside grid");
            if (t.cell == support) throw Error(ErrorCategory::input, "target coincides with support");
            if (!(t.load_kN >= 0) || !std::isfinite(t.load_kN))
                throw Error(ErrorCategory::input, "target loads must be finite and non-negative");
            for (std::size_t b = 0; b < a; ++b)
                if (targets[b].cell == t.cell) throw Error(ErrorCategory::input, "duplicate target cell");
        }
        if (total_inventory() == 0) throw Error(ErrorCategory::input, "inventory is empty");
        bool open_neighbour = false;
        for (Cell n : neighbours4(support)) open_neighbour = open_neighbour || (in_grid(n) && !is_target(n));
        if (!open_neighbour) throw Error(ErrorCategory::input, "support has no free neighbour for the first frame");
        if (require_external_load && !has_external_load())
            throw Error(ErrorCategory::input, "scenario needs at least one target with a positive load");
        if (include_inventory_rows && inventory_rows && *inventory_rows * width < total_inventory())
            throw Error(ErrorCategory::encoding, "inventory rows cannot hold the inventory");
    }
};

struct GridState {
    std::vector<int> design;          // height*width, row-major
    std::vector<int> remaining;       // per frame ordinal
    int step_count = 0;
    bool terminated = false;
    bool truncated = false;

    int at(const Scenario& s, Cell c) const { return design[s.flat(c)]; }
    bool occupied(const Scenario& s, Cell c) const { return s.in_grid(c) && at(s, c) >= kSupport; }

    /// Free frames placed (support excluded).
    int frames_used() const {
        int n = 0;
        for (int v : design) n += v >= 2 ? 1 : 0;
        return n;
    }

    bool done() const { return terminated || truncated; }

    bool operator==(const GridState&) const = default;
};

/// Support and load markers placed with the full inventory in stock.
inline GridState initial_state(const Scenario& s) {
    GridState g;
    g.design.assign(static_cast<std::size_t>(s.cell_count()), kEmpty);
    for (const auto& t : s.targets) g.design[s.flat(t.cell)] = kLoadMarker;
    g.design[s.flat(s.support)] = kSupport;
    g.remaining = s.inventory;
    return g;
}

struct Action {
    bool terminate = false;
    int frame_code = 2;
    Cell cell{};

    static Action stop() { return {true, 0, {}}; }
    static Action place(int code, Cell c) { return {false, code, c}; }
};

/// Flat action index codec: 0 = terminate, 1 + t*H*W + i*W + j = place type t at (i, j).
class ActionCodec {
public:
    explicit ActionCodec(const Scenario& s)
        : height_(s.height), width_(s.width), frames_(s.frames) {}

    int size() const { return 1 + static_cast<int>(frames_.size()) * height_ * width_; }

    int encode(const Action& a) const {
        if (a.terminate) return 0;
        if (a.cell.row < 0 || a.cell.row >= height_ || a.cell.col < 0 || a.cell.col >= width_)
            throw Error(ErrorCategory::contract, "action cell outside design region");
        int t = -1;
        for (std::size_t k = 0; k < frames_.size(); ++k)
            if (frames_[k].code == a.frame_code) t = static_cast<int>(k);
        if (t < 0) throw Error(ErrorCategory::contract, "unknown frame code in action");
        return 1 + t * height_ * width_ + a.cell.row * width_ + a.cell.col;
    }

    Action decode(int index) const {
        if (index < 0 || index >= size())
            throw Error(ErrorCategory::decode, "action index " + std::to_string(index) + " out of range");
        if (index == 0) return Action::stop();
        const int rest = index - 1;
        const int hw = height_ * width_;
        const int t = rest / hw;
        const int cell = rest % hw;
        return Action::place(frames_[t].code, Cell{cell / width_, cell % width_});
    }

private:
    int height_;
    int width_;
    std::vector<FrameType> frames_;
};

/// Integer matrix, row-major.
struct StateTensor {
    int rows = 0;
    int cols = 0;
    std::vector<int> data;

    int operator()(int r, int c) const { return data[static_cast<std::size_t>(r * cols + c)]; }
    bool operator==(const StateTensor&) const = default;
};

/// Inventory rows (row-major stock cells) stacked above the design grid.
inline StateTensor encode_state(const GridState& g, const Scenario& s) {
    const int inv_rows = s.inventory_row_count();
    StateTensor out;
    out.rows = inv_rows + s.height;
    out.cols = s.width;
    out.data.assign(static_cast<std::size_t>(out.rows * out.cols), 0);
    if (inv_rows > 0) {
        int remaining_total = 0;
        for (int n : g.remaining) remaining_total += n;
        if (remaining_total > inv_rows * s.width)
            throw Error(ErrorCategory::encoding, "remaining inventory exceeds inventory-row capacity");
        std::size_t k = 0;
        for (int t = 0; t < s.frame_type_count(); ++t)
            for (int n = 0; n < g.remaining[t]; ++n) out.data[k++] = s.inventory_code(t);
    }
    std::copy(g.design.begin(), g.design.end(), out.data.begin() + static_cast<std::ptrdiff_t>(inv_rows) * s.width);
    for (const auto& t : s.targets) out.data[static_cast<std::size_t>((inv_rows + t.cell.row) * s.width + t.cell.col)] = kLoadMarker;
    return out;
}

/// Occupied cells 4-connected to the support (support included), as a flat mask.
inline std::vector<char> reachable_from_support(const GridState& g, const Scenario& s) {
    std::vector<char> seen(static_cast<std::size_t>(s.cell_count()), 0);
    std::deque<Cell> queue{s.support};
    seen[s.flat(s.support)] = 1;
    while (!queue.empty()) {
        const Cell c = queue.front();
        queue.pop_front();
        for (Cell n : neighbours4(c)) {
            if (!g.occupied(s, n) || seen[s.flat(n)]) continue;
            seen[s.flat(n)] = 1;
            queue.push_back(n);
        }
    }
    return seen;
}

inline bool target_connected(const std::vector<char>& reach, const Scenario& s, const Target& t) {
    for (Cell n : neighbours4(t.cell))
        if (s.in_grid(n) && reach[s.flat(n)]) return true;
    return false;
}

/// Fraction of targets with a support-connected occupied cell edge-adjacent to their marker.
inline double connected_fraction(const GridState& g, const Scenario& s) {
    if (s.targets.empty()) return 0.0;
    const auto reach = reachable_from_support(g, s);
    int hit = 0;
    for (const auto& t : s.targets) hit += target_connected(reach, s, t) ? 1 : 0;
    return static_cast<double>(hit) / static_cast<double>(s.targets.size());
}

}  // namespace trussrl
