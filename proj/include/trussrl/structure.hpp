#pragma once

// Grid design -> 2D frame finite-element model.
//
// Units: kN, m, kN/m^2 (kPa). Each occupied cell is a square module whose four
// corners are nodes on the integer lattice (row r, col c) with r = 0 at the
// top, so x = c * module_size and y = (height - r) * module_size.

#include <cmath>
#include <map>
#include <numbers>
#include <ostream>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "trussrl/grid.hpp"

namespace trussrl {

struct SectionProperties {
    double area = 0;          // m^2
    double inertia = 0;       // m^4
    double outer_radius = 0;  // m
    double inner_radius = 0;  // m
};

/// Hollow circular tube: R_inner = (1 - alpha) R, A = pi (R^2 - Ri^2), I = pi/4 (R^4 - Ri^4).
inline SectionProperties section_properties(const FrameType& f) {
    f.validate();
    const double r = f.outer_radius;
    const double ri = (1.0 - f.thickness_ratio) * r;
    const double r2 = r * r, ri2 = ri * ri;
    return {std::numbers::pi * (r2 - ri2), std::numbers::pi / 4.0 * (r2 * r2 - ri2 * ri2), r, ri};
}

struct Material {
    double youngs_modulus = 200e6;  // kN/m^2 (200 GPa)
    double shear_modulus = 80e6;    // kN/m^2 (80 GPa), stored only
    double yield_strength = 350e3;  // kN/m^2 (350 MPa)
};

enum class BraceTopology { single_diagonal, x_brace };

struct StructureConfig {
    BraceTopology brace = BraceTopology::single_diagonal;
    int support_frame_code = 2;  // section and self-load used for the support module
    Material material{};
};

struct FENode {
    double x = 0;
    double y = 0;
};

struct FEElement {
    int node_a = 0;
    int node_b = 0;
    SectionProperties section;
    Material material;
    std::vector<int> owner_codes;  // frame codes of every module contributing this member
};

struct NodalLoad {
    double fx = 0;
    double fy = 0;
};

struct FEModel {
    std::vector<FENode> nodes;
    std::vector<FEElement> elements;
    std::vector<int> fixed_nodes;
    std::map<int, NodalLoad> nodal_loads;

    double total_load_y() const {
        double s = 0;
        for (const auto& [id, f] : nodal_loads) s += f.fy;
        return s;
    }

    /// Throws model errors for broken references or duplicated nodes/members.
    void check() const {
        const int n = static_cast<int>(nodes.size());
        std::set<std::pair<int, int>> pairs;
        for (const auto& e : elements) {
            if (e.node_a < 0 || e.node_a >= n || e.node_b < 0 || e.node_b >= n || e.node_a == e.node_b)
                throw Error(ErrorCategory::model, "element references invalid node");
            if (!pairs.insert(std::minmax(e.node_a, e.node_b)).second)
                throw Error(ErrorCategory::model, "duplicate element");
        }
        for (int id : fixed_nodes)
            if (id < 0 || id >= n) throw Error(ErrorCategory::model, "fixed node id out of range");
        for (const auto& [id, f] : nodal_loads)
            if (id < 0 || id >= n) throw Error(ErrorCategory::model, "load on invalid node");
        for (int a = 0; a < n; ++a)
            for (int b = a + 1; b < n; ++b)
                if (std::abs(nodes[a].x - nodes[b].x) < 1e-9 && std::abs(nodes[a].y - nodes[b].y) < 1e-9)
                    throw Error(ErrorCategory::model, "coincident nodes");
    }
};

namespace detail {

using LatticeKey = std::pair<int, int>;  // (corner row, corner col)

/// Shared edge between a load marker and the neighbour it faces, as lattice corners.
inline std::pair<LatticeKey, LatticeKey> facing_edge(Cell marker, Cell neighbour) {
    const int r = marker.row, c = marker.col;
    if (neighbour.row < r) return {{r, c}, {r, c + 1}};
    if (neighbour.row > r) return {{r + 1, c}, {r + 1, c + 1}};
    if (neighbour.col < c) return {{r, c}, {r + 1, c}};
    return {{r, c + 1}, {r + 1, c + 1}};
}

}  // namespace detail

/// Occupied neighbour of a target that carries its load: closest to the
/// support by lattice distance, ties broken in up/left/right/down order.
inline std::optional<Cell> load_attachment_cell(const GridState& g, const Scenario& s, const Target& t) {
    std::optional<Cell> best;
    int best_dist = 0;
    for (Cell n : neighbours4(t.cell)) {
        if (!g.occupied(s, n)) continue;
        const int d = manhattan(n, s.support);
        if (!best || d < best_dist) {
            best = n;
            best_dist = d;
        }
    }
    return best;
}

inline FEModel build_fe_model(const GridState& g, const Scenario& s, const StructureConfig& cfg = {}) {
    using detail::LatticeKey;
    const double h = s.module_size;

    std::map<LatticeKey, int> node_ids;
    auto corners = [](Cell c) {
        // bottom-left, bottom-right, top-right, top-left
        return std::array<LatticeKey, 4>{LatticeKey{c.row + 1, c.col}, LatticeKey{c.row + 1, c.col + 1},
                                         LatticeKey{c.row, c.col + 1}, LatticeKey{c.row, c.col}};
    };

    std::vector<std::pair<Cell, int>> cells;  // cell, frame code
    for (int i = 0; i < s.height; ++i)
        for (int j = 0; j < s.width; ++j) {
            const int v = g.design[s.flat({i, j})];
            if (v >= kSupport) cells.push_back({{i, j}, v == kSupport ? cfg.support_frame_code : v});
        }
    for (const auto& [cell, code] : cells)
        for (const auto& k : corners(cell)) node_ids.emplace(k, 0);

    FEModel m;
    m.nodes.reserve(node_ids.size());
    int next = 0;
    for (auto& [key, id] : node_ids) {
        id = next++;
        m.nodes.push_back({key.second * h, (s.height - key.first) * h});
    }

    struct Member {
        FrameType frame;
        std::vector<int> owners;
    };
    std::map<std::pair<int, int>, Member> members;
    auto add_member = [&](const LatticeKey& a, const LatticeKey& b, const FrameType& f) {
        const auto key = std::minmax(node_ids.at(a), node_ids.at(b));
        auto [it, inserted] = members.try_emplace(key, Member{f, {}});
        if (!inserted && f.outer_radius > it->second.frame.outer_radius) it->second.frame = f;
        it->second.owners.push_back(f.code);
    };

    for (const auto& [cell, code] : cells) {
        const FrameType& f = s.frames[static_cast<std::size_t>(s.ordinal_of(code))];
        const auto c = corners(cell);
        for (int e = 0; e < 4; ++e) add_member(c[e], c[(e + 1) % 4], f);
        add_member(c[0], c[2], f);
        if (cfg.brace == BraceTopology::x_brace) add_member(c[1], c[3], f);
        for (const auto& k : c) m.nodal_loads[node_ids.at(k)].fy -= f.self_load_per_node;
    }

    for (const auto& [key, mem] : members) {
        FEElement e;
        e.node_a = key.first;
        e.node_b = key.second;
        e.section = section_properties(mem.frame);
        e.material = cfg.material;
        e.owner_codes = mem.owners;
        std::sort(e.owner_codes.begin(), e.owner_codes.end());
        m.elements.push_back(std::move(e));
    }

    for (const auto& k : corners(s.support)) m.fixed_nodes.push_back(node_ids.at(k));
    std::sort(m.fixed_nodes.begin(), m.fixed_nodes.end());

    for (const auto& t : s.targets) {
        if (t.load_kN <= 0) continue;
        const auto at = load_attachment_cell(g, s, t);
        if (!at)
            throw Error(ErrorCategory::model, "loaded target (" + std::to_string(t.cell.row) + "," +
                                                  std::to_string(t.cell.col) + ") has no adjacent frame");
        const auto [a, b] = detail::facing_edge(t.cell, *at);
        m.nodal_loads[node_ids.at(a)].fy -= 0.5 * t.load_kN;
        m.nodal_loads[node_ids.at(b)].fy -= 0.5 * t.load_kN;
    }
    return m;
}

/// One record per line: node / element / fixed / load.
inline void write_model_listing(const FEModel& m, std::ostream& os) {
    os.precision(12);
    for (std::size_t i = 0; i < m.nodes.size(); ++i) os << "node " << i << ' ' << m.nodes[i].x << ' ' << m.nodes[i].y << '\n';
    for (std::size_t i = 0; i < m.elements.size(); ++i) {
        const auto& e = m.elements[i];
        os << "element " << i << ' ' << e.node_a << ' ' << e.node_b << ' ' << e.section.area << ' '
           << e.section.inertia << ' ' << e.material.youngs_modulus;
        for (int c : e.owner_codes) os << ' ' << c;
        os << '\n';
    }
    for (int id : m.fixed_nodes) os << "fixed " << id << '\n';
    for (const auto& [id, f] : m.nodal_loads) os << "load " << id << ' ' << f.fx << ' ' << f.fy << '\n';
}

inline std::string model_listing(const FEModel& m) {
    std::ostringstream os;
    write_model_listing(m, os);
    return os.str();
}

}  // namespace trussrl
