#pragma once

// Linear-static direct stiffness analysis of 2D Euler-Bernoulli frames.

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <vector>

#include <Eigen/Dense>

#include "trussrl/structure.hpp"

namespace trussrl {

using Matrix6 = Eigen::Matrix<double, 6, 6>;

struct FEAResult {
    std::vector<std::array<double, 3>> displacements;  // (ux, uy, theta) per node
    std::vector<std::array<double, 3>> reactions;      // (Rx, Ry, Mz) per node, zero on free nodes
    double max_deflection = 0;                         // m, over free nodes
    std::vector<double> axial_stress;                  // MPa, + tension
    std::vector<double> utilization;                   // |sigma| / f_y
    std::vector<int> failed_elements;                  // utilization > 1

    int failed_count() const { return static_cast<int>(failed_elements.size()); }
};

/// Global-axis stiffness of a frame member from (x1,y1) to (x2,y2).
inline Matrix6 element_stiffness(double x1, double y1, double x2, double y2, double E, double A, double I) {
    const double dx = x2 - x1, dy = y2 - y1;
    const double L = std::hypot(dx, dy);
    if (!(L > 0)) throw Error(ErrorCategory::model, "zero-length element");
    const double c = dx / L, s = dy / L;

    const double ea = E * A / L;
    const double k1 = 12 * E * I / (L * L * L);
    const double k2 = 6 * E * I / (L * L);
    const double k3 = 4 * E * I / L;
    const double k4 = 2 * E * I / L;

    Matrix6 k;
    k << ea, 0, 0, -ea, 0, 0,
         0, k1, k2, 0, -k1, k2,
         0, k2, k3, 0, -k2, k4,
         -ea, 0, 0, ea, 0, 0,
         0, -k1, -k2, 0, k1, -k2,
         0, k2, k4, 0, -k2, k3;

    Matrix6 t = Matrix6::Zero();
    for (int b = 0; b < 2; ++b) {
        t(3 * b, 3 * b) = c;
        t(3 * b, 3 * b + 1) = s;
        t(3 * b + 1, 3 * b) = -s;
        t(3 * b + 1, 3 * b + 1) = c;
        t(3 * b + 2, 3 * b + 2) = 1;
    }
    return t.transpose() * k * t;
}

inline Matrix6 element_stiffness(const FEModel& m, const FEElement& e) {
    const auto& a = m.nodes[e.node_a];
    const auto& b = m.nodes[e.node_b];
    return element_stiffness(a.x, a.y, b.x, b.y, e.material.youngs_modulus, e.section.area, e.section.inertia);
}

/// Nearest-rank 90th percentile: ascending sort, 1-based rank ceil(0.9 n).
inline double utilization_p90(std::vector<double> utilization) {
    if (utilization.empty()) throw Error(ErrorCategory::input, "utilization percentile of an empty element list");
    std::sort(utilization.begin(), utilization.end());
    const std::size_t n = utilization.size();
    const std::size_t rank = (9 * n + 9) / 10;
    return utilization[rank - 1];
}

inline double utilization_p90(const FEAResult& r) { return utilization_p90(r.utilization); }

inline FEAResult solve_static(const FEModel& m) {
    const int n_nodes = static_cast<int>(m.nodes.size());
    const int n_dof = 3 * n_nodes;
    if (m.fixed_nodes.empty()) throw Error(ErrorCategory::analysis, "model has no fixed nodes (singular stiffness)");
    for (const auto& [id, f] : m.nodal_loads)
        if (!std::isfinite(f.fx) || !std::isfinite(f.fy)) throw Error(ErrorCategory::input, "non-finite nodal load");

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(n_dof, n_dof);
    for (const auto& e : m.elements) {
        const Matrix6 ke = element_stiffness(m, e);
        const std::array<int, 2> nodes{e.node_a, e.node_b};
        for (int a = 0; a < 2; ++a)
            for (int b = 0; b < 2; ++b)
                K.block<3, 3>(3 * nodes[a], 3 * nodes[b]) += ke.block<3, 3>(3 * a, 3 * b);
    }

    Eigen::VectorXd f = Eigen::VectorXd::Zero(n_dof);
    for (const auto& [id, load] : m.nodal_loads) {
        f(3 * id) += load.fx;
        f(3 * id + 1) += load.fy;
    }

    std::vector<char> fixed(static_cast<std::size_t>(n_nodes), 0);
    for (int id : m.fixed_nodes) fixed[id] = 1;
    std::vector<int> free_dofs;
    free_dofs.reserve(static_cast<std::size_t>(n_dof));
    for (int i = 0; i < n_nodes; ++i)
        if (!fixed[i])
            for (int d = 0; d < 3; ++d) free_dofs.push_back(3 * i + d);

    const int nf = static_cast<int>(free_dofs.size());
    Eigen::VectorXd u = Eigen::VectorXd::Zero(n_dof);
    if (nf > 0) {
        Eigen::MatrixXd kff(nf, nf);
        Eigen::VectorXd ff(nf);
        for (int a = 0; a < nf; ++a) {
            ff(a) = f(free_dofs[a]);
            for (int b = 0; b < nf; ++b) kff(a, b) = K(free_dofs[a], free_dofs[b]);
        }
        Eigen::LDLT<Eigen::MatrixXd> ldlt(kff);
        if (ldlt.info() != Eigen::Success) throw Error(ErrorCategory::analysis, "stiffness factorization failed");
        const auto d = ldlt.vectorD().cwiseAbs();
        if (!(d.minCoeff() > 1e-12 * d.maxCoeff()) || !ldlt.isPositive())
            throw Error(ErrorCategory::analysis, "singular reduced stiffness (mechanism or floating structure)");
        const Eigen::VectorXd uf = ldlt.solve(ff);
        if (!uf.allFinite()) throw Error(ErrorCategory::numeric, "non-finite displacements");
        for (int a = 0; a < nf; ++a) u(free_dofs[a]) = uf(a);
    }

    FEAResult r;
    r.displacements.resize(static_cast<std::size_t>(n_nodes));
    r.reactions.assign(static_cast<std::size_t>(n_nodes), {0, 0, 0});
    const Eigen::VectorXd ku = K * u;
    for (int i = 0; i < n_nodes; ++i) {
        r.displacements[i] = {u(3 * i), u(3 * i + 1), u(3 * i + 2)};
        if (fixed[i]) {
            for (int d = 0; d < 3; ++d) r.reactions[i][d] = ku(3 * i + d) - f(3 * i + d);
        } else {
            r.max_deflection = std::max(r.max_deflection, std::hypot(u(3 * i), u(3 * i + 1)));
        }
    }

    r.axial_stress.reserve(m.elements.size());
    r.utilization.reserve(m.elements.size());
    for (std::size_t k = 0; k < m.elements.size(); ++k) {
        const auto& e = m.elements[k];
        const auto& a = m.nodes[e.node_a];
        const auto& b = m.nodes[e.node_b];
        const double L = std::hypot(b.x - a.x, b.y - a.y);
        const double c = (b.x - a.x) / L, s = (b.y - a.y) / L;
        const double elong = (u(3 * e.node_b) - u(3 * e.node_a)) * c + (u(3 * e.node_b + 1) - u(3 * e.node_a + 1)) * s;
        const double sigma = e.material.youngs_modulus * elong / L;  // kN/m^2
        const double util = std::abs(sigma) / e.material.yield_strength;
        r.axial_stress.push_back(sigma / 1000.0);
        r.utilization.push_back(util);
        if (util > 1.0) r.failed_elements.push_back(static_cast<int>(k));
    }
    return r;
}

inline void write_node_csv(const FEModel& m, const FEAResult& r, std::ostream& os) {
    os.precision(12);
    os << "node,x_m,y_m,ux_m,uy_m,theta_rad,fixed\n";
    std::vector<char> fixed(m.nodes.size(), 0);
    for (int id : m.fixed_nodes) fixed[id] = 1;
    for (std::size_t i = 0; i < m.nodes.size(); ++i)
        os << i << ',' << m.nodes[i].x << ',' << m.nodes[i].y << ',' << r.displacements[i][0] << ','
           << r.displacements[i][1] << ',' << r.displacements[i][2] << ',' << int(fixed[i]) << '\n';
}

inline void write_element_csv(const FEModel& m, const FEAResult& r, std::ostream& os) {
    os.precision(12);
    os << "element,node_a,node_b,area_m2,stress_MPa,utilization,failed\n";
    for (std::size_t k = 0; k < m.elements.size(); ++k)
        os << k << ',' << m.elements[k].node_a << ',' << m.elements[k].node_b << ',' << m.elements[k].section.area << ','
           << r.axial_stress[k] << ',' << r.utilization[k] << ',' << (r.utilization[k] > 1.0 ? 1 : 0) << '\n';
}

}  // namespace trussrl
