#pragma once

// Voronoi cells of fitted atoms around the true atoms, and the two Voronoi
// losses between mixing measures.
//
//   Dbar(G, G0) = sum_{j: |A_j| > 1} sum_{i in A_j} pi_i K_ij(r, r/2, 2, r, r/2),  r = rbar(|A_j|)
//               + sum_{j: |A_j| = 1} sum_{i in A_j} pi_i K_ij(1, 1, 1, 1, 1)
//               + sum_j | sum_{i in A_j} pi_i - pi0_j |
//
// Dtilde replaces the over-fitted exponent tuple of zero-location true
// atoms by (rt, rt/2, rt/2, rt, rt/2), rt = rtilde(|A_j|).

#include <array>
#include <cmath>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "gmoe/errors.hpp"
#include "gmoe/model.hpp"

namespace gmoe {

struct VoronoiAssignment {
    std::vector<std::vector<std::size_t>> cells;  ///< k0 index sets over [k]
    Matrix distances;                             ///< k x k0, ||theta_i - theta0_j||

    std::vector<std::size_t> cell_sizes() const {
        std::vector<std::size_t> out;
        for (const auto& c : cells) out.push_back(c.size());
        return out;
    }
    std::size_t max_cell() const {
        std::size_t m = 0;
        for (const auto& c : cells) m = std::max(m, c.size());
        return m;
    }
};

/// Exponents for ||dc||, ||dGamma||, ||da||, |db|, |dnu|.
struct KappaTuple {
    std::array<double, 5> kappa{1, 1, 1, 1, 1};

    KappaTuple() = default;
    KappaTuple(double k1, double k2, double k3, double k4, double k5) : kappa{k1, k2, k3, k4, k5} {
        for (double v : kappa) {
            if (!(v > 0.0)) throw DomainError("kappa tuple: exponents must be positive");
        }
    }
};

enum class SettingKind { TypeI, TypeII };

struct SettingClass {
    SettingKind kind = SettingKind::TypeI;
    std::size_t ktilde = 0;                 ///< number of zero-location true atoms
    std::vector<std::size_t> zero_indices;  ///< which true atoms, ascending
};

/// Known solvability orders, optionally extended by user-asserted values for
/// cell sizes the theory leaves open.
struct OrderTable {
    std::map<int, int> asserted_rbar;
    std::map<int, int> asserted_rtilde;
};

inline int rbar(int m, const OrderTable& table = {}) {
    if (m < 2) throw DomainError("rbar: defined for m >= 2");
    if (m == 2) return 4;
    if (m == 3) return 6;
    if (auto it = table.asserted_rbar.find(m); it != table.asserted_rbar.end()) return it->second;
    throw UnsupportedOrderError(m, 7,
                                "rbar(" + std::to_string(m) + ") is unknown; only rbar >= 7 is established");
}

inline int rtilde(int m, const OrderTable& table = {}) {
    if (m < 2) throw DomainError("rtilde: defined for m >= 2");
    if (m == 2) return 4;
    if (m == 3) return 6;
    if (auto it = table.asserted_rtilde.find(m); it != table.asserted_rtilde.end()) return it->second;
    throw UnsupportedOrderError(m, 0,
                                "rtilde(" + std::to_string(m) + ") is unknown; only rtilde <= rbar is established");
}

/// ||dc||^k1 + ||dGamma||_F^k2 + ||da||^k3 + |db|^k4 + |dnu|^k5
inline double kappa_K(const Component& fitted, const Component& truth, const KappaTuple& kap) {
    if (fitted.dim() != truth.dim()) throw DomainError("kappa_K: dimension mismatch");
    const auto& k = kap.kappa;
    return std::pow((fitted.c - truth.c).norm(), k[0]) + std::pow((fitted.gamma - truth.gamma).norm(), k[1]) +
           std::pow((fitted.a - truth.a).norm(), k[2]) + std::pow(std::abs(fitted.b - truth.b), k[3]) +
           std::pow(std::abs(fitted.nu - truth.nu), k[4]);
}

/// Nearest true atom for every fitted atom in the stacked-parameter
/// Euclidean norm. Ties go to the smallest true index.
inline VoronoiAssignment assign_cells(const MixingMeasure& g, const MixingMeasure& g0) {
    if (g.dim() != g0.dim()) throw DomainError("assign_cells: dimension mismatch");
    const auto k = static_cast<Eigen::Index>(g.size());
    const auto k0 = static_cast<Eigen::Index>(g0.size());
    std::vector<Vector> truth;
    for (const auto& comp : g0.components()) truth.push_back(stack_parameters(comp));
    VoronoiAssignment out;
    out.cells.resize(static_cast<std::size_t>(k0));
    out.distances.resize(k, k0);
    for (Eigen::Index i = 0; i < k; ++i) {
        const Vector theta = stack_parameters(g.component(static_cast<std::size_t>(i)));
        Eigen::Index best = 0;
        for (Eigen::Index j = 0; j < k0; ++j) {
            out.distances(i, j) = (theta - truth[static_cast<std::size_t>(j)]).norm();
            if (out.distances(i, j) < out.distances(i, best)) best = j;
        }
        out.cells[static_cast<std::size_t>(best)].push_back(static_cast<std::size_t>(i));
    }
    return out;
}

/// Type II iff some true gating location has norm <= zero_tol.
inline SettingClass classify_setting(const MixingMeasure& g0, double zero_tol = 0.0) {
    SettingClass out;
    for (std::size_t j = 0; j < g0.size(); ++j) {
        if (g0.component(j).c.norm() <= zero_tol) out.zero_indices.push_back(j);
    }
    out.ktilde = out.zero_indices.size();
    out.kind = out.ktilde == 0 ? SettingKind::TypeI : SettingKind::TypeII;
    return out;
}

namespace detail {

inline void require_distinct_atoms(const MixingMeasure& g0) {
    for (std::size_t i = 0; i < g0.size(); ++i) {
        for (std::size_t j = i + 1; j < g0.size(); ++j) {
            if (g0.component(i) == g0.component(j)) {
                throw DomainError("voronoi loss: true measure has repeated atoms " + std::to_string(i) + " and " +
                                  std::to_string(j));
            }
        }
    }
}

// Shared body of both losses; `zero_cells[j]` selects the rtilde tuple.
inline double voronoi_loss(const MixingMeasure& g, const MixingMeasure& g0, const std::vector<bool>& zero_cells,
                           const OrderTable& table) {
    require_distinct_atoms(g0);
    const auto cells = assign_cells(g, g0);
    double parameter_term = 0.0;
    double weight_term = 0.0;
    for (std::size_t j = 0; j < g0.size(); ++j) {
        const auto& cell = cells.cells[j];
        KappaTuple kap;
        if (cell.size() > 1) {
            const int m = static_cast<int>(cell.size());
            if (zero_cells[j]) {
                const double r = rtilde(m, table);
                kap = KappaTuple(r, r / 2, r / 2, r, r / 2);
            } else {
                const double r = rbar(m, table);
                kap = KappaTuple(r, r / 2, 2, r, r / 2);
            }
        }
        double mass = 0.0;
        for (auto i : cell) {
            parameter_term += g.weight(i) * kappa_K(g.component(i), g0.component(j), kap);
            mass += g.weight(i);
        }
        weight_term += std::abs(mass - g0.weight(j));
    }
    return parameter_term + weight_term;
}

}  // namespace detail

inline double loss_dbar(const MixingMeasure& g, const MixingMeasure& g0, const OrderTable& table = {}) {
    return detail::voronoi_loss(g, g0, std::vector<bool>(g0.size(), false), table);
}

/// Zero-location cells are looked up through setting.zero_indices, which
/// is equivalent to reordering g0 so that those atoms come first.
inline double loss_dtilde(const MixingMeasure& g, const MixingMeasure& g0, const SettingClass& setting,
                          const OrderTable& table = {}) {
    std::vector<bool> zero(g0.size(), false);
    for (auto j : setting.zero_indices) {
        if (j >= g0.size()) throw DomainError("loss_dtilde: setting does not belong to this measure");
        zero[j] = true;
    }
    return detail::voronoi_loss(g, g0, zero, table);
}

}  // namespace gmoe
