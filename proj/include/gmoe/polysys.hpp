#pragma once

// The two polynomial systems whose solvability orders drive the loss
// exponents.
//
// RBAR, for s = 1..r:
//   sum_l sum_{n1 + 2 n2 = s} p_l^2 q1_l^n1 q2_l^n2 / (n1! n2!) = 0
// RTILDE, for 1 <= l1 + l2 <= r:
//   sum_l sum_{alpha in J(l1, l2)} p_l^2 prod_t qt_l^alpha_t / alpha_t! = 0
//   J(l1, l2) = {alpha in N^5 : a1 + 2 a2 + a3 = l1, a3 + a4 + 2 a5 = l2}
//
// Residuals are accumulated in long double with compensated summation.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include <unsupported/Eigen/LevenbergMarquardt>
#include <unsupported/Eigen/NumericalDiff>

#include "gmoe/errors.hpp"
#include "gmoe/json_io.hpp"
#include "gmoe/model.hpp"
#include "gmoe/rng.hpp"

namespace gmoe::polysys {

enum class Family { RBAR, RTILDE };

inline std::string to_string(Family f) { return f == Family::RBAR ? "rbar" : "rtilde"; }

inline Family family_from_string(const std::string& s) {
    if (s == "rbar") return Family::RBAR;
    if (s == "rtilde") return Family::RTILDE;
    throw DomainError("unknown polynomial family '" + s + "' (expected rbar or rtilde)");
}

struct PolySystemSpec {
    Family family = Family::RBAR;
    int m = 2;
    int r = 1;

    void validate() const {
        if (m < 1) throw DomainError("polysys: m must be positive");
        if (r < 1) throw DomainError("polysys: r must be positive");
    }
};

/// Unknowns: p (length m) and q (m x 5, column t holds q_{t+1}). RBAR reads
/// only the first two columns.
struct Candidate {
    Vector p;
    Matrix q;

    static Candidate zeros(int m) { return {Vector::Zero(m), Matrix::Zero(m, 5)}; }
};

using Multi = std::array<int, 5>;

/// All alpha with a1 + 2 a2 + a3 = l1 and a3 + a4 + 2 a5 = l2, sorted
/// lexicographically.
inline std::vector<Multi> enumerate_J(int l1, int l2) {
    std::vector<Multi> out;
    if (l1 < 0 || l2 < 0) return out;
    for (int a3 = 0; a3 <= std::min(l1, l2); ++a3) {
        for (int a2 = 0; 2 * a2 <= l1 - a3; ++a2) {
            const int a1 = l1 - a3 - 2 * a2;
            for (int a5 = 0; 2 * a5 <= l2 - a3; ++a5) {
                const int a4 = l2 - a3 - 2 * a5;
                out.push_back({a1, a2, a3, a4, a5});
            }
        }
    }
    std::sort(out.begin(), out.end());
    return out;
}

/// Equation indices of RTILDE order r: (l1, l2) by l1 + l2, then l1.
inline std::vector<std::pair<int, int>> rtilde_equations(int r) {
    std::vector<std::pair<int, int>> out;
    for (int total = 1; total <= r; ++total) {
        for (int l1 = 0; l1 <= total; ++l1) out.emplace_back(l1, total - l1);
    }
    return out;
}

inline std::size_t equation_count(const PolySystemSpec& spec) {
    if (spec.family == Family::RBAR) return static_cast<std::size_t>(spec.r);
    return rtilde_equations(spec.r).size();
}

namespace detail {

// Neumaier's variant of Kahan summation.
class CompensatedSum {
public:
    void add(long double v) {
        const long double t = sum_ + v;
        if (std::fabs(sum_) >= std::fabs(v)) {
            comp_ += (sum_ - t) + v;
        } else {
            comp_ += (v - t) + sum_;
        }
        sum_ = t;
    }
    long double value() const { return sum_ + comp_; }

private:
    long double sum_ = 0.0L;
    long double comp_ = 0.0L;
};

inline long double factorial(int n) {
    long double f = 1.0L;
    for (int i = 2; i <= n; ++i) f *= i;
    return f;
}

inline long double monomial(const Candidate& cand, Eigen::Index l, const Multi& alpha) {
    long double v = static_cast<long double>(cand.p(l)) * static_cast<long double>(cand.p(l));
    for (int t = 0; t < 5; ++t) {
        if (alpha[static_cast<std::size_t>(t)] == 0) continue;
        long double base = static_cast<long double>(cand.q(l, t));
        long double pw = 1.0L;
        for (int e = 0; e < alpha[static_cast<std::size_t>(t)]; ++e) pw *= base;
        v *= pw / factorial(alpha[static_cast<std::size_t>(t)]);
    }
    return v;
}

}  // namespace detail

/// One residual per equation; long double precision.
inline std::vector<long double> residuals_extended(const PolySystemSpec& spec, const Candidate& cand) {
    spec.validate();
    if (cand.p.size() != spec.m || cand.q.rows() != spec.m || cand.q.cols() != 5) {
        throw DomainError("polysys: candidate dimensions do not match m");
    }
    std::vector<long double> out;
    const auto accumulate = [&](const std::vector<Multi>& alphas) {
        detail::CompensatedSum acc;
        for (Eigen::Index l = 0; l < spec.m; ++l) {
            for (const auto& alpha : alphas) acc.add(detail::monomial(cand, l, alpha));
        }
        out.push_back(acc.value());
    };
    if (spec.family == Family::RBAR) {
        for (int s = 1; s <= spec.r; ++s) {
            std::vector<Multi> alphas;
            for (int n2 = 0; 2 * n2 <= s; ++n2) alphas.push_back({s - 2 * n2, n2, 0, 0, 0});
            accumulate(alphas);
        }
    } else {
        for (const auto& [l1, l2] : rtilde_equations(spec.r)) accumulate(enumerate_J(l1, l2));
    }
    return out;
}

inline std::vector<double> residuals(const PolySystemSpec& spec, const Candidate& cand) {
    const auto ext = residuals_extended(spec, cand);
    return {ext.begin(), ext.end()};
}

struct Verdict {
    bool is_solution = false;
    bool is_nontrivial = false;
    double max_abs_residual = 0.0;
    std::vector<double> residuals;
};

inline constexpr double kNontrivialTol = 1e-12;

/// All p_l nonzero and at least one entry of the distinguished column (q1
/// for RBAR, q4 for RTILDE) nonzero.
inline bool is_nontrivial(const PolySystemSpec& spec, const Candidate& cand) {
    const Eigen::Index col = spec.family == Family::RBAR ? 0 : 3;
    return (cand.p.array().abs() > kNontrivialTol).all() && (cand.q.col(col).array().abs() > kNontrivialTol).any();
}

inline Verdict verify_candidate(const PolySystemSpec& spec, const Candidate& cand, double tol) {
    Verdict v;
    v.residuals = residuals(spec, cand);
    for (double r : v.residuals) v.max_abs_residual = std::max(v.max_abs_residual, std::abs(r));
    v.is_solution = v.max_abs_residual <= tol;
    v.is_nontrivial = is_nontrivial(spec, cand);
    return v;
}

/// Solutions shown for the m = 2 case with p_l = 1 instead of the printed
/// p_l = 0 (which would make every candidate trivial).
inline Candidate builtin_rtilde_m2() {
    Candidate c = Candidate::zeros(2);
    c.p << 1, 1;
    c.q(0, 3) = 1;
    c.q(1, 3) = -1;
    c.q(0, 4) = -0.5;
    c.q(1, 4) = -0.5;
    return c;
}

inline Candidate builtin_rbar_m2() {
    Candidate c = Candidate::zeros(2);
    c.p << 1, 1;
    c.q(0, 0) = 1;
    c.q(1, 0) = -1;
    c.q(0, 1) = -0.5;
    c.q(1, 1) = -0.5;
    return c;
}

/// The printed m = 3 values with p_l = 1.
inline Candidate builtin_rtilde_m3() {
    Candidate c = Candidate::zeros(3);
    c.p << 1, 1, 1;
    c.q(0, 3) = std::sqrt(3.0) / 3.0;
    c.q(1, 3) = -std::sqrt(3.0) / 3.0;
    c.q(0, 4) = -1.0 / 6.0;
    c.q(1, 4) = -1.0 / 6.0;
    return c;
}

struct SearchResult {
    Candidate best;
    double best_residual = std::numeric_limits<double>::infinity();  ///< max |residual| at best
    int best_restart = -1;
    int restarts = 0;
};

namespace detail {

// Free variables -> candidate with p = 1 and the distinguished column
// scaled to unit Euclidean norm. The first m variables parametrize the
// distinguished column, then the remaining relevant columns in order.
inline Candidate decode(const PolySystemSpec& spec, const Vector& v) {
    const auto m = static_cast<Eigen::Index>(spec.m);
    Candidate c = Candidate::zeros(spec.m);
    c.p.setOnes();
    const Eigen::Index lead = spec.family == Family::RBAR ? 0 : 3;
    const Vector head = v.head(m);
    const double norm = head.norm();
    c.q.col(lead) = norm > 0 ? Vector(head / norm) : head;
    const std::vector<Eigen::Index> rest =
        spec.family == Family::RBAR ? std::vector<Eigen::Index>{1} : std::vector<Eigen::Index>{0, 1, 2, 4};
    for (std::size_t t = 0; t < rest.size(); ++t) {
        c.q.col(rest[t]) = v.segment(m * static_cast<Eigen::Index>(t + 1), m);
    }
    return c;
}

inline Eigen::Index variable_count(const PolySystemSpec& spec) {
    return static_cast<Eigen::Index>(spec.m) * (spec.family == Family::RBAR ? 2 : 5);
}

struct ResidualFunctor : Eigen::DenseFunctor<double> {
    ResidualFunctor(const PolySystemSpec& spec, int inputs, int values)
        : Eigen::DenseFunctor<double>(inputs, values), spec_(spec) {}

    int operator()(const InputType& v, ValueType& out) const {
        const auto res = residuals_extended(spec_, decode(spec_, v));
        out.setZero();
        for (std::size_t i = 0; i < res.size(); ++i) out(static_cast<Eigen::Index>(i)) = static_cast<double>(res[i]);
        return 0;
    }

    PolySystemSpec spec_;
};

}  // namespace detail

/// Multi-start Levenberg-Marquardt on the normalized candidate space.
///
/// A small best residual shows a nontrivial solution numerically; a large
/// one is evidence, not proof, that none exists.
inline SearchResult search_nontrivial(const PolySystemSpec& spec, int restarts, std::uint64_t seed) {
    spec.validate();
    if (restarts < 1) throw DomainError("search_nontrivial: restarts must be at least 1");
    const auto nvars = detail::variable_count(spec);
    // MINPACK needs at least as many residuals as unknowns; pad with zeros.
    const auto nvals = std::max<Eigen::Index>(nvars, static_cast<Eigen::Index>(equation_count(spec)));

    SearchResult out;
    out.restarts = restarts;
    for (int rs = 0; rs < restarts; ++rs) {
        Rng rng(substream(seed, static_cast<std::uint64_t>(rs)));
        std::normal_distribution<double> normal(0.0, 1.0);
        Vector v(nvars);
        for (Eigen::Index i = 0; i < nvars; ++i) v(i) = normal(rng);
        if (v.head(spec.m).norm() == 0.0) v(0) = 1.0;

        detail::ResidualFunctor fn(spec, static_cast<int>(nvars), static_cast<int>(nvals));
        Eigen::NumericalDiff<detail::ResidualFunctor, Eigen::Central> diff(fn);
        Eigen::LevenbergMarquardt<decltype(diff)> lm(diff);
        lm.setMaxfev(4000);
        lm.setXtol(1e-15);
        lm.setFtol(1e-15);
        lm.setGtol(0.0);
        lm.minimize(v);

        const Candidate cand = detail::decode(spec, v);
        if (!v.allFinite()) continue;
        double worst = 0.0;
        for (auto r : residuals_extended(spec, cand)) worst = std::max(worst, static_cast<double>(std::fabs(r)));
        if (worst < out.best_residual) {
            out.best_residual = worst;
            out.best = cand;
            out.best_restart = rs;
        }
    }
    return out;
}

inline Json candidate_to_json(const Candidate& c) {
    Json j;
    j["p"] = vector_to_json(c.p);
    Json q = Json::array();
    for (Eigen::Index t = 0; t < 5; ++t) q.push_back(vector_to_json(c.q.col(t)));
    j["q"] = std::move(q);
    return j;
}

inline Candidate candidate_from_json(const Json& j) {
    Candidate c;
    c.p = vector_from_json(j.at("p"), "p");
    const auto& q = j.at("q");
    if (q.size() != 5) throw DomainError("candidate json: q must list five columns q1..q5");
    c.q.resize(c.p.size(), 5);
    for (Eigen::Index t = 0; t < 5; ++t) {
        const Vector col = vector_from_json(q[static_cast<std::size_t>(t)], "q");
        if (col.size() != c.p.size()) throw DomainError("candidate json: column length differs from p");
        c.q.col(t) = col;
    }
    return c;
}

}  // namespace gmoe::polysys
