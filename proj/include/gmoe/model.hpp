#pragma once

// Gaussian-gated mixture of experts: parameter types, density evaluation
// and the equivalence between one GMoE atom and a (d+1)-variate Gaussian.
//
// An atom theta = (c, Gamma, a, b, nu) describes
//   X ~ N(c, Gamma),   Y | X ~ N(a^T X + b, nu)
// and a mixing measure is a weighted list of such atoms. All densities are
// evaluated in the log domain.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Eigenvalues>

#include "gmoe/errors.hpp"

namespace gmoe {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

inline constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Lower bounds standing in for the compactness of the parameter space.
struct Floors {
    double lambda = 1e-8;  ///< smallest admissible covariance eigenvalue
    double nu = 1e-8;      ///< smallest admissible expert variance
    double beta = 0.0;     ///< smallest admissible weight in constrained mode
};

inline constexpr double kSymmetryTol = 1e-12;

namespace detail {

inline double smallest_eigenvalue(const Matrix& m) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

// Eigenvalues computed for a matrix with entries O(|m|) carry an absolute
// error of a few ulps of |m|; the floor comparison allows for that.
inline double eigen_slack(const Matrix& m) {
    return 64.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, m.cwiseAbs().maxCoeff());
}

inline void check_spd(const Matrix& m, double lambda_floor, const char* what) {
    if (m.rows() != m.cols() || m.rows() == 0) {
        throw DomainError(std::string(what) + ": covariance must be square and non-empty");
    }
    if (!m.allFinite()) {
        throw DomainError(std::string(what) + ": covariance has non-finite entries");
    }
    if ((m - m.transpose()).cwiseAbs().maxCoeff() > kSymmetryTol) {
        throw DomainError(std::string(what) + ": covariance is not symmetric");
    }
    const double ev = smallest_eigenvalue(m);
    if (ev < lambda_floor - eigen_slack(m)) {
        std::ostringstream os;
        os.precision(17);
        os << what << ": covariance is not positive definite above the floor (smallest eigenvalue "
           << ev << " < " << lambda_floor << ")";
        throw DomainError(os.str());
    }
}

}  // namespace detail

/// Clip the spectrum of a symmetric matrix from below. Returns the input
/// unchanged (bit for bit) when no eigenvalue is below the floor.
inline Matrix floor_eigenvalues(const Matrix& m, double floor) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(m);
    if (es.eigenvalues().minCoeff() >= floor) return m;
    const Vector clipped = es.eigenvalues().cwiseMax(floor);
    Matrix out = es.eigenvectors() * clipped.asDiagonal() * es.eigenvectors().transpose();
    return 0.5 * (out + out.transpose());
}

/// One GMoE atom. Plain value; validate() enforces the invariants.
struct Component {
    Vector c;      ///< gating location
    Matrix gamma;  ///< gating covariance
    Vector a;      ///< expert slope
    double b = 0;  ///< expert intercept
    double nu = 1; ///< expert variance

    std::size_t dim() const noexcept { return static_cast<std::size_t>(c.size()); }

    void validate(const Floors& floors = {}) const {
        const auto d = c.size();
        if (d == 0) throw DomainError("component: dimension must be at least 1");
        if (gamma.rows() != d || gamma.cols() != d || a.size() != d) {
            throw DomainError("component: c, gamma and a disagree on dimension");
        }
        if (!c.allFinite() || !a.allFinite() || !std::isfinite(b) || !std::isfinite(nu)) {
            throw DomainError("component: non-finite parameter");
        }
        detail::check_spd(gamma, floors.lambda, "component gamma");
        if (nu < floors.nu) {
            std::ostringstream os;
            os.precision(17);
            os << "component: nu " << nu << " below floor " << floors.nu;
            throw DomainError(os.str());
        }
    }

    friend bool operator==(const Component& l, const Component& r) {
        return l.c.size() == r.c.size() && l.c == r.c && l.gamma == r.gamma && l.a == r.a &&
               l.b == r.b && l.nu == r.nu;
    }
};

/// Scalar convenience constructor for d = 1.
inline Component scalar_component(double c, double gamma, double a, double b, double nu) {
    Component comp;
    comp.c = Vector::Constant(1, c);
    comp.gamma = Matrix::Constant(1, 1, gamma);
    comp.a = Vector::Constant(1, a);
    comp.b = b;
    comp.nu = nu;
    return comp;
}

/// (c, row-major vec(Gamma), a, b, nu) stacked into one vector.
inline Vector stack_parameters(const Component& comp) {
    const auto d = comp.c.size();
    Vector out(d + d * d + d + 2);
    out.head(d) = comp.c;
    for (Eigen::Index r = 0; r < d; ++r) {
        for (Eigen::Index col = 0; col < d; ++col) out(d + r * d + col) = comp.gamma(r, col);
    }
    out.segment(d + d * d, d) = comp.a;
    out(d + d * d + d) = comp.b;
    out(d + d * d + d + 1) = comp.nu;
    return out;
}

/// Discrete measure sum_i weight_i * delta_{theta_i}. Immutable after
/// construction; the constructor checks every invariant.
class MixingMeasure {
public:
    MixingMeasure(std::vector<double> weights, std::vector<Component> components,
                  const Floors& floors = {}, bool constrained = false)
        : weights_(std::move(weights)), components_(std::move(components)) {
        if (components_.empty()) throw DomainError("mixing measure: no atoms");
        if (weights_.size() != components_.size()) {
            throw DomainError("mixing measure: weight count differs from atom count");
        }
        dim_ = components_.front().dim();
        double total = 0.0;
        for (std::size_t i = 0; i < components_.size(); ++i) {
            if (components_[i].dim() != dim_) {
                throw DomainError("mixing measure: atoms disagree on dimension");
            }
            components_[i].validate(floors);
            if (!(weights_[i] > 0.0) || !std::isfinite(weights_[i])) {
                throw DomainError("mixing measure: weights must be positive");
            }
            if (constrained && weights_[i] < floors.beta) {
                throw DomainError("mixing measure: weight below beta floor in constrained mode");
            }
            total += weights_[i];
        }
        if (std::abs(total - 1.0) > 1e-12) {
            std::ostringstream os;
            os.precision(17);
            os << "mixing measure: weights sum to " << total << ", expected 1";
            throw DomainError(os.str());
        }
    }

    std::size_t dim() const noexcept { return dim_; }
    std::size_t size() const noexcept { return components_.size(); }
    const std::vector<double>& weights() const noexcept { return weights_; }
    const std::vector<Component>& components() const noexcept { return components_; }
    double weight(std::size_t i) const { return weights_.at(i); }
    const Component& component(std::size_t i) const { return components_.at(i); }

    /// Same atoms in the order given by `order` (a permutation of 0..k-1).
    MixingMeasure permuted(const std::vector<std::size_t>& order) const {
        if (order.size() != size()) throw DomainError("permuted: order has wrong length");
        std::vector<double> w;
        std::vector<Component> c;
        for (auto i : order) {
            w.push_back(weights_.at(i));
            c.push_back(components_.at(i));
        }
        return MixingMeasure(std::move(w), std::move(c));
    }

    friend bool operator==(const MixingMeasure& l, const MixingMeasure& r) {
        return l.dim_ == r.dim_ && l.weights_ == r.weights_ && l.components_ == r.components_;
    }

private:
    std::vector<double> weights_;
    std::vector<Component> components_;
    std::size_t dim_ = 0;
};

/// Joint law of (X, Y) for a single atom.
struct JointGaussian {
    Vector psi;    ///< mean, length d+1
    Matrix sigma;  ///< covariance, (d+1) x (d+1)

    void validate(const Floors& floors = {}) const {
        if (psi.size() < 2 || sigma.rows() != psi.size()) {
            throw DomainError("joint gaussian: inconsistent dimensions");
        }
        detail::check_spd(sigma, floors.lambda, "joint gaussian sigma");
    }
};

inline double log_sum_exp(const double* values, std::size_t count) {
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < count; ++i) hi = std::max(hi, values[i]);
    if (!std::isfinite(hi)) return hi;
    double acc = 0.0;
    for (std::size_t i = 0; i < count; ++i) acc += std::exp(values[i] - hi);
    return hi + std::log(acc);
}

inline double log_sum_exp(const std::vector<double>& values) {
    return log_sum_exp(values.data(), values.size());
}

/// log N(x | mean, cov) through a Cholesky factorization.
inline double gaussian_log_pdf(const Vector& x, const Vector& mean, const Matrix& cov,
                               double lambda_floor = Floors{}.lambda) {
    if (x.size() != mean.size() || cov.rows() != x.size()) {
        throw DomainError("gaussian_log_pdf: dimension mismatch");
    }
    detail::check_spd(cov, lambda_floor, "gaussian_log_pdf");
    Eigen::LLT<Matrix> llt(cov);
    if (llt.info() != Eigen::Success) {
        std::ostringstream os;
        os.precision(17);
        os << "gaussian_log_pdf: factorization failed (smallest eigenvalue "
           << detail::smallest_eigenvalue(cov) << ")";
        throw DomainError(os.str());
    }
    const Vector z = llt.matrixL().solve(x - mean);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    return -0.5 * (static_cast<double>(x.size()) * kLog2Pi + log_det + z.squaredNorm());
}

/// Per-atom factorizations of a measure, reused across many density
/// evaluations (E-steps, grids).
class PreparedMeasure {
public:
    explicit PreparedMeasure(const MixingMeasure& g) : dim_(g.dim()) {
        atoms_.reserve(g.size());
        for (std::size_t i = 0; i < g.size(); ++i) {
            const auto& comp = g.component(i);
            Atom at;
            at.log_weight = std::log(g.weight(i));
            at.c = comp.c;
            at.chol = Eigen::LLT<Matrix>(comp.gamma);
            if (at.chol.info() != Eigen::Success) {
                throw DomainError("prepared measure: gating covariance factorization failed");
            }
            const double log_det = 2.0 * at.chol.matrixLLT().diagonal().array().log().sum();
            at.gate_const = -0.5 * (static_cast<double>(dim_) * kLog2Pi + log_det);
            at.a = comp.a;
            at.b = comp.b;
            at.inv_nu = 1.0 / comp.nu;
            at.expert_const = -0.5 * (kLog2Pi + std::log(comp.nu));
            atoms_.push_back(std::move(at));
        }
    }

    std::size_t size() const noexcept { return atoms_.size(); }
    std::size_t dim() const noexcept { return dim_; }

    /// log pi_i + log f_L(x | c_i, Gamma_i) + log f_D(y | a_i^T x + b_i, nu_i)
    template <typename Derived>
    double log_weighted_term(std::size_t i, const Eigen::MatrixBase<Derived>& x, double y) const {
        const Atom& at = atoms_[i];
        double quad;
        if (dim_ == 1) {
            const double diff = x(0) - at.c(0);
            const double l = at.chol.matrixLLT()(0, 0);
            quad = (diff / l) * (diff / l);
        } else {
            quad = at.chol.matrixL().solve(Vector(x - at.c)).squaredNorm();
        }
        const double resid = y - at.a.dot(x) - at.b;
        return at.log_weight + at.gate_const - 0.5 * quad + at.expert_const -
               0.5 * resid * resid * at.inv_nu;
    }

    template <typename Derived>
    double log_density(const Eigen::MatrixBase<Derived>& x, double y) const {
        double terms[16];
        std::vector<double> heap;
        double* buf = terms;
        if (atoms_.size() > 16) {
            heap.resize(atoms_.size());
            buf = heap.data();
        }
        for (std::size_t i = 0; i < atoms_.size(); ++i) buf[i] = log_weighted_term(i, x, y);
        return log_sum_exp(buf, atoms_.size());
    }

private:
    struct Atom {
        double log_weight = 0;
        Vector c;
        Eigen::LLT<Matrix> chol;
        double gate_const = 0;
        Vector a;
        double b = 0;
        double inv_nu = 1;
        double expert_const = 0;
    };
    std::vector<Atom> atoms_;
    std::size_t dim_;
};

/// log p_G(x, y) = log sum_j pi_j f_L(x | c_j, Gamma_j) f_D(y | a_j^T x + b_j, nu_j)
inline double log_joint_density(const MixingMeasure& g, const Vector& x, double y) {
    if (static_cast<std::size_t>(x.size()) != g.dim()) {
        throw DomainError("log_joint_density: x has the wrong dimension");
    }
    return PreparedMeasure(g).log_density(x, y);
}

/// psi = (c, a^T c + b),  Sigma = [[Gamma, Gamma a], [a^T Gamma, a^T Gamma a + nu]]
inline JointGaussian to_joint_gaussian(const Component& comp) {
    const auto d = comp.c.size();
    JointGaussian jg;
    jg.psi.resize(d + 1);
    jg.psi.head(d) = comp.c;
    jg.psi(d) = comp.a.dot(comp.c) + comp.b;
    const Vector gamma_a = comp.gamma * comp.a;
    jg.sigma.resize(d + 1, d + 1);
    jg.sigma.topLeftCorner(d, d) = comp.gamma;
    jg.sigma.topRightCorner(d, 1) = gamma_a;
    jg.sigma.bottomLeftCorner(1, d) = gamma_a.transpose();
    jg.sigma(d, d) = comp.a.dot(gamma_a) + comp.nu;
    return jg;
}

struct JointConversion {
    Component component;
    bool nu_clipped = false;  ///< Schur complement fell below the nu floor
};

/// Inverse of to_joint_gaussian: Gamma = S_xx, a = S_xx^{-1} S_xy,
/// nu = S_yy - S_yx a, c = psi_x, b = psi_y - a^T c.
inline JointConversion from_joint_gaussian(const JointGaussian& jg, const Floors& floors = {}) {
    if (jg.psi.size() < 2 || jg.sigma.rows() != jg.psi.size() || jg.sigma.cols() != jg.psi.size()) {
        throw DomainError("from_joint_gaussian: inconsistent dimensions");
    }
    const auto d = jg.psi.size() - 1;
    JointConversion out;
    Component& comp = out.component;
    comp.gamma = jg.sigma.topLeftCorner(d, d);
    comp.gamma = 0.5 * (comp.gamma + comp.gamma.transpose()).eval();
    Eigen::LLT<Matrix> llt(comp.gamma);
    if (llt.info() != Eigen::Success) {
        throw DomainError("from_joint_gaussian: Sigma_xx is not positive definite");
    }
    const Vector sxy = jg.sigma.topRightCorner(d, 1);
    comp.a = llt.solve(sxy);
    comp.nu = jg.sigma(d, d) - sxy.dot(comp.a);
    if (comp.nu < floors.nu) {
        comp.nu = floors.nu;
        out.nu_clipped = true;
    }
    comp.c = jg.psi.head(d);
    comp.b = jg.psi(d) - comp.a.dot(comp.c);
    comp.validate(floors);
    return out;
}

}  // namespace gmoe
