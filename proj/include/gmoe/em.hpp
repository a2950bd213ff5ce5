#pragma once

// Maximum likelihood for the GMoE model by EM.
//
// Each atom is handled through its joint (d+1)-variate Gaussian
// (to_joint_gaussian / from_joint_gaussian), so the M-step is the closed
// form weighted mean and covariance of z_i = (x_i, y_i). The covariance
// spectrum is clipped at lambda_floor before mapping back; clipping the
// eigenvalues of the weighted scatter matrix is the exact constrained
// maximizer, so the log-likelihood stays monotone.

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "gmoe/model.hpp"
#include "gmoe/rng.hpp"
#include "gmoe/sampler.hpp"

namespace gmoe {

struct EmSettings {
    double epsilon = 1e-5;  ///< relative log-likelihood change that stops EM
    int max_iter = 2000;
    double lambda_floor = 1e-8;
    double nu_floor = 1e-8;
    double beta_floor = 0.0;  ///< reported only, never enforced

    Floors floors() const { return Floors{lambda_floor, nu_floor, beta_floor}; }

    void validate() const {
        if (!(epsilon > 0.0)) throw DomainError("em settings: epsilon must be positive");
        if (max_iter < 1) throw DomainError("em settings: max_iter must be at least 1");
        if (!(lambda_floor > 0.0) || !(nu_floor > 0.0) || beta_floor < 0.0) {
            throw DomainError("em settings: floors must be positive");
        }
    }
};

struct FitResult {
    MixingMeasure g_hat;
    std::vector<double> loglik_trace;  ///< trace[0] is the initial value
    int iterations = 0;
    bool converged = false;
    bool nu_clipped = false;             ///< some M-step clipped nu at the floor
    std::size_t below_beta_floor = 0;    ///< final weights under beta_floor
};

struct EStepResult {
    Matrix responsibilities;  ///< n x k, rows sum to one
    double loglik = 0.0;
};

/// Random favourable start: fitted indices are split into k0 nonempty
/// groups, group t holding copies of true atom t perturbed by N(0, sd^2)
/// noise on every coordinate, with weight pi_t / |group t|. The noise on
/// Gamma and nu is truncated to keep them above half their true values.
///
/// Atoms come out grouped by their generating true atom (group 0 first), so
/// k == k0 with sd == 0 returns g0 itself.
inline MixingMeasure init_favourable(const MixingMeasure& g0, std::size_t k, std::uint64_t seed,
                                     double perturb_sd, const Floors& floors = {}) {
    const std::size_t k0 = g0.size();
    if (k < k0) throw DomainError("init_favourable: k is smaller than the number of true atoms");
    if (perturb_sd < 0.0) throw DomainError("init_favourable: perturb_sd must be nonnegative");

    Rng rng(seed);
    // Random map [k] -> [k0]: the first k0 shuffled indices pin one per
    // group, the rest fall uniformly.
    std::vector<std::size_t> sizes(k0, 1);
    std::uniform_int_distribution<std::size_t> group(0, k0 - 1);
    for (std::size_t extra = k0; extra < k; ++extra) ++sizes[group(rng)];

    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<double> weights;
    std::vector<Component> comps;
    const auto d = static_cast<Eigen::Index>(g0.dim());
    for (std::size_t t = 0; t < k0; ++t) {
        const auto& truth = g0.component(t);
        for (std::size_t rep = 0; rep < sizes[t]; ++rep) {
            weights.push_back(g0.weight(t) / static_cast<double>(sizes[t]));
            Component comp = truth;
            if (perturb_sd > 0.0) {
                for (Eigen::Index i = 0; i < d; ++i) comp.c(i) += perturb_sd * normal(rng);
                // Scale parameters are redrawn until they keep at least half
                // of their true size; a start on the floor is a collapsed
                // component.
                const double gamma_min = 0.5 * detail::smallest_eigenvalue(truth.gamma);
                Matrix noise(d, d);
                for (int attempt = 0;; ++attempt) {
                    for (Eigen::Index i = 0; i < d; ++i) {
                        for (Eigen::Index j = 0; j < d; ++j) noise(i, j) = normal(rng);
                    }
                    comp.gamma = truth.gamma + perturb_sd * 0.5 * (noise + noise.transpose());
                    if (detail::smallest_eigenvalue(comp.gamma) >= gamma_min || attempt == 1000) break;
                }
                comp.gamma = floor_eigenvalues(comp.gamma, std::max(floors.lambda, gamma_min));
                for (Eigen::Index i = 0; i < d; ++i) comp.a(i) += perturb_sd * normal(rng);
                comp.b += perturb_sd * normal(rng);
                for (int attempt = 0;; ++attempt) {
                    comp.nu = truth.nu + perturb_sd * normal(rng);
                    if (comp.nu >= 0.5 * truth.nu || attempt == 1000) break;
                }
                comp.nu = std::max({comp.nu, 0.5 * truth.nu, floors.nu});
            }
            comps.push_back(std::move(comp));
        }
    }
    // per-group weights sum to pi_t; renormalize away the rounding
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    if (std::abs(total - 1.0) > 1e-13) {
        for (auto& w : weights) w /= total;
    }
    return MixingMeasure(std::move(weights), std::move(comps), floors);
}

/// Posterior probabilities of the latent atom and the data log-likelihood.
inline EStepResult e_step(const MixingMeasure& g, const Dataset& data) {
    data.validate();
    if (data.dim() != g.dim()) throw DomainError("e_step: data and measure dimensions differ");
    const PreparedMeasure prepared(g);
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto k = static_cast<Eigen::Index>(g.size());
    EStepResult out;
    out.responsibilities.resize(n, k);
    std::vector<double> terms(static_cast<std::size_t>(k));
    double loglik = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
        const auto xi = data.x.row(i).transpose();
        for (Eigen::Index l = 0; l < k; ++l) {
            terms[static_cast<std::size_t>(l)] = prepared.log_weighted_term(static_cast<std::size_t>(l), xi, data.y(i));
        }
        const double lse = log_sum_exp(terms);
        double row_sum = 0.0;
        for (Eigen::Index l = 0; l < k; ++l) {
            const double r = std::exp(terms[static_cast<std::size_t>(l)] - lse);
            out.responsibilities(i, l) = r;
            row_sum += r;
        }
        out.responsibilities.row(i) /= row_sum;
        loglik += lse;
    }
    out.loglik = loglik;
    return out;
}

struct MStepResult {
    MixingMeasure g;
    bool nu_clipped = false;
};

namespace detail {

inline MStepResult m_step_impl(const Matrix& resp, const Dataset& data, const EmSettings& settings,
                               int iteration) {
    data.validate();
    const auto n = static_cast<Eigen::Index>(data.size());
    const auto k = resp.cols();
    const auto d = static_cast<Eigen::Index>(data.dim());
    if (resp.rows() != n || k == 0) throw DomainError("m_step: responsibilities have the wrong shape");
    const Floors floors = settings.floors();

    const double mass_floor = 10.0 * std::numeric_limits<double>::epsilon() * static_cast<double>(n);
    std::vector<double> weights;
    std::vector<Component> comps;
    bool clipped = false;
    Matrix z(n, d + 1);
    z.leftCols(d) = data.x;
    z.col(d) = data.y;

    for (Eigen::Index l = 0; l < k; ++l) {
        const auto r = resp.col(l);
        const double mass = r.sum();
        if (!(mass >= mass_floor)) {
            throw DegenerateComponentError(static_cast<std::size_t>(l), iteration,
                                           "m_step: component " + std::to_string(l) +
                                               " has vanishing responsibility" +
                                               (iteration >= 0 ? " at iteration " + std::to_string(iteration) : ""));
        }
        JointGaussian jg;
        jg.psi = (z.transpose() * r) / mass;
        const Matrix centred = z.rowwise() - jg.psi.transpose();
        jg.sigma = (centred.transpose() * r.asDiagonal() * centred) / mass;
        jg.sigma = 0.5 * (jg.sigma + jg.sigma.transpose()).eval();
        jg.sigma = floor_eigenvalues(jg.sigma, floors.lambda);
        auto conv = from_joint_gaussian(jg, floors);
        clipped = clipped || conv.nu_clipped;
        weights.push_back(mass / static_cast<double>(n));
        comps.push_back(std::move(conv.component));
    }
    const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
    for (auto& w : weights) w /= total;
    return {MixingMeasure(std::move(weights), std::move(comps), floors), clipped};
}

}  // namespace detail

/// Weighted joint-Gaussian MLE per component, mapped back to GMoE atoms.
inline MStepResult m_step(const Matrix& resp, const Dataset& data, const EmSettings& settings = {}) {
    return detail::m_step_impl(resp, data, settings, -1);
}

/// Alternate E and M steps from `init` until the relative log-likelihood
/// change drops below epsilon, or max_iter M-steps have run.
inline FitResult fit(const Dataset& data, std::size_t k, const MixingMeasure& init,
                     const EmSettings& settings = {}) {
    settings.validate();
    if (init.size() != k) throw DomainError("fit: init must have k atoms");
    if (data.size() == 0) throw DomainError("fit: empty dataset");

    MixingMeasure current = init;
    EStepResult est = e_step(current, data);
    std::vector<double> trace{est.loglik};
    bool clipped = false;
    bool converged = false;
    int iter = 0;
    while (iter < settings.max_iter) {
        ++iter;
        auto ms = detail::m_step_impl(est.responsibilities, data, settings, iter);
        clipped = clipped || ms.nu_clipped;
        current = std::move(ms.g);
        const double previous = est.loglik;
        est = e_step(current, data);
        trace.push_back(est.loglik);
        if (std::abs(est.loglik - previous) / (std::abs(est.loglik) + 1.0) < settings.epsilon) {
            converged = iter < settings.max_iter;
            break;
        }
    }
    FitResult out{std::move(current), std::move(trace), iter, converged, clipped, 0};
    for (double w : out.g_hat.weights()) out.below_beta_floor += w < settings.beta_floor;
    return out;
}

inline Json fit_result_to_json(const FitResult& fr) {
    Json j;
    j["measure"] = measure_to_json(fr.g_hat);
    Json trace = Json::array();
    for (double v : fr.loglik_trace) trace.push_back(v);
    j["loglik_trace"] = std::move(trace);
    j["iterations"] = fr.iterations;
    j["converged"] = fr.converged;
    j["nu_clipped"] = fr.nu_clipped;
    j["below_beta_floor"] = fr.below_beta_floor;
    return j;
}

}  // namespace gmoe
