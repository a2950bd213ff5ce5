#pragma once

// Simulation harness: sample-size sweeps with replications, Voronoi-loss
// aggregation, log-log rate regression and total-variation checks.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <exception>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "gmoe/em.hpp"
#include "gmoe/model.hpp"
#include "gmoe/presets.hpp"
#include "gmoe/rng.hpp"
#include "gmoe/sampler.hpp"
#include "gmoe/voronoi.hpp"

namespace gmoe {

enum class LossKind { DBAR, DTILDE, AUTO };

inline std::string to_string(LossKind k) {
    switch (k) {
        case LossKind::DBAR: return "dbar";
        case LossKind::DTILDE: return "dtilde";
        default: return "auto";
    }
}

inline LossKind loss_kind_from_string(const std::string& s) {
    if (s == "dbar") return LossKind::DBAR;
    if (s == "dtilde") return LossKind::DTILDE;
    if (s == "auto") return LossKind::AUTO;
    throw DomainError("unknown loss '" + s + "' (expected dbar, dtilde or auto)");
}

/// AUTO picks Dbar for Type I truths and Dtilde for Type II.
inline LossKind resolve_loss(LossKind requested, const SettingClass& setting) {
    if (requested != LossKind::AUTO) return requested;
    return setting.kind == SettingKind::TypeI ? LossKind::DBAR : LossKind::DTILDE;
}

inline double evaluate_loss(LossKind kind, const MixingMeasure& g, const MixingMeasure& g0,
                            const SettingClass& setting, const OrderTable& orders = {}) {
    switch (resolve_loss(kind, setting)) {
        case LossKind::DTILDE: return loss_dtilde(g, g0, setting, orders);
        default: return loss_dbar(g, g0, orders);
    }
}

/// `count` log-spaced integers in [lo, hi], rounded, strictly increasing.
inline std::vector<std::size_t> log_spaced_grid(double lo, double hi, std::size_t count) {
    if (!(lo > 0.0) || !(hi >= lo) || count == 0) throw DomainError("log_spaced_grid: bad range");
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < count; ++i) {
        const double t = count == 1 ? 0.0 : static_cast<double>(i) / static_cast<double>(count - 1);
        const auto n = static_cast<std::size_t>(std::llround(std::exp(std::log(lo) + t * (std::log(hi) - std::log(lo)))));
        if (out.empty() || n > out.back()) out.push_back(n);
    }
    return out;
}

struct ExperimentConfig {
    std::optional<ModelId> model;         ///< preset, or
    std::optional<MixingMeasure> measure; ///< an inline true measure
    std::size_t k = 4;
    std::vector<std::size_t> n_grid = log_spaced_grid(1e2, 1e5, 100);
    int reps = 20;
    std::uint64_t base_seed = 0;
    EmSettings em;
    LossKind loss = LossKind::AUTO;
    double perturb_sd = 0.01;
    double zero_tol = 0.0;
    OrderTable orders;
    unsigned threads = 1;

    MixingMeasure truth() const {
        if (measure) return *measure;
        if (model) return model_preset(*model);
        throw DomainError("experiment config: neither model nor measure given");
    }

    std::string model_label() const { return model ? to_string(*model) : "inline"; }
    std::uint64_t model_number() const { return model ? static_cast<std::uint64_t>(*model) : 0; }

    void validate() const {
        const auto g0 = truth();
        if (n_grid.empty()) throw DomainError("experiment config: empty n_grid");
        for (std::size_t i = 0; i < n_grid.size(); ++i) {
            if (n_grid[i] == 0 || (i > 0 && n_grid[i] <= n_grid[i - 1])) {
                throw DomainError("experiment config: n_grid must be positive and strictly increasing");
            }
        }
        if (reps < 1) throw DomainError("experiment config: reps must be at least 1");
        if (k < g0.size()) throw DomainError("experiment config: k is below the true number of atoms");
        em.validate();
    }
};

/// Desk profile: 20 log-spaced sizes in [1e2, 1e4], 10 replications.
inline ExperimentConfig desk_profile(ModelId id, std::size_t k) {
    ExperimentConfig cfg;
    cfg.model = id;
    cfg.k = k;
    cfg.n_grid = log_spaced_grid(1e2, 1e4, 20);
    cfg.reps = 10;
    return cfg;
}

/// Full profile: 100 log-spaced sizes in [1e2, 1e5], 20 replications.
inline ExperimentConfig paper_profile(ModelId id, std::size_t k) {
    ExperimentConfig cfg;
    cfg.model = id;
    cfg.k = k;
    cfg.n_grid = log_spaced_grid(1e2, 1e5, 100);
    cfg.reps = 20;
    return cfg;
}

struct SweepRow {
    std::string model;
    std::size_t k = 0;
    std::size_t n = 0;
    int rep = 0;
    std::uint64_t seed = 0;
    std::string loss_name;
    double loss = std::nan("");
    double loglik = std::nan("");
    int iters = 0;
    bool converged = false;
    std::size_t max_cell = 0;
    std::vector<std::size_t> cell_sizes;
    bool excluded = false;
    std::string exclusion_reason;  ///< "cell_order" or "em_degenerate"
};

struct SummaryRow {
    std::size_t n = 0;
    double mean_loss = std::nan("");
    double stderr_loss = std::nan("");
    std::size_t count = 0;
};

struct SweepResult {
    std::vector<SweepRow> rows;  ///< (n-index, rep) order
    std::size_t excluded_cell_order = 0;
    std::size_t excluded_em = 0;
    std::size_t not_converged = 0;

    /// Arithmetic mean and standard error over the non-excluded rows at
    /// each n. Non-converged fits are included.
    std::vector<SummaryRow> summary() const {
        std::map<std::size_t, std::vector<double>> by_n;
        for (const auto& row : rows) {
            auto& bucket = by_n[row.n];
            if (!row.excluded && std::isfinite(row.loss)) bucket.push_back(row.loss);
        }
        std::vector<SummaryRow> out;
        for (auto& [n, values] : by_n) {
            std::sort(values.begin(), values.end());
            SummaryRow s;
            s.n = n;
            s.count = values.size();
            if (!values.empty()) {
                double sum = 0.0;
                for (double v : values) sum += v;
                s.mean_loss = sum / static_cast<double>(values.size());
                if (values.size() > 1) {
                    double ss = 0.0;
                    for (double v : values) ss += (v - s.mean_loss) * (v - s.mean_loss);
                    s.stderr_loss = std::sqrt(ss / static_cast<double>(values.size() - 1) /
                                              static_cast<double>(values.size()));
                } else {
                    s.stderr_loss = 0.0;
                }
            }
            out.push_back(s);
        }
        return out;
    }
};

/// Run `count` independent jobs on a pool of `threads` workers. Job i must
/// only write to slot i of its output. Exceptions are rethrown after join,
/// lowest job index first.
template <typename Job>
void parallel_for_jobs(std::size_t count, unsigned threads, Job&& job) {
    threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(std::max<std::size_t>(count, 1))));
    std::vector<std::exception_ptr> errors(count);
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < count; i = next++) {
            try {
                job(i);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
}

/// One replication: sample, favourable init, EM, Voronoi loss.
inline SweepRow run_replication(const ExperimentConfig& cfg, const MixingMeasure& g0, const SettingClass& setting,
                                std::size_t n_index, int rep) {
    SweepRow row;
    row.model = cfg.model_label();
    row.k = cfg.k;
    row.n = cfg.n_grid[n_index];
    row.rep = rep;
    row.seed = derive_seed(cfg.base_seed, cfg.model_number(), n_index, static_cast<std::uint64_t>(rep));
    row.loss_name = to_string(resolve_loss(cfg.loss, setting));

    const Dataset data = sample(g0, row.n, substream(row.seed, 1), row.model);
    const MixingMeasure init = init_favourable(g0, cfg.k, substream(row.seed, 2), cfg.perturb_sd, cfg.em.floors());
    FitResult fr = [&]() -> FitResult {
        try {
            return fit(data, cfg.k, init, cfg.em);
        } catch (const DegenerateComponentError&) {
            return FitResult{init, {}, -1, false, false, 0};
        }
    }();
    if (fr.iterations < 0) {
        row.excluded = true;
        row.exclusion_reason = "em_degenerate";
        return row;
    }
    row.loglik = fr.loglik_trace.back();
    row.iters = fr.iterations;
    row.converged = fr.converged;
    const auto cells = assign_cells(fr.g_hat, g0);
    row.cell_sizes = cells.cell_sizes();
    row.max_cell = cells.max_cell();
    try {
        row.loss = evaluate_loss(cfg.loss, fr.g_hat, g0, setting, cfg.orders);
    } catch (const UnsupportedOrderError&) {
        row.excluded = true;
        row.exclusion_reason = "cell_order";
    }
    return row;
}

/// Every (n, rep) pair as an independent job; rows come back in
/// (n-index, rep) order whatever the thread count.
inline SweepResult run_sweep(const ExperimentConfig& cfg) {
    cfg.validate();
    const MixingMeasure g0 = cfg.truth();
    const SettingClass setting = classify_setting(g0, cfg.zero_tol);
    const std::size_t reps = static_cast<std::size_t>(cfg.reps);
    const std::size_t jobs = cfg.n_grid.size() * reps;

    std::vector<std::optional<SweepRow>> slots(jobs);
    parallel_for_jobs(jobs, cfg.threads, [&](std::size_t i) {
        slots[i] = run_replication(cfg, g0, setting, i / reps, static_cast<int>(i % reps));
    });

    SweepResult out;
    out.rows.reserve(jobs);
    for (auto& s : slots) {
        out.rows.push_back(std::move(*s));
        const auto& row = out.rows.back();
        if (row.exclusion_reason == "cell_order") ++out.excluded_cell_order;
        if (row.exclusion_reason == "em_degenerate") ++out.excluded_em;
        if (!row.excluded && !row.converged) ++out.not_converged;
    }
    return out;
}

struct RateFit {
    double slope = 0.0;
    double intercept = 0.0;
    double r_squared = 0.0;
    std::size_t points = 0;
};

/// Ordinary least squares of log(value) on log(n) over the pairs where
/// both are finite and positive.
inline RateFit fit_rate(const std::vector<double>& n, const std::vector<double>& value) {
    if (n.size() != value.size()) throw DomainError("fit_rate: length mismatch");
    std::vector<std::pair<double, double>> pts;
    for (std::size_t i = 0; i < n.size(); ++i) {
        if (n[i] > 0 && value[i] > 0 && std::isfinite(n[i]) && std::isfinite(value[i])) {
            pts.emplace_back(std::log(n[i]), std::log(value[i]));
        }
    }
    std::sort(pts.begin(), pts.end());
    std::size_t distinct = 0;
    for (std::size_t i = 0; i < pts.size(); ++i) distinct += (i == 0 || pts[i].first != pts[i - 1].first);
    if (distinct < 3) throw DomainError("fit_rate: need at least 3 distinct n with positive values");

    const double count = static_cast<double>(pts.size());
    double mx = 0.0, my = 0.0;
    for (const auto& [x, y] : pts) {
        mx += x;
        my += y;
    }
    mx /= count;
    my /= count;
    double sxx = 0.0, sxy = 0.0, syy = 0.0;
    for (const auto& [x, y] : pts) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    if (!(sxx > 0.0)) throw DomainError("fit_rate: degenerate design");
    RateFit out;
    out.slope = sxy / sxx;
    out.intercept = my - out.slope * mx;
    double ss_res = 0.0;
    for (const auto& [x, y] : pts) {
        const double e = y - out.intercept - out.slope * x;
        ss_res += e * e;
    }
    out.r_squared = syy > 0.0 ? 1.0 - ss_res / syy : 1.0;
    out.points = pts.size();
    return out;
}

inline RateFit fit_rate(const std::vector<SummaryRow>& summary) {
    std::vector<double> n, v;
    for (const auto& s : summary) {
        n.push_back(static_cast<double>(s.n));
        v.push_back(s.mean_loss);
    }
    return fit_rate(n, v);
}

inline RateFit fit_rate(const SweepResult& sweep) { return fit_rate(sweep.summary()); }

enum class TvMethod { GRID, MC };

struct TvEstimate {
    double value = 0.0;
    double stderr_value = 0.0;  ///< zero for GRID
};

/// Total variation distance between the joint densities of two measures.
///
/// GRID (d = 1): midpoint rule with `budget` cells per axis over a box
/// that holds every atom's (X, Y) law out to 6 standard deviations per
/// axis, i.e. at least 1 - 1e-6 of both densities' mass.
/// MC: (1/2) E_{p1} |1 - p2/p1| from `budget` draws of G1.
inline TvEstimate tv_distance(const MixingMeasure& g1, const MixingMeasure& g2, TvMethod method,
                              std::size_t budget, std::uint64_t seed = 0) {
    if (g1.dim() != g2.dim()) throw DomainError("tv_distance: dimension mismatch");
    if (budget < 2) throw DomainError("tv_distance: budget too small");
    const PreparedMeasure p1(g1), p2(g2);
    if (method == TvMethod::GRID) {
        if (g1.dim() != 1) throw DomainError("tv_distance: GRID method supports d = 1 only");
        constexpr double z = 6.0;
        double x_lo = INFINITY, x_hi = -INFINITY, y_lo = INFINITY, y_hi = -INFINITY;
        for (const auto* g : {&g1, &g2}) {
            for (const auto& comp : g->components()) {
                const double sx = std::sqrt(comp.gamma(0, 0));
                const double my = comp.a(0) * comp.c(0) + comp.b;
                const double sy = std::sqrt(comp.a(0) * comp.a(0) * comp.gamma(0, 0) + comp.nu);
                x_lo = std::min(x_lo, comp.c(0) - z * sx);
                x_hi = std::max(x_hi, comp.c(0) + z * sx);
                y_lo = std::min(y_lo, my - z * sy);
                y_hi = std::max(y_hi, my + z * sy);
            }
        }
        const double hx = (x_hi - x_lo) / static_cast<double>(budget);
        const double hy = (y_hi - y_lo) / static_cast<double>(budget);
        double total = 0.0;
        Vector x(1);
        for (std::size_t i = 0; i < budget; ++i) {
            x(0) = x_lo + (static_cast<double>(i) + 0.5) * hx;
            double column = 0.0;
            for (std::size_t j = 0; j < budget; ++j) {
                const double y = y_lo + (static_cast<double>(j) + 0.5) * hy;
                column += std::abs(std::exp(p1.log_density(x, y)) - std::exp(p2.log_density(x, y)));
            }
            total += column;
        }
        return {0.5 * total * hx * hy, 0.0};
    }
    const Dataset draws = sample(g1, budget, seed);
    double sum = 0.0, sum_sq = 0.0;
    for (Eigen::Index i = 0; i < draws.y.size(); ++i) {
        const auto xi = draws.x.row(i).transpose();
        const double v = std::abs(1.0 - std::exp(p2.log_density(xi, draws.y(i)) - p1.log_density(xi, draws.y(i))));
        sum += v;
        sum_sq += v * v;
    }
    const double n = static_cast<double>(budget);
    const double mean = sum / n;
    const double var = std::max(0.0, (sum_sq - n * mean * mean) / (n - 1.0));
    return {0.5 * mean, 0.5 * std::sqrt(var / n)};
}

}  // namespace gmoe
