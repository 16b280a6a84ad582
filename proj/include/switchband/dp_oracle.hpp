// Brute-force backward induction for the exact optimal switching policy of
// a driftless Gaussian walk of the tracking error e = x_hat - theta on a
// truncated symmetric grid, with running cost Gamma e^2 dt per step and a
// fixed cost lambda per reset to e = 0. Used to check the asymptotic band.
#pragma once

#include <cmath>
#include <limits>
#include <span>
#include <sstream>
#include <vector>

#include "switchband/errors.hpp"
#include "switchband/linalg.hpp"
#include "switchband/normal.hpp"
#include "switchband/policy.hpp"

namespace switchband {

struct DiscreteControlProblem {
    std::vector<double> grid;  ///< e_i = (i - center) h, 2N + 1 points
    double spacing = 0.0;
    double radius = 0.0;
    std::size_t center = 0;
    long horizon = 0;
    double step_variance = 0.0;  ///< variance of one increment of x_hat (Sigma dt)
    double dt = 0.0;
    double lambda = 0.0;
    double gamma = 0.0;
    Matrix kernel;  ///< row i: transition law from e_i

    std::size_t size() const { return grid.size(); }
    /// Sigma = step_variance / dt
    double sigma() const { return step_variance / dt; }
    double asymptotic_band() const { return band_halfwidth_from_sigma(sigma(), lambda, gamma); }
};

struct ProblemOptions {
    double radius = 0.0;  ///< 0 selects max(5 * asymptotic band, 10 * step sd)
};

inline DiscreteControlProblem build_problem(double step_variance, double lambda, double gamma,
                                            std::size_t n_grid, long horizon, double dt,
                                            const ProblemOptions& opt = {}) {
    if (n_grid < 51 || n_grid % 2 == 0) throw DomainError("build_problem: n_grid must be odd and >= 51");
    if (horizon < 100) throw DomainError("build_problem: horizon must be >= 100 steps");
    if (!(step_variance >= 0.0)) throw DomainError("build_problem: step variance must be >= 0");
    if (!(dt > 0.0)) throw DomainError("build_problem: dt must be > 0");
    if (!(lambda >= 0.0)) throw DomainError("build_problem: lambda must be >= 0");
    if (!(gamma > 0.0)) throw DomainError("build_problem: gamma must be > 0");

    DiscreteControlProblem p;
    p.step_variance = step_variance;
    p.dt = dt;
    p.lambda = lambda;
    p.gamma = gamma;
    p.horizon = horizon;

    const double sd = std::sqrt(step_variance);
    const double band = p.asymptotic_band();
    double radius = opt.radius > 0.0 ? opt.radius : std::max(5.0 * band, 10.0 * sd);
    if (radius <= 0.0) radius = 1.0;
    if (radius < 5.0 * band * (1.0 - 1e-12)) {
        std::ostringstream os;
        os << "build_problem: truncation radius " << radius << " is below 5x the asymptotic band " << band;
        throw DomainError(os.str());
    }
    p.radius = radius;

    const std::size_t half = (n_grid - 1) / 2;
    p.center = half;
    p.spacing = radius / static_cast<double>(half);
    p.grid.resize(n_grid);
    for (std::size_t i = 0; i < n_grid; ++i) {
        p.grid[i] = (static_cast<double>(i) - static_cast<double>(half)) * p.spacing;
    }

    const auto n = static_cast<Eigen::Index>(n_grid);
    p.kernel = Matrix::Zero(n, n);
    if (sd == 0.0) {
        p.kernel.setIdentity();
        return p;
    }
    // Mass of N(0, sd^2) in the cell at offset k, and the tail beyond
    // offset k - 1/2; both from upper-tail probabilities so rows are
    // exactly mirror-symmetric.
    const double r = p.spacing / sd;
    std::vector<double> cell(n_grid), tail(n_grid + 1);
    for (std::size_t k = 0; k < n_grid; ++k) {
        const double kd = static_cast<double>(k);
        cell[k] = k == 0 ? 1.0 - 2.0 * normal_sf(0.5 * r)
                         : normal_sf((kd - 0.5) * r) - normal_sf((kd + 0.5) * r);
    }
    for (std::size_t k = 0; k <= n_grid; ++k) {
        tail[k] = normal_sf((static_cast<double>(k) - 0.5) * r);
    }
    for (Eigen::Index i = 0; i < n; ++i) {
        for (Eigen::Index j = 1; j < n - 1; ++j) {
            p.kernel(i, j) = cell[static_cast<std::size_t>(std::abs(j - i))];
        }
        // End cells collect the folded tails.
        p.kernel(i, 0) = i == 0 ? 1.0 - tail[1] : tail[static_cast<std::size_t>(i)];
        p.kernel(i, n - 1) = i == n - 1 ? 1.0 - tail[1] : tail[static_cast<std::size_t>(n - 1 - i)];
    }
    return p;
}

struct OracleSolution {
    Matrix value;  ///< (horizon + 1) x n, row t = cost-to-go at step t
    std::vector<std::size_t> inaction_lo;  ///< per step, contiguous continue cells around 0
    std::vector<std::size_t> inaction_hi;
    std::vector<double> threshold;      ///< per step, positive side
    std::vector<double> threshold_neg;  ///< per step, magnitude on the negative side

    double value_at_origin(const DiscreteControlProblem& p, long t = 0) const {
        return value(t, static_cast<Eigen::Index>(p.center));
    }
};

namespace detail {

/// Midpoint between the last continue cell and the first switch cell,
/// walking outward from the origin in direction `dir`.
inline double locate_threshold(const DiscreteControlProblem& p, const std::vector<char>& sw, int dir,
                               std::size_t& edge) {
    auto i = static_cast<long>(p.center);
    const long n = static_cast<long>(p.size());
    while (true) {
        const long next = i + dir;
        if (next < 0 || next >= n) {
            edge = static_cast<std::size_t>(i);
            return std::numeric_limits<double>::infinity();
        }
        if (sw[static_cast<std::size_t>(next)]) {
            edge = static_cast<std::size_t>(i);
            return 0.5 * (std::abs(p.grid[static_cast<std::size_t>(i)]) +
                          std::abs(p.grid[static_cast<std::size_t>(next)]));
        }
        i = next;
    }
}

}  // namespace detail

/// V(T, e) = 0 and, for t < T,
///   V(t, e) = min( Gamma e^2 dt + E[V(t+1, e') | e],  lambda + E[V(t+1, e') | 0] ).
/// Ties keep theta (continue).
inline OracleSolution solve_backward(const DiscreteControlProblem& p) {
    const auto n = static_cast<Eigen::Index>(p.size());
    const auto c = static_cast<Eigen::Index>(p.center);
    const auto H = static_cast<Eigen::Index>(p.horizon);
    OracleSolution sol;
    sol.value = Matrix::Zero(H + 1, n);
    sol.inaction_lo.assign(static_cast<std::size_t>(H), 0);
    sol.inaction_hi.assign(static_cast<std::size_t>(H), 0);
    sol.threshold.assign(static_cast<std::size_t>(H), 0.0);
    sol.threshold_neg.assign(static_cast<std::size_t>(H), 0.0);

    Vector running(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        const double e = p.grid[static_cast<std::size_t>(i)];
        running(i) = p.gamma * e * e * p.dt;
    }
    Vector next = Vector::Zero(n);
    Vector expect(n);
    std::vector<char> sw(static_cast<std::size_t>(n));
    for (Eigen::Index t = H - 1; t >= 0; --t) {
        expect.noalias() = p.kernel * next;
        const double switch_value = p.lambda + expect(c);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double cont = running(i) + expect(i);
            const bool s = switch_value < cont;
            sw[static_cast<std::size_t>(i)] = s;
            sol.value(t, i) = s ? switch_value : cont;
        }
        const auto ts = static_cast<std::size_t>(t);
        sol.threshold[ts] = detail::locate_threshold(p, sw, +1, sol.inaction_hi[ts]);
        sol.threshold_neg[ts] = detail::locate_threshold(p, sw, -1, sol.inaction_lo[ts]);
        next = sol.value.row(t).transpose();
    }
    return sol;
}

/// Largest |V(t) - Bellman(V(t+1))| over all steps and cells.
inline double bellman_residual(const DiscreteControlProblem& p, const OracleSolution& sol) {
    const auto n = static_cast<Eigen::Index>(p.size());
    const auto c = static_cast<Eigen::Index>(p.center);
    double worst = 0.0;
    for (Eigen::Index t = 0; t < static_cast<Eigen::Index>(p.horizon); ++t) {
        const Vector expect = p.kernel * sol.value.row(t + 1).transpose();
        const double switch_value = p.lambda + expect(c);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = p.grid[static_cast<std::size_t>(i)];
            const double v = std::min(p.gamma * e * e * p.dt + expect(i), switch_value);
            worst = std::max(worst, std::abs(v - sol.value(t, i)));
        }
    }
    return worst;
}

/// Exact expected cost-to-go of the band policy "reset when |e| >= width_t"
/// on the problem's kernel. `widths` holds one entry per step, or a single
/// entry used for every step. Returns the (horizon + 1) x n value table.
inline Matrix evaluate_band_policy(const DiscreteControlProblem& p, std::span<const double> widths) {
    if (widths.empty()) throw DomainError("evaluate_band_policy: no widths given");
    if (widths.size() != 1 && widths.size() != static_cast<std::size_t>(p.horizon)) {
        throw DomainError("evaluate_band_policy: widths must have 1 or horizon entries");
    }
    const auto n = static_cast<Eigen::Index>(p.size());
    const auto c = static_cast<Eigen::Index>(p.center);
    const auto H = static_cast<Eigen::Index>(p.horizon);
    Matrix value = Matrix::Zero(H + 1, n);
    Vector next = Vector::Zero(n);
    Vector expect(n);
    for (Eigen::Index t = H - 1; t >= 0; --t) {
        expect.noalias() = p.kernel * next;
        const double w = widths.size() == 1 ? widths[0] : widths[static_cast<std::size_t>(t)];
        const double switch_value = p.lambda + expect(c);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double e = p.grid[static_cast<std::size_t>(i)];
            const bool s = i != c && std::abs(e) >= w;
            value(t, i) = s ? switch_value : p.gamma * e * e * p.dt + expect(i);
        }
        next = value.row(t).transpose();
    }
    return value;
}

struct OracleComparison {
    double lambda = 0.0;
    double asymptotic_width = 0.0;     ///< band under comparison (at mid-horizon)
    double oracle_threshold = 0.0;     ///< oracle threshold at mid-horizon
    double threshold_rel_error = 0.0;  ///< |oracle - band| / band
    double oracle_value = 0.0;         ///< V*(0, 0)
    double policy_value = 0.0;         ///< band policy cost-to-go from (0, 0)
    double cost_rel_error = 0.0;       ///< (policy - oracle) / oracle
};

/// Oracle vs a band policy on the same kernel. `widths` as in
/// evaluate_band_policy.
inline OracleComparison compare_to_asymptotic(const DiscreteControlProblem& p, const OracleSolution& sol,
                                              std::span<const double> widths) {
    OracleComparison r;
    r.lambda = p.lambda;
    const auto mid = static_cast<std::size_t>(p.horizon / 2);
    r.asymptotic_width = widths.size() == 1 ? widths[0] : widths[mid];
    r.oracle_threshold = sol.threshold[mid];
    r.threshold_rel_error = r.asymptotic_width > 0.0
                                ? std::abs(r.oracle_threshold - r.asymptotic_width) / r.asymptotic_width
                                : std::numeric_limits<double>::infinity();
    r.oracle_value = sol.value_at_origin(p);
    const Matrix pv = evaluate_band_policy(p, widths);
    r.policy_value = pv(0, static_cast<Eigen::Index>(p.center));
    r.cost_rel_error = r.oracle_value > 0.0 ? (r.policy_value - r.oracle_value) / r.oracle_value : 0.0;
    return r;
}

/// Comparison against the asymptotic band Sigma^{1/4} (2 lambda / Gamma)^{1/4}.
inline OracleComparison compare_to_asymptotic(const DiscreteControlProblem& p, const OracleSolution& sol) {
    const double w = p.asymptotic_band();
    return compare_to_asymptotic(p, sol, std::span<const double>(&w, 1));
}

}  // namespace switchband
