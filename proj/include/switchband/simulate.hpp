// Monte Carlo harness for the continuous-time model: Euler-Maruyama paths,
// the filter + band policy loop with cost accounting, scaling studies across
// lambda, and comparison of the rescaled tracking error with the triangular
// stationary law.
#pragma once

#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <span>
#include <sstream>
#include <vector>

#include "switchband/bernoulli.hpp"
#include "switchband/errors.hpp"
#include "switchband/kalman.hpp"
#include "switchband/linalg.hpp"
#include "switchband/model.hpp"
#include "switchband/parallel.hpp"
#include "switchband/policy.hpp"

namespace switchband {

/// Seed for replication `index` of a run seeded with `seed` (splitmix64).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) {
    std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (index + 1);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Everything deterministic about a simulation grid: the covariance
/// schedule on n + 1 nodes plus noise factors for each step.
struct SimulationGrid {
    LinearGaussianModel model;
    CovarianceSchedule schedule;  ///< n + 1 nodes, t_0 = 0 .. t_n = horizon
    std::vector<Matrix> q_factor;  ///< L with L L^T = Q(t_k), per step
    std::vector<Matrix> r_factor;  ///< same for R(t_k)
    std::size_t steps = 0;

    double dt() const { return schedule.dt; }
};

inline SimulationGrid make_grid(const LinearGaussianModel& model, double dt) {
    if (!(dt > 0.0)) throw DomainError("make_grid: dt must be > 0");
    SimulationGrid g;
    g.model = model;
    g.steps = static_cast<std::size_t>(std::llround(model.horizon / dt));
    if (g.steps == 0) throw DomainError("make_grid: dt exceeds the horizon");
    LinearGaussianModel extended = model;
    extended.horizon = static_cast<double>(g.steps + 1) * dt;
    g.schedule = tabulate_covariance(extended, dt);
    g.q_factor.reserve(g.steps);
    g.r_factor.reserve(g.steps);
    Matrix lq, lr;
    for (std::size_t k = 0; k < g.steps; ++k) {
        if (k == 0 || !g.schedule.Q[k].isApprox(g.schedule.Q[k - 1], 0.0)) {
            if (!psd_factor(g.schedule.Q[k], lq)) {
                std::ostringstream os;
                os << "simulate: Q(t) is not PSD at t=" << g.schedule.t[k];
                throw NumericalError(os.str());
            }
        }
        if (k == 0 || !g.schedule.R[k].isApprox(g.schedule.R[k - 1], 0.0)) {
            if (!psd_factor(g.schedule.R[k], lr)) {
                std::ostringstream os;
                os << "simulate: R(t) is not PSD at t=" << g.schedule.t[k];
                throw NumericalError(os.str());
            }
        }
        g.q_factor.push_back(lq);
        g.r_factor.push_back(lr);
    }
    return g;
}

/// Hidden states X_{t_0..t_n} (columns, d x (n+1)) and observation
/// increments dY over each step (columns, m x n).
struct SimulatedPath {
    Matrix x;
    Matrix dy;
    double dt = 0.0;
};

inline SimulatedPath simulate_path(const SimulationGrid& grid, std::uint64_t path_seed) {
    const auto& s = grid.schedule;
    const Eigen::Index d = grid.model.state_dim();
    const Eigen::Index m = grid.model.obs_dim();
    const double dt = grid.dt();
    const double sqdt = std::sqrt(dt);
    std::mt19937_64 rng(path_seed);
    std::normal_distribution<double> normal;

    SimulatedPath path;
    path.dt = dt;
    path.x.resize(d, static_cast<Eigen::Index>(grid.steps) + 1);
    path.dy.resize(m, static_cast<Eigen::Index>(grid.steps));

    Matrix l0;
    if (!psd_factor(grid.model.p0, l0)) throw NumericalError("simulate: p0 is not PSD");
    Vector z(d), zb(m);
    for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
    path.x.col(0) = grid.model.x0_mean + l0 * z;

    if (d == 1 && m == 1) {
        double x = path.x(0, 0);
        for (std::size_t k = 0; k < grid.steps; ++k) {
            const double zw = normal(rng);
            const double zo = normal(rng);
            const auto kk = static_cast<Eigen::Index>(k);
            path.dy(0, kk) = s.A[k](0, 0) * x * dt + grid.r_factor[k](0, 0) * sqdt * zo;
            x += s.F[k](0, 0) * x * dt + grid.q_factor[k](0, 0) * sqdt * zw;
            path.x(0, kk + 1) = x;
        }
        return path;
    }
    for (std::size_t k = 0; k < grid.steps; ++k) {
        for (Eigen::Index i = 0; i < d; ++i) z(i) = normal(rng);
        for (Eigen::Index i = 0; i < m; ++i) zb(i) = normal(rng);
        const auto kk = static_cast<Eigen::Index>(k);
        const Vector xk = path.x.col(kk);
        path.dy.col(kk) = s.A[k] * xk * dt + grid.r_factor[k] * zb * sqdt;
        path.x.col(kk + 1) = xk + s.F[k] * xk * dt + grid.q_factor[k] * z * sqdt;
    }
    return path;
}

/// n_paths independent paths; path i uses derive_seed(seed, i).
inline std::vector<SimulatedPath> simulate_paths(const LinearGaussianModel& model, double dt,
                                                 std::size_t n_paths, std::uint64_t seed,
                                                 unsigned threads = 1) {
    if (n_paths < 1) throw DomainError("simulate_paths: n_paths must be >= 1");
    const SimulationGrid grid = make_grid(model, dt);
    std::vector<SimulatedPath> out(n_paths);
    parallel_for(n_paths, threads, [&](std::size_t i) { out[i] = simulate_path(grid, derive_seed(seed, i)); });
    return out;
}

// ---------------------------------------------------------------------------
// Policy loop

/// The asymptotic region at every grid node.
struct PolicySchedule {
    double lambda = 0.0;
    std::vector<InactionPolicy> policies;  ///< per node, n + 1 entries
    std::vector<double> halfwidth;         ///< scalar models: band half-width per node
    bool scalar = true;
};

inline PolicySchedule asymptotic_policy(const SimulationGrid& grid, const PenaltySpec& penalty) {
    penalty.validate();
    PolicySchedule ps;
    ps.lambda = penalty.lambda;
    ps.scalar = grid.model.is_scalar();
    const auto& sched = grid.schedule;
    const std::size_t n = grid.steps + 1;
    ps.policies.reserve(n);
    if (ps.scalar) {
        const double gamma = penalty.gamma_scalar();
        ps.halfwidth.reserve(n);
        for (std::size_t k = 0; k < n; ++k) {
            const double sig = sched.sigma[k](0, 0);
            const double m = sig > 0.0 ? solve_m_scalar(gamma, sig) : std::numeric_limits<double>::infinity();
            ps.policies.push_back({Matrix::Constant(1, 1, m), penalty.lambda});
            ps.halfwidth.push_back(band_halfwidth_from_sigma(sig, penalty.lambda, gamma));
        }
        return ps;
    }
    std::optional<Matrix> warm;
    for (std::size_t k = 0; k < n; ++k) {
        if (k > 0 && sched.sigma[k].isApprox(sched.sigma[k - 1], 0.0)) {
            ps.policies.push_back(ps.policies.back());
            continue;
        }
        auto rep = solve_m_matrix(penalty.gamma, sched.sigma[k], warm);
        if (!rep.converged) {
            std::ostringstream os;
            os << "asymptotic_policy: region matrix equation has no converged solution at t="
               << sched.t[k] << " (residual " << rep.residual << ")";
            throw NumericalError(os.str());
        }
        warm = rep.m;
        ps.policies.push_back({rep.m, penalty.lambda});
    }
    return ps;
}

struct CostLedger {
    double lambda = 0.0;
    double running_cost = 0.0;
    double switch_cost = 0.0;
    long switch_count = 0;
    std::vector<double> switch_times;
    /// Scalar models: tracking error divided by the band half-width.
    /// Multivariate: sqrt(xi^T M xi).
    std::vector<double> xi_samples;

    double total() const { return running_cost + switch_cost; }
};

struct RunOptions {
    std::size_t xi_stride = 0;  ///< record every k-th step; 0 disables
};

/// Filter + band policy along one path. theta starts at x_hat_0 for free.
inline CostLedger run_policy(const SimulationGrid& grid, const PenaltySpec& penalty,
                             const PolicySchedule& policy, const SimulatedPath& path,
                             const RunOptions& opt = {}) {
    const auto& s = grid.schedule;
    const std::size_t n = static_cast<std::size_t>(path.dy.cols());
    if (n > grid.steps) throw DomainError("run_policy: path longer than the grid");
    if (policy.policies.size() < n + 1) throw DomainError("run_policy: policy schedule too short");
    const double dt = grid.dt();

    CostLedger led;
    led.lambda = penalty.lambda;
    if (opt.xi_stride > 0) led.xi_samples.reserve(n / opt.xi_stride + 1);

    if (policy.scalar && !penalty.rho) {
        throw DomainError("run_policy: penalty has no running cost function");
    }
    if (policy.scalar) {
        double x_hat = grid.model.x0_mean(0);
        double theta = x_hat;
        Vector e(1);
        const double lambda = penalty.lambda;
        for (std::size_t k = 0; k < n; ++k) {
            const double innovation = path.dy(0, static_cast<Eigen::Index>(k)) - s.A[k](0, 0) * x_hat * dt;
            x_hat += s.F[k](0, 0) * x_hat * dt + s.k_gain[k](0, 0) * innovation;
            const double w = policy.halfwidth[k + 1];
            double err = x_hat - theta;
            if (err != 0.0 && std::abs(err) >= w) {
                theta = x_hat;
                err = 0.0;
                led.switch_cost += lambda;
                led.switch_count += 1;
                led.switch_times.push_back(s.t[k + 1]);
            }
            e(0) = err;
            led.running_cost += penalty.rho(e) * dt;
            if (opt.xi_stride > 0 && (k + 1) % opt.xi_stride == 0) {
                led.xi_samples.push_back(w > 0.0 ? err / w : 0.0);
            }
        }
        return led;
    }

    Vector x_hat = grid.model.x0_mean;
    Vector theta = x_hat;
    for (std::size_t k = 0; k < n; ++k) {
        const Vector innovation = path.dy.col(static_cast<Eigen::Index>(k)) - s.A[k] * x_hat * dt;
        x_hat += s.F[k] * x_hat * dt + s.k_gain[k] * innovation;
        const auto& pol = policy.policies[k + 1];
        if (should_switch(pol, x_hat, theta)) {
            theta = x_hat;
            led.switch_cost += penalty.lambda;
            led.switch_count += 1;
            led.switch_times.push_back(s.t[k + 1]);
        }
        const Vector err = x_hat - theta;
        led.running_cost += penalty.rho(err) * dt;
        if (opt.xi_stride > 0 && (k + 1) % opt.xi_stride == 0) {
            led.xi_samples.push_back(pol.lambda > 0.0
                                         ? std::sqrt(err.dot(pol.m_matrix * err) / std::sqrt(pol.lambda))
                                         : 0.0);
        }
    }
    return led;
}

/// Switch count predicted by the diffusion hitting-time scale
/// E[tau_t] = width_t^2 / Sigma_t, summed as dt / E[tau_t] over the grid.
inline double expected_switch_count(const SimulationGrid& grid, const PolicySchedule& policy) {
    if (!policy.scalar) throw DomainError("expected_switch_count: scalar models only");
    double total = 0.0;
    for (std::size_t k = 1; k <= grid.steps; ++k) {
        const double w = policy.halfwidth[k];
        const double sig = grid.schedule.sigma[k](0, 0);
        if (w > 0.0) total += grid.dt() * sig / (w * w);
    }
    return total;
}

/// Time average of the band half-width over the grid (scalar), or of the
/// longest semi-axis lambda^{1/4} / sqrt(min eig M) (multivariate).
inline double mean_band(const SimulationGrid& grid, const PolicySchedule& policy) {
    double sum = 0.0;
    for (std::size_t k = 1; k <= grid.steps; ++k) {
        if (policy.scalar) {
            sum += policy.halfwidth[k];
        } else {
            const auto& p = policy.policies[k];
            sum += std::pow(p.lambda, 0.25) / std::sqrt(min_eigenvalue(p.m_matrix));
        }
    }
    return sum / static_cast<double>(grid.steps);
}

// ---------------------------------------------------------------------------
// Experiments over many paths

struct EnsembleSummary {
    double lambda = 0.0;
    std::size_t n_paths = 0;
    double mean_total = 0.0;
    double se_total = 0.0;  ///< standard error of the mean
    double mean_running = 0.0;
    double mean_switch_cost = 0.0;
    double mean_switch_count = 0.0;
    long total_switches = 0;
};

inline EnsembleSummary summarize(std::span<const CostLedger> ledgers) {
    EnsembleSummary s;
    s.n_paths = ledgers.size();
    if (ledgers.empty()) return s;
    s.lambda = ledgers.front().lambda;
    double sum = 0.0, sum_sq = 0.0;
    for (const auto& l : ledgers) {
        sum += l.total();
        sum_sq += l.total() * l.total();
        s.mean_running += l.running_cost;
        s.mean_switch_cost += l.switch_cost;
        s.mean_switch_count += static_cast<double>(l.switch_count);
        s.total_switches += l.switch_count;
    }
    const double n = static_cast<double>(ledgers.size());
    s.mean_total = sum / n;
    s.mean_running /= n;
    s.mean_switch_cost /= n;
    s.mean_switch_count /= n;
    if (ledgers.size() > 1) {
        const double var = std::max(0.0, (sum_sq - n * s.mean_total * s.mean_total) / (n - 1.0));
        s.se_total = std::sqrt(var / n);
    }
    return s;
}

struct EnsembleOptions {
    std::size_t n_paths = 100;
    std::uint64_t seed = 0;
    unsigned threads = 0;
    std::size_t xi_stride = 0;
};

/// Runs every lambda in `lambdas` on the same n_paths paths (common random
/// numbers). Result[j][i] is path i under lambdas[j].
inline std::vector<std::vector<CostLedger>> run_ensemble(const SimulationGrid& grid,
                                                         const PenaltySpec& penalty_base,
                                                         std::span<const double> lambdas,
                                                         const EnsembleOptions& opt) {
    if (opt.n_paths < 1) throw DomainError("run_ensemble: n_paths must be >= 1");
    std::vector<PolicySchedule> policies;
    std::vector<PenaltySpec> penalties;
    for (double lam : lambdas) {
        PenaltySpec p = penalty_base;
        p.lambda = lam;
        policies.push_back(asymptotic_policy(grid, p));
        penalties.push_back(std::move(p));
    }
    std::vector<std::vector<CostLedger>> out(lambdas.size(), std::vector<CostLedger>(opt.n_paths));
    parallel_for(opt.n_paths, opt.threads, [&](std::size_t i) {
        const SimulatedPath path = simulate_path(grid, derive_seed(opt.seed, i));
        for (std::size_t j = 0; j < lambdas.size(); ++j) {
            out[j][i] = run_policy(grid, penalties[j], policies[j], path, {opt.xi_stride});
        }
    });
    return out;
}

struct LogLogFit {
    double slope = 0.0;
    double intercept = 0.0;
    double slope_se = 0.0;
};

/// Ordinary least squares of log(y) on log(x).
inline LogLogFit fit_loglog(std::span<const double> x, std::span<const double> y) {
    if (x.size() != y.size() || x.size() < 2) throw DomainError("fit_loglog: need >= 2 paired points");
    const double n = static_cast<double>(x.size());
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        if (!(x[i] > 0.0) || !(y[i] > 0.0)) throw DomainError("fit_loglog: values must be > 0");
        mx += std::log(x[i]);
        my += std::log(y[i]);
    }
    mx /= n;
    my /= n;
    double sxx = 0.0, sxy = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double dx = std::log(x[i]) - mx;
        sxx += dx * dx;
        sxy += dx * (std::log(y[i]) - my);
    }
    LogLogFit f;
    f.slope = sxy / sxx;
    f.intercept = my - f.slope * mx;
    if (x.size() > 2) {
        double rss = 0.0;
        for (std::size_t i = 0; i < x.size(); ++i) {
            const double r = std::log(y[i]) - (f.intercept + f.slope * std::log(x[i]));
            rss += r * r;
        }
        f.slope_se = std::sqrt(rss / (n - 2.0) / sxx);
    }
    return f;
}

struct ScalingReport {
    std::vector<double> lambda_grid;
    std::vector<double> mean_band;
    std::vector<double> mean_total_cost;
    std::vector<double> se_total_cost;
    std::vector<double> mean_switch_count;
    std::vector<double> expected_switch_count;  ///< scalar models only, else NaN
    LogLogFit band_fit;
    LogLogFit cost_fit;
};

/// Grid must be strictly decreasing, >= 4 points, spanning >= 2 decades.
inline void check_lambda_grid(std::span<const double> grid) {
    if (grid.size() < 4) throw DomainError("lambda grid needs at least 4 points");
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (!(grid[i] > 0.0)) throw DomainError("lambda grid values must be > 0");
        if (i > 0 && !(grid[i] < grid[i - 1])) throw DomainError("lambda grid must be strictly decreasing");
    }
    if (grid.front() / grid.back() < 100.0 * (1.0 - 1e-12)) {
        throw DomainError("lambda grid must span at least 2 decades");
    }
}

inline ScalingReport scaling_study(const SimulationGrid& grid, const PenaltySpec& penalty_base,
                                   std::span<const double> lambda_grid, const EnsembleOptions& opt) {
    check_lambda_grid(lambda_grid);
    const auto ledgers = run_ensemble(grid, penalty_base, lambda_grid, opt);
    ScalingReport rep;
    rep.lambda_grid.assign(lambda_grid.begin(), lambda_grid.end());
    for (std::size_t j = 0; j < lambda_grid.size(); ++j) {
        PenaltySpec p = penalty_base;
        p.lambda = lambda_grid[j];
        const PolicySchedule pol = asymptotic_policy(grid, p);
        const EnsembleSummary s = summarize(ledgers[j]);
        if (s.total_switches == 0) {
            std::ostringstream os;
            os << "scaling_study: no switches at lambda=" << lambda_grid[j] << "; grid too coarse for the horizon";
            throw NumericalError(os.str());
        }
        rep.mean_band.push_back(mean_band(grid, pol));
        rep.mean_total_cost.push_back(s.mean_total);
        rep.se_total_cost.push_back(s.se_total);
        rep.mean_switch_count.push_back(s.mean_switch_count);
        rep.expected_switch_count.push_back(pol.scalar ? expected_switch_count(grid, pol)
                                                       : std::numeric_limits<double>::quiet_NaN());
    }
    rep.band_fit = fit_loglog(rep.lambda_grid, rep.mean_band);
    rep.cost_fit = fit_loglog(rep.lambda_grid, rep.mean_total_cost);
    return rep;
}

// ---------------------------------------------------------------------------
// Stationary density

struct DensityReport {
    std::vector<double> bin_centers;
    std::vector<double> empirical;  ///< histogram density
    std::vector<double> reference;  ///< bin average of g
    double l1 = 0.0;                ///< integral of |empirical - g|
    double mean = 0.0;
    double variance = 0.0;
    std::size_t samples = 0;
};

struct DensityOptions {
    std::size_t bins = 50;
    std::size_t min_samples = 100000;
};

/// 50-bin histogram of xi on [-1, 1] against g(xi) = 1 - |xi|. Mass outside
/// [-1, 1] stays in the denominator and therefore counts toward the L1 distance.
inline DensityReport stationary_density(std::span<const double> xi, const DensityOptions& opt = {}) {
    if (xi.size() < opt.min_samples) {
        std::ostringstream os;
        os << "stationary_density: " << xi.size() << " samples, need at least " << opt.min_samples;
        throw DomainError(os.str());
    }
    DensityReport r;
    r.samples = xi.size();
    const double width = 2.0 / static_cast<double>(opt.bins);
    std::vector<std::size_t> counts(opt.bins, 0);
    std::size_t outside = 0;
    double sum = 0.0;
    for (double v : xi) {
        sum += v;
        if (v < -1.0 || v > 1.0) {
            ++outside;
            continue;
        }
        auto b = static_cast<std::size_t>((v + 1.0) / width);
        counts[std::min(b, opt.bins - 1)]++;
    }
    const double n = static_cast<double>(xi.size());
    r.mean = sum / n;
    double ss = 0.0;
    for (double v : xi) ss += (v - r.mean) * (v - r.mean);
    r.variance = ss / (n - 1.0);
    for (std::size_t b = 0; b < opt.bins; ++b) {
        const double lo = -1.0 + width * static_cast<double>(b);
        const double dens = static_cast<double>(counts[b]) / (n * width);
        const double ref = triangular_mass(lo, lo + width) / width;
        r.bin_centers.push_back(lo + 0.5 * width);
        r.empirical.push_back(dens);
        r.reference.push_back(ref);
        r.l1 += std::abs(dens - ref) * width;
    }
    r.l1 += static_cast<double>(outside) / n;
    return r;
}

inline DensityReport stationary_density(std::span<const CostLedger> ledgers, const DensityOptions& opt = {}) {
    std::vector<double> all;
    for (const auto& l : ledgers) all.insert(all.end(), l.xi_samples.begin(), l.xi_samples.end());
    return stationary_density(std::span<const double>(all), opt);
}

}  // namespace switchband
