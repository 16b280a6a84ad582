// Discrete-time tracking of a Bernoulli parameter by its MLE under a fixed
// switching cost, with the closed-form long-run quantities of the band
// policy: optimal band b_t, hitting times, cost rate, and the triangular
// stationary law of the rescaled tracking error.
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "switchband/errors.hpp"
#include "switchband/model.hpp"
#include "switchband/normal.hpp"

namespace switchband {

struct BernoulliTrackerState {
    long t = 0;
    long successes = 0;
    double p_hat = 0.0;
    double sigma_hat = 0.0;
    double theta = 0.0;
    double sigma_star = 0.0;
};

inline BernoulliTrackerState mle_update(BernoulliTrackerState s, int y) {
    if (y != 0 && y != 1) throw DomainError("mle_update: observation must be 0 or 1");
    s.t += 1;
    s.successes += y;
    s.p_hat = static_cast<double>(s.successes) / static_cast<double>(s.t);
    s.sigma_hat = std::sqrt(s.p_hat * (1.0 - s.p_hat));
    return s;
}

struct OptimalBand {
    double b;    ///< band half-width at t
    double chi;  ///< b = chi * sigma_star / sqrt(t)
};

/// b_t = (6 lambda / Gamma)^{1/4} sqrt(sigma_star / t).
inline OptimalBand optimal_band(double t, double sigma_star, double lambda, double gamma) {
    if (!(t >= 1.0)) throw DomainError("optimal_band: t must be >= 1");
    if (!(sigma_star > 0.0)) throw DomainError("optimal_band: sigma_star must be > 0");
    if (!(lambda >= 0.0)) throw DomainError("optimal_band: lambda must be >= 0");
    if (!(gamma > 0.0)) throw DomainError("optimal_band: gamma must be > 0");
    const double k = std::pow(6.0 * lambda / gamma, 0.25);
    return {k * std::sqrt(sigma_star / t), k / std::sqrt(sigma_star)};
}

struct Interval {
    double low;
    double high;
};

/// Two-sided confidence band p0 -/+ z_{alpha/2} sqrt(p0 (1 - p0) / t).
inline Interval ci_band(double p0, double t, double alpha) {
    if (!(p0 > 0.0 && p0 < 1.0)) throw DomainError("ci_band: p0 must lie in (0, 1)");
    if (!(t >= 1.0)) throw DomainError("ci_band: t must be >= 1");
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("ci_band: alpha must lie in (0, 1]");
    const double half = two_sided_critical_value(alpha) * std::sqrt(p0 * (1.0 - p0) / t);
    return {p0 - half, p0 + half};
}

/// E[tau] ~ (t b_t / sigma_star)^2 steps between switches.
inline double expected_hitting_time(double t, double b, double sigma_star) {
    const double r = t * b / sigma_star;
    return r * r;
}

/// Per-step cost of the band policy at the optimum,
/// (sigma_star / t) sqrt(2 lambda Gamma / 3).
inline double longrun_cost_rate(double t, double lambda, double gamma, double sigma_star) {
    return (sigma_star / t) * std::sqrt(2.0 * lambda * gamma / 3.0);
}

/// lambda (sigma_star / (t b))^2 + Gamma b^2 / 6: switching plus running cost
/// per step for an arbitrary band b.
inline double band_cost_rate(double t, double b, double lambda, double gamma, double sigma_star) {
    const double r = sigma_star / (t * b);
    return lambda * r * r + gamma * b * b / 6.0;
}

/// g(xi) = max(0, 1 - |xi|).
inline double triangular_density(double xi) { return std::max(0.0, 1.0 - std::abs(xi)); }

/// Integral of g over [a, b].
inline double triangular_mass(double a, double b) {
    auto cdf = [](double x) {
        if (x <= -1.0) return 0.0;
        if (x >= 1.0) return 1.0;
        return x <= 0.0 ? 0.5 * (1.0 + x) * (1.0 + x) : 1.0 - 0.5 * (1.0 - x) * (1.0 - x);
    };
    return cdf(b) - cdf(a);
}

/// Inverse CDF of g, for sampling.
inline double triangular_quantile(double u) {
    return u < 0.5 ? -1.0 + std::sqrt(2.0 * u) : 1.0 - std::sqrt(2.0 * (1.0 - u));
}

// ---------------------------------------------------------------------------
// run_tracker

struct TrackerOptions {
    bool live_sigma = false;        ///< use sigma_hat_t instead of the value frozen at t*
    bool record_trajectory = true;  ///< keep per-step rows
    bool record_xi = true;
};

struct TrackerRow {
    long t;
    double p_hat;
    double theta;
    double b;
    double xi;
    bool switched;
    double cost_running;  ///< running cost paid at this step
    double cost_switch;   ///< switching cost paid at this step
};

struct TrackerResult {
    long t_star = 0;
    double sigma_star = 0.0;
    double lambda = 0.0;
    double running_cost = 0.0;
    double switch_cost = 0.0;
    long switch_count = 0;
    std::vector<long> switch_times;
    std::vector<double> xi_samples;
    std::vector<TrackerRow> trajectory;

    /// sum over steps of 1 / E[tau_t] under the schedule
    double expected_switches = 0.0;
    /// sum over steps of the closed-form long-run cost rate
    double predicted_cost = 0.0;
    /// sum over recorded inter-switch intervals of E[tau] at the interval start
    double predicted_interval_sum = 0.0;
    double observed_interval_sum = 0.0;
    long interval_count = 0;

    double total_cost() const { return running_cost + switch_cost; }
    long steps() const { return trajectory.empty() ? 0 : static_cast<long>(trajectory.size()); }
};

/// Source of 0/1 observations: either a fixed stream or a seeded generator.
class BernoulliStream {
public:
    explicit BernoulliStream(std::span<const int> data) : data_(data) {}
    BernoulliStream(double p, std::uint64_t seed) : rng_(seed), dist_(p), generated_(true) {}

    int next() {
        if (generated_) return dist_(rng_) ? 1 : 0;
        if (pos_ >= data_.size()) throw DomainError("run_tracker: observation stream shorter than horizon");
        return data_[pos_++];
    }

private:
    std::span<const int> data_;
    std::size_t pos_ = 0;
    std::mt19937_64 rng_;
    std::bernoulli_distribution dist_;
    bool generated_ = false;
};

/// Runs the band policy on steps t* + 1 .. horizon. Before t* only the MLE
/// is updated; at t* sigma_star is frozen and theta is set to p_hat.
inline TrackerResult run_tracker(const BernoulliModel& model, const PenaltySpec& penalty,
                                 BernoulliStream stream, const TrackerOptions& opt = {}) {
    model.validate();
    penalty.validate();
    const double gamma = penalty.gamma_scalar();
    const double lambda = penalty.lambda;
    auto rho = penalty.rho ? penalty.rho : [gamma](const Vector& e) { return gamma * e.squaredNorm(); };

    TrackerResult res;
    res.lambda = lambda;
    res.t_star = model.burn_in();
    if (res.t_star >= model.horizon) throw DomainError("run_tracker: horizon must exceed t*");

    BernoulliTrackerState s;
    for (long i = 0; i < res.t_star; ++i) s = mle_update(s, stream.next());
    if (!(s.sigma_hat > 0.0)) {
        throw NumericalError("run_tracker: sigma_hat is 0 at burn-in (all observations identical)");
    }
    s.sigma_star = s.sigma_hat;
    s.theta = s.p_hat;
    res.sigma_star = s.sigma_star;

    if (opt.record_trajectory) res.trajectory.reserve(static_cast<std::size_t>(model.horizon - res.t_star));
    if (opt.record_xi) res.xi_samples.reserve(static_cast<std::size_t>(model.horizon - res.t_star));

    Vector e(1);
    // The first interval is measured from t*, where theta is set for free.
    long last_switch = res.t_star;
    double last_switch_expected = 0.0;
    for (long t = res.t_star + 1; t <= model.horizon; ++t) {
        s = mle_update(s, stream.next());
        const double td = static_cast<double>(t);
        const double sig = opt.live_sigma ? s.sigma_hat : s.sigma_star;
        const double b = sig > 0.0 ? optimal_band(td, sig, lambda, gamma).b : 0.0;
        if (t == res.t_star + 1) last_switch_expected = b > 0.0 ? expected_hitting_time(td, b, sig) : 0.0;

        bool switched = false;
        double cost_switch = 0.0;
        const double err = s.p_hat - s.theta;
        if (std::abs(err) >= b && err != 0.0) {
            switched = true;
            s.theta = s.p_hat;
            cost_switch = lambda;
            res.switch_cost += lambda;
            res.switch_count += 1;
            res.switch_times.push_back(t);
            res.observed_interval_sum += static_cast<double>(t - last_switch);
            res.predicted_interval_sum += last_switch_expected;
            res.interval_count += 1;
            last_switch = t;
            last_switch_expected = b > 0.0 ? expected_hitting_time(td, b, sig) : 0.0;
        }
        e(0) = s.p_hat - s.theta;
        const double cost_running = rho(e);
        res.running_cost += cost_running;
        const double xi = b > 0.0 ? e(0) / b : 0.0;
        if (opt.record_xi) res.xi_samples.push_back(xi);
        if (b > 0.0) res.expected_switches += 1.0 / expected_hitting_time(td, b, sig);
        res.predicted_cost += longrun_cost_rate(td, lambda, gamma, sig);
        if (opt.record_trajectory) {
            res.trajectory.push_back({t, s.p_hat, s.theta, b, xi, switched, cost_running, cost_switch});
        }
    }
    return res;
}

inline TrackerResult run_tracker(const BernoulliModel& model, const PenaltySpec& penalty,
                                 std::uint64_t seed, const TrackerOptions& opt = {}) {
    return run_tracker(model, penalty, BernoulliStream(model.p_true, seed), opt);
}

inline TrackerResult run_tracker(const BernoulliModel& model, const PenaltySpec& penalty,
                                 std::span<const int> observations, const TrackerOptions& opt = {}) {
    if (static_cast<long>(observations.size()) < model.horizon) {
        throw DomainError("run_tracker: observation stream shorter than horizon");
    }
    return run_tracker(model, penalty, BernoulliStream(observations), opt);
}

}  // namespace switchband
