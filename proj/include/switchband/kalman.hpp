// Kalman-Bucy filter: Riccati integration for the posterior covariance,
// the gain K = P A^T R^-1, the innovation variance Sigma = K R K^T, and the
// Euler-Maruyama mean update driven by observation increments.
#pragma once

#include <cmath>
#include <sstream>
#include <vector>

#include "switchband/errors.hpp"
#include "switchband/linalg.hpp"
#include "switchband/model.hpp"

namespace switchband {

struct FilterState {
    double t = 0.0;
    Vector x_hat;
    Matrix p;
    Matrix k_gain;      ///< P A^T R^-1 (d x m)
    Matrix sigma;       ///< K R K^T (d x d)
    Vector innovation;  ///< dY - A x_hat dt of the step that produced this state
};

/// Closed-form posterior variance for the constant-mean scalar model.
inline double closed_form_P(double p0, double t) {
    if (!(p0 > 0.0)) throw DomainError("closed_form_P: p0 must be > 0");
    if (!(t >= 0.0)) throw DomainError("closed_form_P: t must be >= 0");
    return 1.0 / (1.0 / p0 + t);
}

namespace detail {

inline Matrix gain(const Matrix& p, const Matrix& a, const Matrix& r) {
    // K = P A^T R^-1, computed as (R^-1 A P)^T with R symmetric.
    return r.ldlt().solve(a * p).transpose();
}

inline Matrix riccati_rhs(const Matrix& p, const Matrix& f, const Matrix& a, const Matrix& q,
                          const Matrix& r_inv_a) {
    return f * p + p * f.transpose() + q - p * a.transpose() * r_inv_a * p;
}

}  // namespace detail

/// Gain and innovation variance for covariance p at time t.
inline void refresh_derived(const LinearGaussianModel& model, FilterState& state) {
    const Matrix A = model.A(state.t);
    const Matrix R = model.R(state.t);
    state.k_gain = detail::gain(state.p, A, R);
    state.sigma = symmetrized(state.k_gain * R * state.k_gain.transpose());
}

inline FilterState initial_state(const LinearGaussianModel& model) {
    FilterState s;
    s.t = 0.0;
    s.x_hat = model.x0_mean;
    s.p = symmetrized(model.p0);
    s.innovation = Vector::Zero(model.obs_dim());
    refresh_derived(model, s);
    return s;
}

/// One RK4 step of dP/dt = F P + P F^T + Q - P A^T R^-1 A P with the
/// coefficients frozen at state.t (piecewise-constant tabulation).
/// Returns the symmetrized covariance at state.t + dt.
inline Matrix riccati_step(const LinearGaussianModel& model, const FilterState& state, double dt,
                           double psd_tol = -1e-8) {
    if (!(dt > 0.0)) throw DomainError("riccati_step: dt must be > 0");
    const Matrix F = model.F(state.t);
    const Matrix A = model.A(state.t);
    const Matrix Q = model.Q(state.t);
    const Matrix R = model.R(state.t);
    const Matrix r_inv_a = R.ldlt().solve(A);

    const Matrix& p = state.p;
    const Matrix k1 = detail::riccati_rhs(p, F, A, Q, r_inv_a);
    const Matrix k2 = detail::riccati_rhs(p + 0.5 * dt * k1, F, A, Q, r_inv_a);
    const Matrix k3 = detail::riccati_rhs(p + 0.5 * dt * k2, F, A, Q, r_inv_a);
    const Matrix k4 = detail::riccati_rhs(p + dt * k3, F, A, Q, r_inv_a);
    Matrix next = symmetrized(p + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4));

    const double lmin = min_eigenvalue(next);
    if (!(lmin >= psd_tol)) {
        std::ostringstream os;
        os << "riccati_step: covariance lost positive semidefiniteness at t=" << state.t + dt
           << " (smallest eigenvalue " << lmin << "); reduce dt";
        throw NumericalError(os.str());
    }
    return next;
}

/// Advance the filter over [t, t + dt] given the observation increment dy.
inline FilterState filter_step(const LinearGaussianModel& model, const FilterState& state,
                               const Vector& dy, double dt) {
    if (dy.size() != model.obs_dim()) throw DomainError("filter_step: dy has wrong dimension");
    const Matrix F = model.F(state.t);
    const Matrix A = model.A(state.t);

    FilterState next;
    next.innovation = dy - A * state.x_hat * dt;
    next.x_hat = state.x_hat + F * state.x_hat * dt + state.k_gain * next.innovation;
    next.p = riccati_step(model, state, dt);
    next.t = state.t + dt;
    refresh_derived(model, next);
    return next;
}

struct SigmaFactorizations {
    Matrix from_gain;    ///< K R K^T
    Matrix from_direct;  ///< P A^T R^-1 A P^T
};

/// Sigma_t from both factorizations; throws if they disagree beyond tol
/// (relative to max(1, |Sigma|)).
inline Matrix sigma_of_t(const LinearGaussianModel& model, const FilterState& state,
                         double tol = 1e-10, SigmaFactorizations* both = nullptr) {
    const Matrix A = model.A(state.t);
    const Matrix R = model.R(state.t);
    const Matrix k = detail::gain(state.p, A, R);
    const Matrix via_gain = k * R * k.transpose();
    const Matrix via_direct = state.p * A.transpose() * R.ldlt().solve(A) * state.p.transpose();
    const double scale = std::max(1.0, via_direct.cwiseAbs().maxCoeff());
    const double diff = (via_gain - via_direct).cwiseAbs().maxCoeff();
    if (!(diff <= tol * scale)) {
        std::ostringstream os;
        os << "sigma_of_t: factorizations disagree by " << diff << " at t=" << state.t;
        throw NumericalError(os.str());
    }
    if (both) *both = {via_gain, via_direct};
    return symmetrized(via_gain);
}

/// One observation increment, dy over (t - dt, t].
struct ObservationIncrement {
    double t;
    Vector dy;
};

/// Run the filter over a stream of increments; returns the initial state
/// followed by one state per increment.
inline std::vector<FilterState> run_filter(const LinearGaussianModel& model,
                                           const std::vector<ObservationIncrement>& stream) {
    std::vector<FilterState> out;
    out.reserve(stream.size() + 1);
    out.push_back(initial_state(model));
    for (const auto& inc : stream) {
        const double dt = inc.t - out.back().t;
        if (!(dt > 0.0)) throw DomainError("run_filter: increment times must be strictly increasing from 0");
        out.push_back(filter_step(model, out.back(), inc.dy, dt));
    }
    return out;
}

/// Deterministic part of the filter (P, K, Sigma, and the frozen F, A, R)
/// tabulated on a uniform grid of n steps of size dt. Shared read-only by
/// every simulated path.
struct CovarianceSchedule {
    double dt = 0.0;
    std::vector<double> t;       ///< step start times, size n
    std::vector<Matrix> p;       ///< P at t[k]
    std::vector<Matrix> k_gain;  ///< K at t[k]
    std::vector<Matrix> sigma;   ///< Sigma at t[k]
    std::vector<Matrix> F, A, Q, R;

    std::size_t steps() const { return t.size(); }
};

inline CovarianceSchedule tabulate_covariance(const LinearGaussianModel& model, double dt) {
    if (!(dt > 0.0)) throw DomainError("tabulate_covariance: dt must be > 0");
    const auto n = static_cast<std::size_t>(std::llround(model.horizon / dt));
    if (n == 0) throw DomainError("tabulate_covariance: dt exceeds the horizon");
    CovarianceSchedule s;
    s.dt = dt;
    FilterState st = initial_state(model);
    for (std::size_t k = 0; k < n; ++k) {
        st.t = static_cast<double>(k) * dt;
        refresh_derived(model, st);
        s.t.push_back(st.t);
        s.p.push_back(st.p);
        s.k_gain.push_back(st.k_gain);
        s.sigma.push_back(st.sigma);
        s.F.push_back(model.F(st.t));
        s.A.push_back(model.A(st.t));
        s.Q.push_back(model.Q(st.t));
        s.R.push_back(model.R(st.t));
        st.p = riccati_step(model, st, dt);
    }
    return s;
}

}  // namespace switchband
