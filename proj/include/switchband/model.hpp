// Problem specifications: the linear-Gaussian filtering model, the
// Bernoulli tracking model, and the switching/running cost structure.
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <memory>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "switchband/errors.hpp"
#include "switchband/linalg.hpp"

namespace switchband {

/// A deterministic matrix-valued function of time.
///
/// Either a constant, a piecewise-constant breakpoint table (value i holds on
/// [times[i], times[i+1]) and the last value holds thereafter), or an
/// arbitrary callable.
class MatrixFunction {
public:
    MatrixFunction() = default;

    static MatrixFunction constant(Matrix value) {
        MatrixFunction f;
        f.times_ = {0.0};
        f.values_ = {std::move(value)};
        return f;
    }

    static MatrixFunction scalar(double value) { return constant(Matrix::Constant(1, 1, value)); }

    static MatrixFunction piecewise(std::vector<double> times, std::vector<Matrix> values) {
        if (times.empty() || times.size() != values.size()) {
            throw DomainError("piecewise table: times and values must be non-empty and equal length");
        }
        for (std::size_t i = 1; i < times.size(); ++i) {
            if (!(times[i] > times[i - 1])) {
                throw DomainError("piecewise table: times must be strictly increasing");
            }
            if (values[i].rows() != values[0].rows() || values[i].cols() != values[0].cols()) {
                throw DomainError("piecewise table: all values must share one shape");
            }
        }
        MatrixFunction f;
        f.times_ = std::move(times);
        f.values_ = std::move(values);
        return f;
    }

    static MatrixFunction callable(std::function<Matrix(double)> fn, Eigen::Index rows,
                                   Eigen::Index cols) {
        MatrixFunction f;
        f.fn_ = std::move(fn);
        f.rows_ = rows;
        f.cols_ = cols;
        return f;
    }

    Matrix operator()(double t) const {
        if (fn_) return fn_(t);
        if (values_.empty()) throw DomainError("MatrixFunction: evaluated before initialisation");
        auto it = std::upper_bound(times_.begin(), times_.end(), t);
        const std::size_t idx = (it == times_.begin()) ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
        return values_[idx];
    }

    Eigen::Index rows() const { return fn_ ? rows_ : (values_.empty() ? 0 : values_[0].rows()); }
    Eigen::Index cols() const { return fn_ ? cols_ : (values_.empty() ? 0 : values_[0].cols()); }

    bool is_constant() const { return !fn_ && values_.size() == 1; }

    /// Breakpoints of a tabulated function (empty for callables).
    const std::vector<double>& breakpoints() const { return times_; }

private:
    std::vector<double> times_;
    std::vector<Matrix> values_;
    std::function<Matrix(double)> fn_;
    Eigen::Index rows_ = 0;
    Eigen::Index cols_ = 0;
};

/// dX = F X dt + dW, dY = A X dt + dB with d<W> = Q dt, d<B> = R dt and
/// X_0 ~ N(x0_mean, p0), observed on [0, horizon].
struct LinearGaussianModel {
    MatrixFunction F;
    MatrixFunction A;
    MatrixFunction Q;
    MatrixFunction R;
    Vector x0_mean;
    Matrix p0;
    double horizon = 1.0;

    Eigen::Index state_dim() const { return x0_mean.size(); }
    Eigen::Index obs_dim() const { return R.rows(); }
    bool is_scalar() const { return state_dim() == 1 && obs_dim() == 1; }
};

/// Scalar, constant-coefficient model that observes an unknown constant
/// (F = Q = 0, A = R = 1).
inline LinearGaussianModel constant_mean_model(double p0 = 1.0, double horizon = 1.0,
                                               double x0 = 0.0) {
    LinearGaussianModel m;
    m.F = MatrixFunction::scalar(0.0);
    m.A = MatrixFunction::scalar(1.0);
    m.Q = MatrixFunction::scalar(0.0);
    m.R = MatrixFunction::scalar(1.0);
    m.x0_mean = Vector::Constant(1, x0);
    m.p0 = Matrix::Constant(1, 1, p0);
    m.horizon = horizon;
    return m;
}

/// Independent Bernoulli(p_true) trials observed for `horizon` steps; long-run
/// approximations start at t* = floor(burn_in_fraction * horizon).
struct BernoulliModel {
    double p_true = 0.5;
    long horizon = 1000;
    double burn_in_fraction = 0.01;

    long burn_in() const {
        return std::max(1L, static_cast<long>(std::floor(burn_in_fraction * static_cast<double>(horizon))));
    }

    void validate() const {
        if (!(p_true > 0.0 && p_true < 1.0)) throw DomainError("p_true must lie in (0, 1)");
        if (!(burn_in_fraction > 0.0 && burn_in_fraction < 1.0)) {
            throw DomainError("burn_in_fraction must lie in (0, 1)");
        }
        if (horizon < 10) throw DomainError("Bernoulli horizon must be at least 10 steps");
    }
};

using RunningCost = std::function<double(const Vector&)>;

/// Switching cost lambda, running cost rho on the tracking error, and the
/// curvature Gamma = rho''(0) / 2.
struct PenaltySpec {
    double lambda = 0.0;
    RunningCost rho;
    Matrix gamma;

    /// rho(e) = e^T G e, with Gamma = G supplied directly.
    static PenaltySpec quadratic(double lambda, Matrix g) {
        PenaltySpec p;
        p.lambda = lambda;
        p.gamma = symmetrized(g);
        p.rho = [G = p.gamma](const Vector& e) { return e.dot(G * e); };
        return p;
    }

    static PenaltySpec quadratic(double lambda, double g) {
        return quadratic(lambda, Matrix::Constant(1, 1, g));
    }

    double gamma_scalar() const {
        if (gamma.rows() != 1 || gamma.cols() != 1) {
            throw DomainError("PenaltySpec: scalar Gamma requested from a multivariate penalty");
        }
        return gamma(0, 0);
    }

    void validate() const {
        if (!(lambda >= 0.0)) throw DomainError("lambda must be >= 0");
        if (gamma.size() == 0) throw DomainError("Gamma must be supplied");
        if (!is_symmetric(gamma, 1e-10)) throw DomainError("Gamma must be symmetric");
        if (!(min_eigenvalue(gamma) > 0.0)) throw DomainError("Gamma must be positive definite");
        if (rho) {
            const Vector zero = Vector::Zero(gamma.rows());
            if (std::abs(rho(zero)) > 1e-14) throw DomainError("rho(0) must be 0");
        }
    }
};

// ---------------------------------------------------------------------------
// validate_model

struct ValidationIssue {
    std::string check;
    double time;  ///< NaN for time-independent checks
    std::string message;
};

struct ValidationReport {
    std::vector<std::string> checks_run;
    std::vector<ValidationIssue> issues;

    bool ok() const { return issues.empty(); }

    bool failed(const std::string& check) const {
        return std::any_of(issues.begin(), issues.end(),
                           [&](const ValidationIssue& i) { return i.check == check; });
    }

    std::string summary() const {
        if (ok()) return "all checks passed";
        std::ostringstream os;
        for (const auto& i : issues) {
            os << i.check << ": " << i.message;
            if (!std::isnan(i.time)) os << " (t=" << i.time << ")";
            os << "\n";
        }
        return os.str();
    }
};

struct ValidationOptions {
    double symmetry_tol = 1e-10;
    double psd_tol = 1e-12;
    double max_condition = 1e12;
};

/// Checks the model's structural invariants at each sample time. Violations
/// are collected into the report; nothing is thrown.
inline ValidationReport validate_model(const LinearGaussianModel& model,
                                       const std::vector<double>& sample_times,
                                       const ValidationOptions& opt = {}) {
    ValidationReport rep;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    auto fail = [&](std::string check, double t, std::string msg) {
        rep.issues.push_back({std::move(check), t, std::move(msg)});
    };
    rep.checks_run = {"horizon",     "sample_times", "dimensions",      "p0 symmetric",
                      "p0 positive definite", "Q symmetric", "Q PSD", "R symmetric",
                      "R invertible", "R positive definite", "A nonzero"};

    if (!(model.horizon > 0.0)) fail("horizon", nan, "horizon T must be > 0");

    const Eigen::Index d = model.state_dim();
    const Eigen::Index m = model.obs_dim();
    if (d == 0 || model.p0.rows() != d || model.p0.cols() != d) {
        fail("dimensions", nan, "p0 must be d x d with d = dim(x0_mean)");
    } else {
        if (!is_symmetric(model.p0, opt.symmetry_tol)) fail("p0 symmetric", nan, "p0 not symmetric");
        if (!(min_eigenvalue(model.p0) > 0.0)) fail("p0 positive definite", nan, "p0 not positive definite");
    }

    bool any_a_nonzero = false;
    for (double t : sample_times) {
        if (t < 0.0 || t > model.horizon) {
            fail("sample_times", t, "sample time outside [0, T]");
            continue;
        }
        const Matrix F = model.F(t), A = model.A(t), Q = model.Q(t), R = model.R(t);
        if (F.rows() != d || F.cols() != d || Q.rows() != d || Q.cols() != d || A.rows() != m ||
            A.cols() != d || R.rows() != m || R.cols() != m) {
            fail("dimensions", t, "coefficient shapes inconsistent (F,Q: d x d; A: m x d; R: m x m)");
            continue;
        }
        if (!is_symmetric(Q, opt.symmetry_tol)) fail("Q symmetric", t, "Q not symmetric");
        if (min_eigenvalue(Q) < -opt.psd_tol) fail("Q PSD", t, "Q not PSD");
        if (!is_symmetric(R, opt.symmetry_tol)) fail("R symmetric", t, "R not symmetric");
        if (condition_number(R) > opt.max_condition) {
            fail("R invertible", t, "R not invertible");
        } else if (!(min_eigenvalue(R) > 0.0)) {
            fail("R positive definite", t, "R not positive definite");
        }
        if (A.cwiseAbs().maxCoeff() > 0.0) any_a_nonzero = true;
    }
    if (!sample_times.empty() && !any_a_nonzero) fail("A nonzero", nan, "A is zero at every sample time");
    return rep;
}

/// Sample times covering [0, T] uniformly plus every breakpoint of the
/// tabulated coefficients.
inline std::vector<double> default_sample_times(const LinearGaussianModel& model, int n = 11) {
    std::vector<double> ts;
    for (int i = 0; i < n; ++i) ts.push_back(model.horizon * i / (n - 1));
    for (const MatrixFunction* f : {&model.F, &model.A, &model.Q, &model.R}) {
        for (double b : f->breakpoints()) {
            if (b >= 0.0 && b <= model.horizon) ts.push_back(b);
        }
    }
    std::sort(ts.begin(), ts.end());
    ts.erase(std::unique(ts.begin(), ts.end()), ts.end());
    return ts;
}

// ---------------------------------------------------------------------------
// curvature_from_rho

struct CurvatureOptions {
    double step = 1e-4;
    double eigen_floor = 1e-10;
};

namespace detail {

inline Matrix central_hessian(const RunningCost& rho, Eigen::Index d, double h) {
    Matrix H(d, d);
    const Vector zero = Vector::Zero(d);
    const double f0 = rho(zero);
    for (Eigen::Index i = 0; i < d; ++i) {
        Vector ei = Vector::Zero(d);
        ei(i) = h;
        H(i, i) = (rho(ei) - 2.0 * f0 + rho(-ei)) / (h * h);
        for (Eigen::Index j = i + 1; j < d; ++j) {
            Vector ej = Vector::Zero(d);
            ej(j) = h;
            H(i, j) = (rho(ei + ej) - rho(ei - ej) - rho(ej - ei) + rho(-ei - ej)) / (4.0 * h * h);
            H(j, i) = H(i, j);
        }
    }
    return H;
}

}  // namespace detail

/// Gamma = Hessian(rho)(0) / 2 by central second differences with step h.
///
/// A degenerate running cost (zero curvature at the origin) is rejected.
/// The estimate at h is compared with the one at h/2: if the smallest
/// eigenvalue is below the floor, or is not distinguishable from the
/// truncation error between the two step sizes, the cost has no usable
/// quadratic term and NumericalError is thrown. The returned value is the
/// unrefined estimate at h.
inline Matrix curvature_from_rho(const RunningCost& rho, Eigen::Index d,
                                 const CurvatureOptions& opt = {}) {
    if (!(opt.step > 0.0)) throw DomainError("curvature_from_rho: step must be > 0");
    if (d < 1) throw DomainError("curvature_from_rho: dimension must be >= 1");
    const Matrix g = symmetrized(detail::central_hessian(rho, d, opt.step)) / 2.0;
    const Matrix g_half = symmetrized(detail::central_hessian(rho, d, 0.5 * opt.step)) / 2.0;
    const double lmin = min_eigenvalue(g);
    const double drift = (g - g_half).norm();
    if (!(lmin >= opt.eigen_floor) || !(lmin > 4.0 * drift)) {
        std::ostringstream os;
        os << "curvature_from_rho: running cost is degenerate at 0 (smallest eigenvalue of Gamma "
           << lmin << ", step-halving change " << drift << ")";
        throw NumericalError(os.str());
    }
    return g;
}

}  // namespace switchband
