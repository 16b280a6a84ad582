// Asymptotically optimal no-switching region for small fixed switching
// costs, and its reading as a two-sided z-test.
//
// In rescaled coordinates xi = lambda^{-1/4} (x_hat - theta) the region is
// { xi : xi^T M xi < 1 } where M solves
//
//     Gamma + 2 M tr(Sigma M) - 4 M Sigma M = 0.
//
// In one dimension M = sqrt(Gamma / (2 Sigma)) and the band on |x_hat - theta|
// has half-width Sigma^{1/4} (2 lambda / Gamma)^{1/4}.
#pragma once

#include <cmath>
#include <limits>
#include <optional>
#include <vector>

#include "switchband/errors.hpp"
#include "switchband/kalman.hpp"
#include "switchband/linalg.hpp"
#include "switchband/model.hpp"
#include "switchband/normal.hpp"

namespace switchband {

inline double solve_m_scalar(double gamma, double sigma) {
    if (!(gamma > 0.0) || !(sigma > 0.0)) {
        throw DomainError("solve_m_scalar: gamma and sigma must be > 0");
    }
    return std::sqrt(gamma / (2.0 * sigma));
}

/// Gamma + 2 M tr(Sigma M) - 4 M Sigma M.
inline Matrix m_equation_residual(const Matrix& gamma, const Matrix& sigma, const Matrix& m) {
    return gamma + 2.0 * m * (sigma * m).trace() - 4.0 * m * sigma * m;
}

struct MatrixSolveReport {
    Matrix m;
    bool converged = false;
    bool positive_definite = false;
    double residual = std::numeric_limits<double>::infinity();  ///< Frobenius norm
    int iterations = 0;
};

struct MatrixSolveOptions {
    double tol = 1e-10;
    int max_iterations = 100;
};

/// Newton iteration for the region matrix on the space of symmetric
/// matrices. Never throws on nonconvergence: the best iterate and its
/// residual are returned with converged = false. Converged means residual
/// below tol and M positive definite.
inline MatrixSolveReport solve_m_matrix(const Matrix& gamma, const Matrix& sigma,
                                        std::optional<Matrix> init = std::nullopt,
                                        const MatrixSolveOptions& opt = {}) {
    const Eigen::Index d = gamma.rows();
    if (d == 0 || gamma.cols() != d || sigma.rows() != d || sigma.cols() != d) {
        throw DomainError("solve_m_matrix: Gamma and Sigma must be square with equal size");
    }
    if (!(min_eigenvalue(gamma) > 0.0) || !(min_eigenvalue(sigma) > 0.0)) {
        throw DomainError("solve_m_matrix: Gamma and Sigma must be positive definite");
    }

    Matrix m(d, d);
    if (init) {
        m = symmetrized(*init);
    } else {
        m.setZero();
        for (Eigen::Index i = 0; i < d; ++i) m(i, i) = solve_m_scalar(gamma(i, i), sigma(i, i));
    }

    // Basis of symmetric matrices: E_ij = e_i e_j^T + e_j e_i^T (i < j), E_ii.
    std::vector<std::pair<Eigen::Index, Eigen::Index>> basis;
    for (Eigen::Index i = 0; i < d; ++i) {
        for (Eigen::Index j = i; j < d; ++j) basis.emplace_back(i, j);
    }
    const auto nb = static_cast<Eigen::Index>(basis.size());
    auto vech = [&](const Matrix& x) {
        Vector v(nb);
        for (Eigen::Index b = 0; b < nb; ++b) v(b) = x(basis[b].first, basis[b].second);
        return v;
    };

    MatrixSolveReport best;
    best.m = m;
    for (int it = 0; it <= opt.max_iterations; ++it) {
        const Matrix f = m_equation_residual(gamma, sigma, m);
        const double res = f.norm();
        if (std::isfinite(res) && res < best.residual) {
            best.m = m;
            best.residual = res;
            best.iterations = it;
        }
        if (!std::isfinite(res) || res < opt.tol || it == opt.max_iterations) break;

        // Directional derivative of the residual along each basis matrix.
        const double tr_sm = (sigma * m).trace();
        Matrix jac(nb, nb);
        for (Eigen::Index b = 0; b < nb; ++b) {
            Matrix e = Matrix::Zero(d, d);
            e(basis[b].first, basis[b].second) = 1.0;
            e(basis[b].second, basis[b].first) = 1.0;
            const Matrix de = 2.0 * e * tr_sm + 2.0 * m * (sigma * e).trace() -
                              4.0 * e * sigma * m - 4.0 * m * sigma * e;
            jac.col(b) = vech(de);
        }
        Eigen::FullPivLU<Matrix> lu(jac);
        lu.setThreshold(1e-12);
        if (!lu.isInvertible()) break;
        const Vector step = lu.solve(-vech(f));
        for (Eigen::Index b = 0; b < nb; ++b) {
            m(basis[b].first, basis[b].second) += step(b);
            m(basis[b].second, basis[b].first) = m(basis[b].first, basis[b].second);
        }
    }
    best.positive_definite = min_eigenvalue(best.m) > 0.0;
    best.converged = best.residual < opt.tol && best.positive_definite;
    return best;
}

/// The no-switching region { xi : xi^T M xi < 1 } at one instant.
struct InactionPolicy {
    Matrix m_matrix;
    double lambda = 0.0;

    /// Scalar policy for innovation variance sigma.
    static InactionPolicy scalar(double gamma, double sigma, double lambda) {
        return {Matrix::Constant(1, 1, solve_m_scalar(gamma, sigma)), lambda};
    }

    /// Half-width of the band on |x_hat - theta| (d = 1 only).
    double halfwidth() const {
        if (m_matrix.rows() != 1) throw DomainError("InactionPolicy: half-width is defined for d = 1");
        return std::pow(lambda, 0.25) / std::sqrt(m_matrix(0, 0));
    }
};

/// Switch iff xi^T M xi >= 1, xi = lambda^{-1/4} (x_hat - theta). With
/// lambda = 0 any nonzero tracking error triggers a switch.
inline bool should_switch(const InactionPolicy& policy, const Vector& x_hat, const Vector& theta) {
    const Vector e = x_hat - theta;
    if (policy.lambda == 0.0) return e.cwiseAbs().maxCoeff() > 0.0;
    // xi^T M xi = e^T M e / sqrt(lambda)
    return e.dot(policy.m_matrix * e) >= std::sqrt(policy.lambda);
}

inline bool should_switch(const InactionPolicy& policy, double x_hat, double theta) {
    const double e = x_hat - theta;
    if (policy.lambda == 0.0) return e != 0.0;
    return e * e * policy.m_matrix(0, 0) >= std::sqrt(policy.lambda);
}

/// psi~(xi) = -1 + (xi^T M xi - 1)^2.
inline double correction_psi(const Matrix& m, const Vector& xi) {
    const double q = xi.dot(m * xi) - 1.0;
    return -1.0 + q * q;
}

struct BandFactorizations {
    double via_sigma;      ///< Sigma^{1/4} (2 lambda / Gamma)^{1/4}
    double via_variance;   ///< sqrt(P) (A / sqrt(R))^{1/2} (2 lambda / Gamma)^{1/4}
};

/// Both routes to the scalar band half-width from (P, A, R).
inline BandFactorizations band_factorizations(double p, double a, double r, double lambda,
                                              double gamma) {
    const double scale = std::pow(2.0 * lambda / gamma, 0.25);
    const double sigma = p * a * a * p / r;
    return {std::pow(sigma, 0.25) * scale, std::sqrt(p) * std::sqrt(std::abs(a) / std::sqrt(r)) * scale};
}

/// Half-width of the band on |x_hat - theta| for a scalar model.
inline double band_halfwidth(const LinearGaussianModel& model, const FilterState& state,
                             const PenaltySpec& penalty) {
    if (!model.is_scalar()) {
        throw DomainError("band_halfwidth: scalar models only; use the region matrix for d > 1");
    }
    if (!(penalty.lambda >= 0.0)) throw DomainError("band_halfwidth: lambda must be >= 0");
    const double gamma = penalty.gamma_scalar();
    const auto b = band_factorizations(state.p(0, 0), model.A(state.t)(0, 0),
                                       model.R(state.t)(0, 0), penalty.lambda, gamma);
    const double scale = std::max({1e-300, std::abs(b.via_sigma), std::abs(b.via_variance)});
    if (std::abs(b.via_sigma - b.via_variance) > 1e-10 * std::max(1.0, scale)) {
        throw NumericalError("band_halfwidth: factorizations disagree");
    }
    return b.via_sigma;
}

/// Band half-width straight from Sigma (no model), Sigma^{1/4}(2 lambda/Gamma)^{1/4}.
inline double band_halfwidth_from_sigma(double sigma, double lambda, double gamma) {
    return std::pow(sigma, 0.25) * std::pow(2.0 * lambda / gamma, 0.25);
}

struct TestMapping {
    double critical_value = 0.0;
    double test_size = 1.0;
    double confidence_level() const { return 1.0 - test_size; }
};

/// c = (2 lambda / Gamma)^{1/4}, alpha = 2 (1 - Phi(c)).
inline TestMapping test_size_from_cost(double lambda, double gamma) {
    if (!(lambda >= 0.0)) throw DomainError("test_size_from_cost: lambda must be >= 0");
    if (!(gamma > 0.0)) throw DomainError("test_size_from_cost: gamma must be > 0");
    const double c = std::pow(2.0 * lambda / gamma, 0.25);
    return {c, two_sided_size(c)};
}

/// Inverse map: lambda = Gamma c^4 / 2 with c = z_{alpha/2}.
inline double cost_from_test_size(double alpha, double gamma) {
    if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("cost_from_test_size: alpha must lie in (0, 1]");
    if (!(gamma > 0.0)) throw DomainError("cost_from_test_size: gamma must be > 0");
    const double c = two_sided_critical_value(alpha);
    return 0.5 * gamma * c * c * c * c;
}

struct ImpliedTestSize {
    double t;
    double critical_value;
    double test_size;
};

/// Effective test size along a filter run: c_t = band_t / sqrt(P_t).
inline std::vector<ImpliedTestSize> implied_test_size_path(const LinearGaussianModel& model,
                                                           const std::vector<FilterState>& states,
                                                           const PenaltySpec& penalty) {
    if (!model.is_scalar()) throw DomainError("implied_test_size_path: scalar models only");
    std::vector<ImpliedTestSize> out;
    out.reserve(states.size());
    for (const auto& s : states) {
        const double c = band_halfwidth(model, s, penalty) / std::sqrt(s.p(0, 0));
        out.push_back({s.t, c, two_sided_size(c)});
    }
    return out;
}

}  // namespace switchband
