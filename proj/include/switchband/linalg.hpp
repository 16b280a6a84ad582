// Small dense linear-algebra helpers shared across modules.
#pragma once

#include <Eigen/Dense>
#include <limits>

namespace switchband {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline Matrix symmetrized(const Matrix& m) { return 0.5 * (m + m.transpose()); }

/// Smallest eigenvalue of the symmetric part of m.
inline double min_eigenvalue(const Matrix& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    if (m.rows() == 1) return m(0, 0);
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m), Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

inline bool is_symmetric(const Matrix& m, double tol = 1e-12) {
    if (m.rows() != m.cols()) return false;
    const double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
    return (m - m.transpose()).cwiseAbs().maxCoeff() <= tol * scale;
}

/// 2-norm condition number via singular values; infinity for singular input.
inline double condition_number(const Matrix& m) {
    if (m.size() == 0) return std::numeric_limits<double>::infinity();
    Eigen::JacobiSVD<Matrix> svd(m);
    const auto& s = svd.singularValues();
    const double smin = s(s.size() - 1);
    if (smin <= 0.0) return std::numeric_limits<double>::infinity();
    return s(0) / smin;
}

/// Lower Cholesky-like factor L with L L^T = m for symmetric PSD m.
///
/// Uses LDLT so that semidefinite inputs (e.g. Q = 0) factor cleanly.
/// Returns false if m has an eigenvalue below -tol.
inline bool psd_factor(const Matrix& m, Matrix& out, double tol = 1e-12) {
    const Eigen::Index n = m.rows();
    if (n == 1) {
        if (m(0, 0) < -tol) return false;
        out = Matrix::Constant(1, 1, std::sqrt(std::max(0.0, m(0, 0))));
        return true;
    }
    Eigen::SelfAdjointEigenSolver<Matrix> es(symmetrized(m));
    if (es.eigenvalues().minCoeff() < -tol * std::max(1.0, es.eigenvalues().maxCoeff())) {
        return false;
    }
    const Vector root = es.eigenvalues().cwiseMax(0.0).cwiseSqrt();
    out = es.eigenvectors() * root.asDiagonal();
    return true;
}

}  // namespace switchband
