// Test-only reference computations, independent of the library's code paths.
#pragma once

#include <cmath>
#include <functional>
#include <numbers>

namespace oracle {

/// Composite Simpson rule on [a, b] with n (even) intervals.
inline double simpson(const std::function<double(double)>& f, double a, double b, int n = 20000) {
    const double h = (b - a) / n;
    double s = f(a) + f(b);
    for (int i = 1; i < n; ++i) s += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return s * h / 3.0;
}

inline double gaussian_density(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi); }

/// Phi(x) = 1/2 + integral_0^x phi.
inline double normal_cdf(double x) { return 0.5 + simpson(gaussian_density, 0.0, x); }

/// Two-sided critical value by bisection on the integrated density.
inline double two_sided_critical(double alpha) {
    double lo = 0.0, hi = 10.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        if (2.0 * (1.0 - normal_cdf(mid)) > alpha) lo = mid; else hi = mid;
    }
    return 0.5 * (lo + hi);
}

}  // namespace oracle
