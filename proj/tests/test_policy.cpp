#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "switchband/kalman.hpp"
#include "switchband/policy.hpp"

using namespace switchband;

namespace {

Matrix scalar(double v) { return Matrix::Constant(1, 1, v); }

Matrix random_spd(std::mt19937_64& rng, int d, double floor) {
    std::normal_distribution<double> n01;
    Matrix b(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j) b(i, j) = n01(rng);
    return b * b.transpose() + floor * Matrix::Identity(d, d);
}

}  // namespace

TEST(SolveMScalar, ClosedFormValues) {
    EXPECT_NEAR(solve_m_scalar(1.0, 2.0), 0.5, 1e-15);
    EXPECT_NEAR(solve_m_scalar(2.0, 1.0), 1.0, 1e-15);
    EXPECT_NEAR(solve_m_scalar(1.0, 0.5), 1.0, 1e-15);
    for (auto [g, s] : {std::pair{1.0, 2.0}, {2.0, 1.0}, {1.0, 0.5}}) {
        const double m = solve_m_scalar(g, s);
        EXPECT_LT(m_equation_residual(scalar(g), scalar(s), scalar(m)).norm(), 1e-14);
    }
    EXPECT_THROW(solve_m_scalar(0.0, 1.0), DomainError);
    EXPECT_THROW(solve_m_scalar(1.0, 0.0), DomainError);
}

TEST(SolveMMatrix, OneDimensionalMatchesScalar) {
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> u(0.01, 10.0);
    for (int i = 0; i < 200; ++i) {
        const double g = u(rng), s = u(rng);
        const auto rep = solve_m_matrix(scalar(g), scalar(s));
        ASSERT_TRUE(rep.converged);
        EXPECT_NEAR(rep.m(0, 0), solve_m_scalar(g, s), 1e-12 * solve_m_scalar(g, s));
    }
}

TEST(SolveMMatrix, IsotropicTwoDimensionalIsFlagged) {
    // M = mI reduces the equation to gamma + (2d - 4) sigma m^2 = 0, which has no solution at d = 2.
    const auto rep = solve_m_matrix(Matrix::Identity(2, 2), Matrix::Identity(2, 2));
    EXPECT_FALSE(rep.converged);
    EXPECT_GT(rep.residual, 1e-10);
}

TEST(SolveMMatrix, IsotropicThreeDimensionalIsFlagged) {
    // d = 3 needs m^2 = -gamma / (2 sigma) < 0: no positive definite multiple of I.
    const auto rep = solve_m_matrix(Matrix::Identity(3, 3), Matrix::Identity(3, 3));
    EXPECT_FALSE(rep.converged);
}

TEST(SolveMMatrix, NoPositiveDefiniteSolutionBeyondOneDimension) {
    // With N = Sigma^{1/2} M Sigma^{1/2}, the equation on N's eigenbasis reads
    // gamma_i = 2 n_i (2 n_i - tr N). Positive gamma_i for all i needs
    // 2 n_i > tr N for all i, which sums to 2 tr N > d tr N: impossible for d >= 2.
    std::mt19937_64 rng(5);
    for (int trial = 0; trial < 300; ++trial) {
        const int d = 2 + trial % 3;
        const Matrix g = random_spd(rng, d, 0.2);
        const Matrix s = random_spd(rng, d, 0.2);
        const auto rep = solve_m_matrix(g, s);
        EXPECT_FALSE(rep.converged) << "trial " << trial;
        if (rep.residual < 1e-10) EXPECT_FALSE(rep.positive_definite) << "trial " << trial;
    }
}

TEST(SolveMMatrix, IndefiniteRootsAreFoundAndRejected) {
    // Diagonal inputs admit diagonal roots of mixed sign; Newton finds one
    // but it is not a valid region.
    Matrix g = Matrix::Identity(2, 2);
    g(1, 1) = 3.0;
    const Matrix s = Matrix::Identity(2, 2);
    const auto rep = solve_m_matrix(g, s);
    EXPECT_LT(rep.residual, 1e-10);
    EXPECT_FALSE(rep.positive_definite);
    EXPECT_FALSE(rep.converged);
    EXPECT_LT(m_equation_residual(g, s, rep.m).norm(), 1e-10);
}

TEST(SolveMMatrix, RejectsBadInputs) {
    EXPECT_THROW(solve_m_matrix(Matrix::Identity(2, 2), Matrix::Identity(3, 3)), DomainError);
    EXPECT_THROW(solve_m_matrix(-Matrix::Identity(2, 2), Matrix::Identity(2, 2)), DomainError);
}

TEST(BandHalfwidth, ZeroCostTracksExactly) {
    const auto m = constant_mean_model();
    EXPECT_EQ(band_halfwidth(m, initial_state(m), PenaltySpec::quadratic(0.0, 1.0)), 0.0);
}

TEST(BandHalfwidth, ConstantMeanModelValue) {
    const auto m = constant_mean_model();
    FilterState s = initial_state(m);
    s.p(0, 0) = 0.1;
    const double expected = std::pow(0.01, 0.25) * std::pow(2e-4, 0.25);
    EXPECT_NEAR(expected, 0.316228 * 0.118921, 1e-6);
    EXPECT_NEAR(band_halfwidth(m, s, PenaltySpec::quadratic(1e-4, 1.0)), expected, 1e-15);
    EXPECT_NEAR(expected, 0.0376060, 1e-7);
}

TEST(BandHalfwidth, FactorizationsAgreeOnRandomDraws) {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> logu(-4.0, 2.0);
    for (int i = 0; i < 10000; ++i) {
        const double p = std::pow(10.0, logu(rng)), a = std::pow(10.0, logu(rng)),
                     r = std::pow(10.0, logu(rng)), lam = std::pow(10.0, 2.0 * logu(rng)),
                     g = std::pow(10.0, logu(rng));
        const auto b = band_factorizations(p, a, r, lam, g);
        EXPECT_LE(std::abs(b.via_sigma - b.via_variance), 1e-10 * std::max(1.0, b.via_sigma));
    }
}

TEST(BandHalfwidth, MultivariateModelIsRejected) {
    LinearGaussianModel m = constant_mean_model();
    m.x0_mean = Vector::Zero(2);
    m.p0 = Matrix::Identity(2, 2);
    m.F = MatrixFunction::constant(Matrix::Zero(2, 2));
    m.Q = MatrixFunction::constant(Matrix::Zero(2, 2));
    m.A = MatrixFunction::constant(Matrix::Ones(1, 2));
    EXPECT_THROW(band_halfwidth(m, initial_state(m), PenaltySpec::quadratic(1.0, 1.0)), DomainError);
}

TEST(ShouldSwitch, Cases) {
    const InactionPolicy unit{scalar(1.0), 1.0};
    EXPECT_FALSE(should_switch(unit, 0.3, 0.3));
    EXPECT_TRUE(should_switch(unit, 1.0, 0.0));  // boundary switches
    EXPECT_FALSE(should_switch(unit, 0.999, 0.0));

    const auto pol = InactionPolicy::scalar(1.0, 0.01, 1e-4);
    EXPECT_NEAR(pol.halfwidth(), 0.0376060, 1e-7);
    EXPECT_FALSE(should_switch(pol, 0.03, 0.0));
    EXPECT_TRUE(should_switch(pol, 0.04, 0.0));
    EXPECT_TRUE(should_switch(pol, -0.04, 0.0));

    const InactionPolicy free{scalar(1.0), 0.0};
    EXPECT_TRUE(should_switch(free, 1e-300, 0.0));
    EXPECT_FALSE(should_switch(free, 0.0, 0.0));
}

TEST(ShouldSwitch, RegionEqualsTestRejectionProperty) {
    // Scalar region {xi^2 M >= 1} is the two-sided z-test rejection region
    // |x_hat - theta| / sqrt(P) >= c with c = (2 lambda / Gamma)^{1/4} when Sigma = P^2 (A = R = 1).
    std::mt19937_64 rng(23);
    std::uniform_real_distribution<double> logu(-3.0, 1.0);
    std::normal_distribution<double> n01;
    int disagreements = 0;
    for (int i = 0; i < 100000; ++i) {
        const double p = std::pow(10.0, logu(rng));
        const double lam = std::pow(10.0, 2.0 * logu(rng));
        const double g = std::pow(10.0, logu(rng));
        const double e = n01(rng) * std::sqrt(p) * 2.0;
        const auto pol = InactionPolicy::scalar(g, p * p, lam);
        const double c = test_size_from_cost(lam, g).critical_value;
        const double z = std::abs(e) / std::sqrt(p);
        const bool region = should_switch(pol, e, 0.0);
        const bool test = z >= c;
        if (region != test && std::abs(z - c) > 1e-12 * c) ++disagreements;
    }
    EXPECT_EQ(disagreements, 0);
}

TEST(CorrectionPsi, Values) {
    EXPECT_DOUBLE_EQ(correction_psi(scalar(1.0), Vector::Zero(1)), 0.0);
    EXPECT_DOUBLE_EQ(correction_psi(scalar(1.0), Vector::Ones(1)), -1.0);
    EXPECT_DOUBLE_EQ(correction_psi(scalar(0.5), Vector::Constant(1, 2.0)), 0.0);
}

TEST(TestSize, FromCost) {
    const auto zero = test_size_from_cost(0.0, 1.0);
    EXPECT_EQ(zero.critical_value, 0.0);
    EXPECT_EQ(zero.test_size, 1.0);

    const auto one = test_size_from_cost(1.0, 2.0);
    EXPECT_DOUBLE_EQ(one.critical_value, 1.0);
    EXPECT_NEAR(one.test_size, 2.0 * (1.0 - oracle::normal_cdf(1.0)), 1e-12);
    EXPECT_NEAR(one.test_size, 0.317311, 1e-6);

    const double lam = 1.96 * 1.96 * 1.96 * 1.96 / 2.0;
    const auto five = test_size_from_cost(lam, 1.0);
    EXPECT_NEAR(five.critical_value, 1.96, 1e-12);
    EXPECT_NEAR(five.test_size, 0.05, 1e-4);

    EXPECT_THROW(test_size_from_cost(-1.0, 1.0), DomainError);
    EXPECT_THROW(test_size_from_cost(1.0, 0.0), DomainError);
}

TEST(TestSize, CostFromTestSize) {
    EXPECT_EQ(cost_from_test_size(1.0, 1.0), 0.0);
    const double z = oracle::two_sided_critical(0.05);
    EXPECT_NEAR(cost_from_test_size(0.05, 1.0), std::pow(z, 4) / 2.0, 1e-9);
    EXPECT_NEAR(cost_from_test_size(0.05, 1.0), 7.3784, 1e-4);
    EXPECT_NEAR(cost_from_test_size(0.317311, 2.0), 1.0, 1e-5);
    EXPECT_THROW(cost_from_test_size(0.0, 1.0), DomainError);
    EXPECT_THROW(cost_from_test_size(1.5, 1.0), DomainError);
}

TEST(TestSize, RoundTrip) {
    for (double alpha : {0.01, 0.05, 0.1, 0.317311}) {
        for (double g : {0.5, 1.0, 3.0}) {
            EXPECT_NEAR(test_size_from_cost(cost_from_test_size(alpha, g), g).test_size, alpha, 1e-10);
        }
    }
}

TEST(ImpliedTestSize, ConstantSignalToNoiseGivesConstantSize) {
    const auto m = constant_mean_model(1.0, 2.0);
    std::vector<ObservationIncrement> stream;
    for (int k = 1; k <= 200; ++k) stream.push_back({k * 0.01, Vector::Constant(1, 0.003)});
    const auto states = run_filter(m, stream);
    const auto path = implied_test_size_path(m, states, PenaltySpec::quadratic(1e-3, 1.0));
    ASSERT_EQ(path.size(), states.size());
    for (const auto& r : path) EXPECT_NEAR(r.test_size, path.front().test_size, 1e-12);
}

TEST(ImpliedTestSize, DoublingObservationGainRaisesCriticalValue) {
    auto m = constant_mean_model(1.0, 2.0);
    m.A = MatrixFunction::piecewise({0.0, 1.0}, {scalar(1.0), scalar(2.0)});
    FilterState before = initial_state(m), after = initial_state(m);
    before.t = 0.5;
    after.t = 1.5;
    after.p = before.p;
    const auto path = implied_test_size_path(m, {before, after}, PenaltySpec::quadratic(1e-3, 1.0));
    EXPECT_NEAR(path[1].critical_value / path[0].critical_value, std::sqrt(2.0), 1e-12);
    EXPECT_LT(path[1].test_size, path[0].test_size);
}

TEST(ImpliedTestSize, ZeroCostRejectsAlways) {
    const auto m = constant_mean_model();
    const auto path = implied_test_size_path(m, {initial_state(m)}, PenaltySpec::quadratic(0.0, 1.0));
    EXPECT_EQ(path[0].test_size, 1.0);
}
