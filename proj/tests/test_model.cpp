#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "switchband/model.hpp"

using namespace switchband;

namespace {

std::vector<double> unit_grid() { return {0.0, 0.25, 0.5, 0.75, 1.0}; }

}  // namespace

TEST(ValidateModel, ConstantMeanModelPasses) {
    const auto rep = validate_model(constant_mean_model(1.0, 1.0), unit_grid());
    EXPECT_TRUE(rep.ok()) << rep.summary();
}

TEST(ValidateModel, ZeroObservationNoiseIsNotInvertible) {
    auto m = constant_mean_model();
    m.R = MatrixFunction::piecewise({0.0, 0.5}, {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.0)});
    const auto rep = validate_model(m, unit_grid());
    ASSERT_FALSE(rep.ok());
    ASSERT_TRUE(rep.failed("R invertible"));
    for (const auto& issue : rep.issues) {
        if (issue.check == "R invertible") {
            EXPECT_GE(issue.time, 0.5);
            EXPECT_EQ(issue.message, "R not invertible");
        }
    }
}

TEST(ValidateModel, NegativeStateNoiseIsNotPsd) {
    auto m = constant_mean_model();
    Matrix q(2, 2);
    q << 1.0, 0.0, 0.0, -0.1;
    m.F = MatrixFunction::constant(Matrix::Zero(2, 2));
    m.Q = MatrixFunction::constant(q);
    m.A = MatrixFunction::constant(Matrix::Ones(1, 2));
    m.x0_mean = Vector::Zero(2);
    m.p0 = Matrix::Identity(2, 2);
    const auto rep = validate_model(m, unit_grid());
    EXPECT_TRUE(rep.failed("Q PSD"));
    EXPECT_FALSE(rep.failed("R invertible"));
}

TEST(ValidateModel, ZeroObservationMatrixEverywhereFails) {
    auto m = constant_mean_model();
    m.A = MatrixFunction::scalar(0.0);
    EXPECT_TRUE(validate_model(m, unit_grid()).failed("A nonzero"));
    // Zero on part of the interval only is allowed.
    m.A = MatrixFunction::piecewise({0.0, 0.5}, {Matrix::Constant(1, 1, 0.0), Matrix::Constant(1, 1, 1.0)});
    EXPECT_FALSE(validate_model(m, unit_grid()).failed("A nonzero"));
}

TEST(ValidateModel, ReportsSampleTimesOutsideHorizon) {
    const auto rep = validate_model(constant_mean_model(1.0, 1.0), {0.0, 2.0});
    EXPECT_TRUE(rep.failed("sample_times"));
}

TEST(ValidateModel, IsPure) {
    auto m = constant_mean_model();
    m.R = MatrixFunction::piecewise({0.0, 0.5}, {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 0.0)});
    const auto a = validate_model(m, unit_grid());
    const auto b = validate_model(m, unit_grid());
    ASSERT_EQ(a.issues.size(), b.issues.size());
    for (std::size_t i = 0; i < a.issues.size(); ++i) {
        EXPECT_EQ(a.issues[i].check, b.issues[i].check);
        EXPECT_EQ(a.issues[i].message, b.issues[i].message);
        EXPECT_EQ(a.issues[i].time, b.issues[i].time);
    }
}

TEST(MatrixFunction, PiecewiseLookup) {
    auto f = MatrixFunction::piecewise({0.0, 1.0, 2.0}, {Matrix::Constant(1, 1, 1.0), Matrix::Constant(1, 1, 2.0),
                                                         Matrix::Constant(1, 1, 3.0)});
    EXPECT_EQ(f(0.0)(0, 0), 1.0);
    EXPECT_EQ(f(0.999)(0, 0), 1.0);
    EXPECT_EQ(f(1.0)(0, 0), 2.0);
    EXPECT_EQ(f(5.0)(0, 0), 3.0);
    EXPECT_THROW(MatrixFunction::piecewise({1.0, 0.0}, {Matrix::Ones(1, 1), Matrix::Ones(1, 1)}), DomainError);
}

TEST(Curvature, QuadraticCost) {
    const RunningCost rho = [](const Vector& x) { return x.squaredNorm(); };
    EXPECT_NEAR(curvature_from_rho(rho, 1)(0, 0), 1.0, 1e-6);
}

TEST(Curvature, OneMinusCosine) {
    // Second derivative of 1 - cos x at 0 is 1, so Gamma = 1/2.
    const RunningCost rho = [](const Vector& x) { return 1.0 - std::cos(x(0)); };
    EXPECT_NEAR(curvature_from_rho(rho, 1)(0, 0), 0.5, 1e-6);
}

TEST(Curvature, QuarticCostIsDegenerate) {
    const RunningCost rho = [](const Vector& x) { return std::pow(x(0), 4); };
    EXPECT_THROW(curvature_from_rho(rho, 1), NumericalError);
}

TEST(Curvature, RecoversQuadraticFormsProperty) {
    std::mt19937_64 rng(11);
    std::normal_distribution<double> n01;
    const double h = 1e-4;
    for (int trial = 0; trial < 200; ++trial) {
        const int d = 1 + trial % 4;
        Matrix b(d, d);
        for (int i = 0; i < d; ++i)
            for (int j = 0; j < d; ++j) b(i, j) = n01(rng);
        const Matrix g = b * b.transpose() + 0.1 * Matrix::Identity(d, d);
        const RunningCost rho = [g](const Vector& x) { return x.dot(g * x); };
        const Matrix est = curvature_from_rho(rho, d, {h, 1e-10});
        EXPECT_LE((est - g).norm(), 10.0 * h * h * g.norm()) << "trial " << trial;
    }
}

TEST(PenaltySpec, Validation) {
    EXPECT_NO_THROW(PenaltySpec::quadratic(1e-4, 1.0).validate());
    EXPECT_THROW(PenaltySpec::quadratic(-1.0, 1.0).validate(), DomainError);
    EXPECT_THROW(PenaltySpec::quadratic(1.0, -1.0).validate(), DomainError);
    auto p = PenaltySpec::quadratic(1.0, 1.0);
    p.rho = [](const Vector&) { return 1.0; };
    EXPECT_THROW(p.validate(), DomainError);
}

TEST(BernoulliModel, Validation) {
    EXPECT_NO_THROW((BernoulliModel{0.5, 1000, 0.01}.validate()));
    EXPECT_THROW((BernoulliModel{1.0, 1000, 0.01}.validate()), DomainError);
    EXPECT_THROW((BernoulliModel{0.5, 5, 0.01}.validate()), DomainError);
    EXPECT_THROW((BernoulliModel{0.5, 1000, 1.0}.validate()), DomainError);
    EXPECT_EQ((BernoulliModel{0.5, 1000000, 0.01}.burn_in()), 10000);
}
