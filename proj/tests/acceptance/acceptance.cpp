// Acceptance suite: one PASS/FAIL line per criterion. Exit status is the
// number of failed criteria.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "switchband/switchband.hpp"

using namespace switchband;
namespace fs = std::filesystem;

namespace {

struct Outcome {
    bool pass;
    std::string detail;
};

int failures = 0;

void criterion(int id, const std::string& name, const std::function<Outcome()>& body) {
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (!o.pass) ++failures;
    std::printf("%s  %2d  %-28s %s  [%.2f s]\n", o.pass ? "PASS" : "FAIL", id, name.c_str(), o.detail.c_str(), secs);
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0, double d = 0.0) {
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c, d);
    return buf;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Bernoulli regime shared by criteria 7-9.
const TrackerResult& bernoulli_run() {
    static const TrackerResult r = [] {
        const BernoulliModel model{0.5, 1000000, 0.01};
        return run_tracker(model, PenaltySpec::quadratic(1e-6, 1.0), std::uint64_t{1}, {false, false, true});
    }();
    return r;
}

}  // namespace

int main() {
    criterion(1, "filter covariance", [] {
        const auto model = constant_mean_model(1.0, 10.0);
        FilterState s = initial_state(model);
        double worst = 0.0;
        for (long k = 1; k <= 9000; ++k) {
            s.p = riccati_step(model, s, 1e-3);
            s.t = static_cast<double>(k) * 1e-3;
            if (k == 1000 || k == 5000 || k == 9000) worst = std::max(worst, std::abs(s.p(0, 0) - closed_form_P(1.0, s.t)));
        }
        return Outcome{worst < 1e-6, fmt("max |P - 1/(1+t)| at t=1,5,9: %.3g (tol 1e-6)", worst)};
    });

    criterion(2, "band factorizations", [] {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> logu(-4.0, 2.0);
        double worst = 0.0;
        for (int i = 0; i < 10000; ++i) {
            const double p = std::pow(10.0, logu(rng)), a = std::pow(10.0, logu(rng)), r = std::pow(10.0, logu(rng));
            const double lam = std::pow(10.0, 2.0 * logu(rng)), g = std::pow(10.0, logu(rng));
            const auto b = band_factorizations(p, a, r, lam, g);
            worst = std::max(worst, std::abs(b.via_sigma - b.via_variance) / std::max(1.0, b.via_sigma));
        }
        return Outcome{worst < 1e-10, fmt("max discrepancy over 1e4 draws: %.3g (tol 1e-10)", worst)};
    });

    criterion(3, "region matrix residual", [] {
        std::mt19937_64 rng(3);
        std::uniform_real_distribution<double> u(0.01, 10.0);
        std::normal_distribution<double> n01;
        double worst = 0.0;
        for (int i = 0; i < 1000; ++i) {
            const double g = u(rng), s = u(rng);
            const Matrix m = Matrix::Constant(1, 1, solve_m_scalar(g, s));
            worst = std::max(worst, m_equation_residual(Matrix::Constant(1, 1, g), Matrix::Constant(1, 1, s), m).norm());
        }
        int converged = 0;
        for (int i = 0; i < 300; ++i) {
            const int d = 2 + i % 2;
            Matrix b1(d, d), b2(d, d);
            for (int r = 0; r < d; ++r)
                for (int c = 0; c < d; ++c) b1(r, c) = n01(rng), b2(r, c) = n01(rng);
            const Matrix g = b1 * b1.transpose() + 0.2 * Matrix::Identity(d, d);
            const Matrix s = b2 * b2.transpose() + 0.2 * Matrix::Identity(d, d);
            const auto rep = solve_m_matrix(g, s);
            if (!rep.converged) continue;
            ++converged;
            worst = std::max(worst, m_equation_residual(g, s, rep.m).norm());
        }
        const bool flagged = !solve_m_matrix(Matrix::Identity(2, 2), Matrix::Identity(2, 2)).converged;
        return Outcome{worst < 1e-10 && flagged,
                       fmt("max residual %.3g (tol 1e-10) over 1000 scalar + %g converged matrix cases "
                           "(of 300 with d >= 2); ",
                           worst, converged) +
                           "isotropic d=2 flagged: " + (flagged ? "yes" : "no")};
    });

    criterion(4, "test-size round trip", [] {
        double worst = 0.0;
        for (double alpha : {0.01, 0.05, 0.1, 0.317311}) {
            worst = std::max(worst, std::abs(test_size_from_cost(cost_from_test_size(alpha, 1.0), 1.0).test_size - alpha));
        }
        return Outcome{worst < 1e-10, fmt("max |alpha' - alpha|: %.3g (tol 1e-10)", worst)};
    });

    const std::vector<double> lambdas = {1e-3, 1e-4, 1e-5, 1e-6};
    const auto grid = make_grid(constant_mean_model(1.0, 50.0), 1e-3);

    criterion(5, "band scaling lambda^1/4", [&] {
        std::vector<double> bands;
        for (double lam : lambdas) bands.push_back(mean_band(grid, asymptotic_policy(grid, PenaltySpec::quadratic(lam, 1.0))));
        const double slope = fit_loglog(lambdas, bands).slope;
        return Outcome{std::abs(slope - 0.25) < 1e-6, fmt("slope %.9f (target 0.25 +- 1e-6)", slope)};
    });

    criterion(6, "cost scaling lambda^1/2", [&] {
        const auto rep = scaling_study(grid, PenaltySpec::quadratic(1.0, 1.0), lambdas, {1000, 1, 0, 0});
        const double slope = rep.cost_fit.slope;
        return Outcome{std::abs(slope - 0.5) <= 0.05,
                       fmt("slope %.4f +- %.4f (target 0.5 +- 0.05); costs %.4g .. %.4g", slope, rep.cost_fit.slope_se,
                           rep.mean_total_cost.front(), rep.mean_total_cost.back())};
    });

    criterion(7, "triangular stationary law", [] {
        const auto& r = bernoulli_run();
        const auto d = stationary_density(std::span<const double>(r.xi_samples));
        const bool ok = d.l1 < 0.05 && std::abs(d.variance - 1.0 / 6.0) <= 0.01;
        return Outcome{ok, fmt("L1 %.4f (tol 0.05), variance %.4f (target 0.1667 +- 0.01), %g samples", d.l1, d.variance,
                               static_cast<double>(d.samples))};
    });

    criterion(8, "hitting time", [] {
        const auto& r = bernoulli_run();
        const double observed = r.observed_interval_sum / static_cast<double>(r.interval_count);
        const double predicted = r.predicted_interval_sum / static_cast<double>(r.interval_count);
        const double rel = std::abs(observed - predicted) / predicted;
        return Outcome{rel < 0.10, fmt("mean interval %.2f vs predicted %.2f (rel %.3f, tol 0.10) over %g switches",
                                       observed, predicted, rel, static_cast<double>(r.interval_count))};
    });

    criterion(9, "long-run cost", [] {
        const auto& r = bernoulli_run();
        const double observed = r.running_cost + r.switch_cost;
        const double rel = std::abs(observed - r.predicted_cost) / r.predicted_cost;
        return Outcome{rel < 0.10, fmt("total cost %.4g vs predicted %.4g (rel %.3f, tol 0.10)", observed,
                                       r.predicted_cost, rel)};
    });

    criterion(10, "oracle convergence", [] {
        std::string detail;
        bool ok = true;
        double previous = std::numeric_limits<double>::infinity();
        for (double lam : {1e-2, 1e-4, 1e-6}) {
            const auto p = build_problem(1e-4, lam, 1.0, 201, 10000, 1e-4);
            const auto sol = solve_backward(p);
            const auto cmp = compare_to_asymptotic(p, sol);
            ok = ok && cmp.threshold_rel_error < previous && cmp.oracle_value <= cmp.policy_value;
            previous = cmp.threshold_rel_error;
            detail += fmt("lambda=%.0e err=%.3f V*=%.4g<=%.4g; ", lam, cmp.threshold_rel_error, cmp.oracle_value,
                          cmp.policy_value);
        }
        return Outcome{ok, detail};
    });

    criterion(11, "byte-identical reruns", [] {
        const fs::path root = fs::temp_directory_path() / "switchband-acceptance";
        fs::remove_all(root);
        const std::vector<std::string> runs = {
            "bernoulli --set bernoulli.T=20000 --set penalty.lambda=1e-5 --seed 4",
            "scaling --set model.T=2 --set simulation.n_paths=50 --seed 2",
            "filter --set model.T=1 --seed 9",
        };
        std::size_t files = 0, mismatches = 0;
        for (std::size_t i = 0; i < runs.size(); ++i) {
            const auto a = root / (std::to_string(i) + "a"), b = root / (std::to_string(i) + "b");
            for (const auto& [dir, threads] : {std::pair{a, 1}, std::pair{b, 4}}) {
                const std::string cmd = std::string(SWITCHBAND_CLI_PATH) + " " + runs[i] + " --threads " +
                                        std::to_string(threads) + " --out " + dir.string() + " > /dev/null 2>&1";
                if (std::system(cmd.c_str()) != 0) return Outcome{false, "command failed: " + cmd};
            }
            for (const auto& entry : fs::directory_iterator(a)) {
                ++files;
                if (slurp(entry.path()) != slurp(b / entry.path().filename())) ++mismatches;
            }
        }
        return Outcome{mismatches == 0 && files > 0,
                       fmt("%g output files compared, %g differ", static_cast<double>(files), static_cast<double>(mismatches))};
    });

    std::printf("%d of 11 criteria failed\n", failures);
    return failures;
}
