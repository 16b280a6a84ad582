// Experiment drivers behind the command-line tool. Each writes summary.json
// plus CSV detail files into one output directory; all numerics live in the
// library modules.
#pragma once

#include <filesystem>
#include <iostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchband/bernoulli.hpp"
#include "switchband/config.hpp"
#include "switchband/dp_oracle.hpp"
#include "switchband/io.hpp"
#include "switchband/kalman.hpp"
#include "switchband/policy.hpp"
#include "switchband/simulate.hpp"

namespace switchband {

using ojson = nlohmann::ordered_json;

struct RunContext {
    std::filesystem::path out_dir;
    unsigned threads = 0;
    std::ostream* console = &std::cout;
};

namespace detail {

inline std::string file(const RunContext& ctx, const std::string& name) { return (ctx.out_dir / name).string(); }

inline ojson matrix_json(const Matrix& m) {
    ojson rows = ojson::array();
    for (Eigen::Index r = 0; r < m.rows(); ++r) {
        ojson row = ojson::array();
        for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
        rows.push_back(row);
    }
    return rows;
}

inline ojson summary_head(const ExperimentConfig& cfg) {
    ojson j;
    j["meta"] = cfg.metadata().json();
    return j;
}

inline ojson ensemble_json(const EnsembleSummary& s) {
    ojson j;
    j["lambda"] = s.lambda;
    j["n_paths"] = s.n_paths;
    j["mean_total_cost"] = s.mean_total;
    j["se_total_cost"] = s.se_total;
    j["mean_running_cost"] = s.mean_running;
    j["mean_switch_cost"] = s.mean_switch_cost;
    j["mean_switch_count"] = s.mean_switch_count;
    return j;
}

inline void write_ledgers(const RunContext& ctx, const RunMetadata& meta, const std::vector<CostLedger>& ledgers) {
    CsvWriter csv(file(ctx, "ledgers.csv"), meta,
                  {"path", "switch_count", "running_cost", "switch_cost", "total_cost"});
    for (std::size_t i = 0; i < ledgers.size(); ++i) {
        const auto& l = ledgers[i];
        csv.row({static_cast<double>(i), static_cast<double>(l.switch_count), l.running_cost, l.switch_cost,
                 l.total()});
    }
}

inline void write_density(const RunContext& ctx, const RunMetadata& meta, const DensityReport& d) {
    CsvWriter csv(file(ctx, "density.csv"), meta, {"bin_center", "empirical", "reference"});
    for (std::size_t b = 0; b < d.bin_centers.size(); ++b) csv.row({d.bin_centers[b], d.empirical[b], d.reference[b]});
}

inline ojson density_json(const DensityReport& d) {
    ojson j;
    j["samples"] = d.samples;
    j["l1_distance"] = d.l1;
    j["mean"] = d.mean;
    j["variance"] = d.variance;
    j["reference_variance"] = 1.0 / 6.0;
    return j;
}

/// Increments from CSV as a path on a uniform grid.
inline SimulatedPath path_from_increments(const std::vector<ObservationIncrement>& inc, double& dt) {
    if (inc.size() < 2) throw ConfigError("observation file needs at least 2 rows");
    dt = inc[0].t;
    if (!(dt > 0.0)) throw ConfigError("observation file: first time must be > 0 (end of first increment)");
    SimulatedPath path;
    path.dt = dt;
    path.dy.resize(inc[0].dy.size(), static_cast<Eigen::Index>(inc.size()));
    for (std::size_t k = 0; k < inc.size(); ++k) {
        const double expected = static_cast<double>(k + 1) * dt;
        if (std::abs(inc[k].t - expected) > 1e-9 * std::max(1.0, expected)) {
            throw ConfigError("observation file: policy runs need a uniform time grid");
        }
        path.dy.col(static_cast<Eigen::Index>(k)) = inc[k].dy;
    }
    return path;
}

}  // namespace detail

inline void run_filter_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    std::vector<ObservationIncrement> stream;
    if (!cfg.simulation.input_csv.empty()) {
        stream = read_increment_csv(cfg.simulation.input_csv, cfg.model.obs_dim());
    } else {
        const SimulationGrid grid = make_grid(cfg.model, cfg.simulation.dt);
        const SimulatedPath path = simulate_path(grid, derive_seed(cfg.simulation.seed, 0));
        for (Eigen::Index k = 0; k < path.dy.cols(); ++k) {
            stream.push_back({static_cast<double>(k + 1) * path.dt, path.dy.col(k)});
        }
    }
    const auto states = run_filter(cfg.model, stream);
    const bool scalar = cfg.model.is_scalar();
    std::vector<ImpliedTestSize> tests;
    if (scalar) tests = implied_test_size_path(cfg.model, states, cfg.penalty);

    const Eigen::Index d = cfg.model.state_dim(), m = cfg.model.obs_dim();
    std::vector<std::string> cols = {"t"};
    for (Eigen::Index i = 0; i < d; ++i) cols.push_back("x_hat_" + std::to_string(i + 1));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) cols.push_back("p_" + std::to_string(i + 1) + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < d; ++i)
        for (Eigen::Index j = 0; j < d; ++j) cols.push_back("sigma_" + std::to_string(i + 1) + std::to_string(j + 1));
    for (Eigen::Index i = 0; i < m; ++i) cols.push_back("innovation_" + std::to_string(i + 1));
    if (scalar) {
        cols.push_back("band_halfwidth");
        cols.push_back("critical_value");
        cols.push_back("test_size");
    }
    CsvWriter csv(detail::file(ctx, "filter.csv"), meta, cols);
    Vector innovation_sum = Vector::Zero(m);
    for (std::size_t k = 0; k < states.size(); ++k) {
        const auto& s = states[k];
        sigma_of_t(cfg.model, s);
        std::vector<double> row = {s.t};
        for (Eigen::Index i = 0; i < d; ++i) row.push_back(s.x_hat(i));
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) row.push_back(s.p(i, j));
        for (Eigen::Index i = 0; i < d; ++i)
            for (Eigen::Index j = 0; j < d; ++j) row.push_back(s.sigma(i, j));
        for (Eigen::Index i = 0; i < m; ++i) row.push_back(s.innovation(i));
        if (scalar) {
            row.push_back(band_halfwidth(cfg.model, s, cfg.penalty));
            row.push_back(tests[k].critical_value);
            row.push_back(tests[k].test_size);
        }
        csv.row(row);
        if (k > 0) innovation_sum += s.innovation;
    }
    ojson j = detail::summary_head(cfg);
    j["steps"] = stream.size();
    j["final_time"] = states.back().t;
    j["final_x_hat"] = std::vector<double>(states.back().x_hat.data(), states.back().x_hat.data() + d);
    j["final_p"] = detail::matrix_json(states.back().p);
    j["final_sigma"] = detail::matrix_json(states.back().sigma);
    j["mean_innovation_per_unit_time"] =
        std::vector<double>(innovation_sum.data(), innovation_sum.data() + m);
    for (auto& v : j["mean_innovation_per_unit_time"]) v = v.get<double>() / states.back().t;
    write_json(detail::file(ctx, "summary.json"), j);
}

inline void run_simulate_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    ojson j = detail::summary_head(cfg);
    if (!cfg.simulation.input_csv.empty()) {
        double dt = 0.0;
        const auto path = detail::path_from_increments(
            read_increment_csv(cfg.simulation.input_csv, cfg.model.obs_dim()), dt);
        LinearGaussianModel model = cfg.model;
        model.horizon = static_cast<double>(path.dy.cols()) * dt;
        const SimulationGrid grid = make_grid(model, dt);
        const PolicySchedule pol = asymptotic_policy(grid, cfg.penalty);
        const CostLedger led = run_policy(grid, cfg.penalty, pol, path, {cfg.simulation.xi_stride});
        detail::write_ledgers(ctx, meta, {led});
        CsvWriter sw(detail::file(ctx, "switches.csv"), meta, {"switch_time"});
        for (double t : led.switch_times) sw.row({t});
        j["source"] = cfg.simulation.input_csv;
        j["ensemble"] = detail::ensemble_json(summarize(std::span<const CostLedger>(&led, 1)));
        write_json(detail::file(ctx, "summary.json"), j);
        return;
    }
    const SimulationGrid grid = make_grid(cfg.model, cfg.simulation.dt);
    const double lambda = cfg.penalty.lambda;
    const auto ledgers = run_ensemble(grid, cfg.penalty, std::span<const double>(&lambda, 1),
                                      {cfg.simulation.n_paths, cfg.simulation.seed, ctx.threads,
                                       cfg.simulation.xi_stride});
    detail::write_ledgers(ctx, meta, ledgers[0]);
    const PolicySchedule pol = asymptotic_policy(grid, cfg.penalty);
    j["ensemble"] = detail::ensemble_json(summarize(ledgers[0]));
    j["mean_band"] = mean_band(grid, pol);
    if (pol.scalar) j["expected_switch_count"] = expected_switch_count(grid, pol);
    if (cfg.simulation.xi_stride > 0) {
        std::size_t total = 0;
        for (const auto& l : ledgers[0]) total += l.xi_samples.size();
        if (total >= DensityOptions{}.min_samples) {
            j["density"] = detail::density_json(stationary_density(std::span<const CostLedger>(ledgers[0])));
        }
    }
    write_json(detail::file(ctx, "summary.json"), j);
}

inline void run_scaling_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    const SimulationGrid grid = make_grid(cfg.model, cfg.simulation.dt);
    const ScalingReport rep = scaling_study(grid, cfg.penalty, cfg.simulation.lambda_grid,
                                            {cfg.simulation.n_paths, cfg.simulation.seed, ctx.threads, 0});
    CsvWriter csv(detail::file(ctx, "scaling.csv"), meta,
                  {"lambda", "mean_band", "mean_total_cost", "se_total_cost", "mean_switch_count",
                   "expected_switch_count"});
    for (std::size_t i = 0; i < rep.lambda_grid.size(); ++i) {
        csv.row({rep.lambda_grid[i], rep.mean_band[i], rep.mean_total_cost[i], rep.se_total_cost[i],
                 rep.mean_switch_count[i], rep.expected_switch_count[i]});
    }
    ojson j = detail::summary_head(cfg);
    j["lambda_grid"] = rep.lambda_grid;
    j["mean_band"] = rep.mean_band;
    j["mean_total_cost"] = rep.mean_total_cost;
    j["se_total_cost"] = rep.se_total_cost;
    j["mean_switch_count"] = rep.mean_switch_count;
    j["band_slope"] = rep.band_fit.slope;
    j["band_slope_se"] = rep.band_fit.slope_se;
    j["cost_slope"] = rep.cost_fit.slope;
    j["cost_slope_se"] = rep.cost_fit.slope_se;
    write_json(detail::file(ctx, "summary.json"), j);
}

inline TrackerResult run_configured_tracker(const ExperimentConfig& cfg, bool record_trajectory) {
    TrackerOptions opt;
    opt.live_sigma = cfg.bernoulli.live_sigma;
    opt.record_trajectory = record_trajectory;
    if (!cfg.bernoulli.input_csv.empty()) {
        const auto obs = read_binary_csv(cfg.bernoulli.input_csv);
        BernoulliModel model = cfg.bernoulli.model;
        if (static_cast<long>(obs.size()) < model.horizon) model.horizon = static_cast<long>(obs.size());
        return run_tracker(model, cfg.penalty, std::span<const int>(obs), opt);
    }
    return run_tracker(cfg.bernoulli.model, cfg.penalty, derive_seed(cfg.simulation.seed, 0), opt);
}

inline void run_bernoulli_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    const TrackerResult r = run_configured_tracker(cfg, true);
    {
        CsvWriter csv(detail::file(ctx, "trajectory.csv"), meta,
                      {"t", "p_hat", "theta", "b_t", "xi", "switched", "cost_running", "cost_switch"});
        const std::size_t stride = cfg.bernoulli.trajectory_stride;
        for (std::size_t i = 0; i < r.trajectory.size(); ++i) {
            const auto& row = r.trajectory[i];
            if (i % stride != 0 && !row.switched) continue;
            csv.row({static_cast<double>(row.t), row.p_hat, row.theta, row.b, row.xi, row.switched ? 1.0 : 0.0,
                     row.cost_running, row.cost_switch});
        }
    }
    const double gamma = cfg.penalty.gamma_scalar();
    const double lambda = cfg.penalty.lambda;
    const long horizon = r.trajectory.empty() ? r.t_star : r.trajectory.back().t;
    const double steps = static_cast<double>(horizon - r.t_star);
    ojson j = detail::summary_head(cfg);
    j["t_star"] = r.t_star;
    j["horizon"] = horizon;
    j["sigma_star"] = r.sigma_star;
    j["chi"] = optimal_band(1.0, r.sigma_star, lambda, gamma).chi;
    j["switch_count"] = r.switch_count;
    j["expected_switches"] = r.expected_switches;
    j["mean_inter_switch_time"] = r.interval_count ? r.observed_interval_sum / static_cast<double>(r.interval_count) : 0.0;
    j["predicted_inter_switch_time"] = r.interval_count ? r.predicted_interval_sum / static_cast<double>(r.interval_count) : 0.0;
    j["running_cost"] = r.running_cost;
    j["switch_cost"] = r.switch_cost;
    j["total_cost"] = r.total_cost();
    j["mean_cost_per_step"] = steps > 0 ? r.total_cost() / steps : 0.0;
    j["predicted_cost_per_step"] = steps > 0 ? r.predicted_cost / steps : 0.0;
    // Band constants: discrete-time (6 lambda / Gamma)^{1/4} and the
    // continuous-time (2 lambda / Gamma)^{1/4}, reported side by side.
    j["band_constant_discrete"] = std::pow(6.0 * lambda / gamma, 0.25);
    j["band_constant_continuous"] = std::pow(2.0 * lambda / gamma, 0.25);
    if (!r.trajectory.empty()) {
        const auto& last = r.trajectory.back();
        const double c = last.b * std::sqrt(static_cast<double>(last.t)) / r.sigma_star;
        j["implied_critical_value"] = c;
        j["implied_test_size"] = two_sided_size(c);
    }
    write_json(detail::file(ctx, "summary.json"), j);
}

inline void run_density_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    DensityReport d;
    DensityOptions opt;
    opt.bins = cfg.density.bins;
    if (cfg.density.source == "bernoulli") {
        const TrackerResult r = run_configured_tracker(cfg, false);
        d = stationary_density(std::span<const double>(r.xi_samples), opt);
    } else {
        const SimulationGrid grid = make_grid(cfg.model, cfg.simulation.dt);
        const double lambda = cfg.penalty.lambda;
        const std::size_t stride = cfg.simulation.xi_stride > 0 ? cfg.simulation.xi_stride : 1;
        const auto ledgers = run_ensemble(grid, cfg.penalty, std::span<const double>(&lambda, 1),
                                          {cfg.simulation.n_paths, cfg.simulation.seed, ctx.threads, stride});
        d = stationary_density(std::span<const CostLedger>(ledgers[0]), opt);
    }
    detail::write_density(ctx, meta, d);
    ojson j = detail::summary_head(cfg);
    j["source"] = cfg.density.source;
    j["density"] = detail::density_json(d);
    write_json(detail::file(ctx, "summary.json"), j);
}

inline void run_dp_oracle_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    const auto meta = cfg.metadata();
    const double gamma = cfg.penalty.gamma_scalar();
    std::vector<double> lambdas = cfg.dp.lambdas;
    std::vector<OracleComparison> asym(lambdas.size()), appendix(lambdas.size());
    std::vector<double> bellman(lambdas.size()), thresholds(lambdas.size());
    parallel_for(lambdas.size(), ctx.threads, [&](std::size_t i) {
        const auto p = build_problem(cfg.dp.step_variance, lambdas[i], gamma, cfg.dp.n_grid, cfg.dp.horizon,
                                     cfg.dp.dt, {cfg.dp.radius});
        const auto sol = solve_backward(p);
        asym[i] = compare_to_asymptotic(p, sol);
        const double w6 = std::pow(p.sigma(), 0.25) * std::pow(6.0 * lambdas[i] / gamma, 0.25);
        appendix[i] = compare_to_asymptotic(p, sol, std::span<const double>(&w6, 1));
        bellman[i] = bellman_residual(p, sol);

        const std::string tag = std::to_string(i);
        CsvWriter th(detail::file(ctx, "thresholds_" + tag + ".csv"), meta, {"step", "threshold", "threshold_neg"});
        for (std::size_t t = 0; t < sol.threshold.size(); ++t) {
            th.row({static_cast<double>(t), sol.threshold[t], sol.threshold_neg[t]});
        }
        CsvWriter v0(detail::file(ctx, "value0_" + tag + ".csv"), meta, {"e", "value"});
        for (std::size_t k = 0; k < p.size(); ++k) {
            v0.row({p.grid[k], sol.value(0, static_cast<Eigen::Index>(k))});
        }
    });
    ojson j = detail::summary_head(cfg);
    ojson runs = ojson::array();
    for (std::size_t i = 0; i < lambdas.size(); ++i) {
        ojson r;
        r["lambda"] = lambdas[i];
        r["files"] = {"thresholds_" + std::to_string(i) + ".csv", "value0_" + std::to_string(i) + ".csv"};
        r["oracle_threshold_mid"] = asym[i].oracle_threshold;
        r["asymptotic_band"] = asym[i].asymptotic_width;
        r["threshold_rel_error"] = asym[i].threshold_rel_error;
        r["oracle_value"] = asym[i].oracle_value;
        r["asymptotic_policy_value"] = asym[i].policy_value;
        r["cost_rel_error"] = asym[i].cost_rel_error;
        r["appendix_band"] = appendix[i].asymptotic_width;
        r["appendix_threshold_rel_error"] = appendix[i].threshold_rel_error;
        r["appendix_policy_value"] = appendix[i].policy_value;
        r["bellman_residual"] = bellman[i];
        runs.push_back(r);
    }
    j["runs"] = runs;
    write_json(detail::file(ctx, "summary.json"), j);
}

inline ojson test_size_json(const ExperimentConfig& cfg) {
    const double gamma = cfg.penalty.gamma_scalar();
    const double lambda = cfg.alpha ? cost_from_test_size(*cfg.alpha, gamma) : cfg.penalty.lambda;
    const TestMapping m = test_size_from_cost(lambda, gamma);
    ojson j = detail::summary_head(cfg);
    j["lambda"] = lambda;
    j["gamma"] = gamma;
    j["c"] = m.critical_value;
    j["alpha"] = m.test_size;
    j["confidence_level"] = m.confidence_level();
    return j;
}

/// Dispatch on cfg.kind. Writes config.json (the effective config) and the
/// experiment's outputs into ctx.out_dir.
inline void run_experiment(const ExperimentConfig& cfg, const RunContext& ctx) {
    std::filesystem::create_directories(ctx.out_dir);
    {
        ojson echo = detail::summary_head(cfg);
        echo["config"] = ojson::parse(cfg.effective.dump());
        write_json(detail::file(ctx, "config.json"), echo);
    }
    if (cfg.kind == "filter") return run_filter_experiment(cfg, ctx);
    if (cfg.kind == "simulate") return run_simulate_experiment(cfg, ctx);
    if (cfg.kind == "scaling") return run_scaling_experiment(cfg, ctx);
    if (cfg.kind == "density") return run_density_experiment(cfg, ctx);
    if (cfg.kind == "bernoulli") return run_bernoulli_experiment(cfg, ctx);
    if (cfg.kind == "dp-oracle") return run_dp_oracle_experiment(cfg, ctx);
    if (cfg.kind == "test-size") {
        const ojson j = test_size_json(cfg);
        write_json(detail::file(ctx, "summary.json"), j);
        *ctx.console << j.dump(2) << '\n';
        return;
    }
    throw ConfigError("experiment: unknown kind '" + cfg.kind + "'");
}

}  // namespace switchband
