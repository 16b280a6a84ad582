// Experiment configuration: JSON schema, defaults, `key=value` overrides,
// and validation against each module's preconditions.
//
// {
//   "experiment": "filter|simulate|scaling|density|bernoulli|dp-oracle|test-size",
//   "model":      { "F": .., "A": .., "Q": .., "R": .., "x0_mean": .., "p0": .., "T": 50 },
//   "penalty":    { "lambda": 1e-4, "gamma": 1 },
//   "simulation": { "dt": .., "n_paths": .., "seed": 0, "lambda_grid": [..],
//                   "xi_stride": 0, "input_csv": "" },
//   "bernoulli":  { "p_true": 0.5, "T": 1e6, "burn_in_fraction": 0.01,
//                   "live_sigma": false, "input_csv": "", "trajectory_stride": 1 },
//   "density":    { "source": "bernoulli|continuous", "bins": 50 },
//   "dp":         { "step_variance": 1e-4, "dt": 1e-4, "n_grid": 201,
//                   "horizon": 10000, "lambdas": [..], "radius": 0 },
//   "test_size":  { "alpha": .. },
//   "output":     { "directory": "runs/example" }
// }
//
// Matrices are a number (1 x 1), nested row arrays, or a piecewise-constant
// table {"times": [..], "values": [..]}. Vectors are a number or a flat array.
#pragma once

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "switchband/errors.hpp"
#include "switchband/io.hpp"
#include "switchband/model.hpp"
#include "switchband/simulate.hpp"

namespace switchband {

using json = nlohmann::json;

inline const std::vector<std::string>& experiment_kinds() {
    static const std::vector<std::string> kinds = {"filter",    "simulate",  "scaling",  "density",
                                                   "bernoulli", "dp-oracle", "test-size"};
    return kinds;
}

struct SimulationSection {
    double dt = 0.0;
    std::size_t n_paths = 100;
    std::uint64_t seed = 0;
    std::vector<double> lambda_grid;
    std::size_t xi_stride = 0;
    std::string input_csv;
};

struct BernoulliSection {
    BernoulliModel model;
    bool live_sigma = false;
    std::string input_csv;
    std::size_t trajectory_stride = 1;
};

struct DensitySection {
    std::string source = "bernoulli";
    std::size_t bins = 50;
};

struct DpSection {
    double step_variance = 1e-4;
    double dt = 1e-4;
    std::size_t n_grid = 201;
    long horizon = 10000;
    std::vector<double> lambdas;
    double radius = 0.0;
};

struct ExperimentConfig {
    std::string kind;
    LinearGaussianModel model;
    PenaltySpec penalty;
    SimulationSection simulation;
    BernoulliSection bernoulli;
    DensitySection density;
    DpSection dp;
    std::optional<double> alpha;
    std::string output_dir;  ///< from output.directory; not part of the hash

    json effective;  ///< fully defaulted config, as echoed next to outputs

    std::string hash() const { return hex64(fnv1a(effective.dump())); }
    RunMetadata metadata() const { return {kind, hash(), simulation.seed}; }
};

namespace detail {

[[noreturn]] inline void invalid(const std::string& field, const std::string& constraint) {
    throw ConfigError(field + ": " + constraint);
}

inline Matrix parse_matrix_value(const json& j, const std::string& field) {
    if (j.is_number()) return Matrix::Constant(1, 1, j.get<double>());
    if (j.is_array() && !j.empty() && j[0].is_array()) {
        const auto rows = static_cast<Eigen::Index>(j.size());
        const auto cols = static_cast<Eigen::Index>(j[0].size());
        Matrix m(rows, cols);
        for (Eigen::Index r = 0; r < rows; ++r) {
            const auto& row = j[static_cast<std::size_t>(r)];
            if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != cols) {
                invalid(field, "matrix rows must be arrays of equal length");
            }
            for (Eigen::Index c = 0; c < cols; ++c) {
                const auto& v = row[static_cast<std::size_t>(c)];
                if (!v.is_number()) invalid(field, "matrix entries must be numbers");
                m(r, c) = v.get<double>();
            }
        }
        return m;
    }
    if (j.is_array() && j.size() == 1 && j[0].is_number()) return Matrix::Constant(1, 1, j[0].get<double>());
    invalid(field, "expected a number or an array of row arrays");
}

inline MatrixFunction parse_matrix_function(const json& j, const std::string& field) {
    if (j.is_object()) {
        if (!j.contains("times") || !j.contains("values")) {
            invalid(field, "piecewise table needs 'times' and 'values'");
        }
        std::vector<double> times;
        std::vector<Matrix> values;
        for (const auto& t : j["times"]) {
            if (!t.is_number()) invalid(field, "times must be numbers");
            times.push_back(t.get<double>());
        }
        std::size_t i = 0;
        for (const auto& v : j["values"]) values.push_back(parse_matrix_value(v, field + ".values[" + std::to_string(i++) + "]"));
        try {
            return MatrixFunction::piecewise(std::move(times), std::move(values));
        } catch (const DomainError& e) {
            invalid(field, e.what());
        }
    }
    return MatrixFunction::constant(parse_matrix_value(j, field));
}

inline Vector parse_vector(const json& j, const std::string& field) {
    if (j.is_number()) return Vector::Constant(1, j.get<double>());
    if (j.is_array()) {
        Vector v(static_cast<Eigen::Index>(j.size()));
        for (std::size_t i = 0; i < j.size(); ++i) {
            if (!j[i].is_number()) invalid(field, "vector entries must be numbers");
            v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
        }
        return v;
    }
    invalid(field, "expected a number or an array");
}

template <typename T>
T get_number(const json& section, const std::string& key, const std::string& path) {
    const auto& v = section.at(key);
    if constexpr (std::is_same_v<T, bool>) {
        if (!v.is_boolean()) invalid(path + "." + key, "must be true or false");
        return v.get<bool>();
    } else {
        if (!v.is_number()) invalid(path + "." + key, "must be a number");
        const double d = v.get<double>();
        if constexpr (std::is_integral_v<T>) {
            if (d != std::floor(d)) invalid(path + "." + key, "must be an integer");
            if constexpr (std::is_unsigned_v<T>) {
                if (d < 0) invalid(path + "." + key, "must be >= 0");
            }
        }
        return static_cast<T>(d);
    }
}

inline std::vector<double> get_number_list(const json& section, const std::string& key, const std::string& path) {
    const auto& v = section.at(key);
    if (!v.is_array()) invalid(path + "." + key, "must be an array of numbers");
    std::vector<double> out;
    for (const auto& x : v) {
        if (!x.is_number()) invalid(path + "." + key, "must be an array of numbers");
        out.push_back(x.get<double>());
    }
    return out;
}

/// Fill `section[key]` with `value` if absent.
inline void default_to(json& section, const std::string& key, const json& value) {
    if (!section.contains(key) || section[key].is_null()) section[key] = value;
}

inline std::string line_context(const std::string& text, std::size_t byte) {
    std::size_t line = 1, col = 1;
    for (std::size_t i = 0; i < std::min(byte, text.size()); ++i) {
        if (text[i] == '\n') {
            ++line;
            col = 1;
        } else {
            ++col;
        }
    }
    std::ostringstream os;
    os << "line " << line << ", column " << col;
    return os.str();
}

}  // namespace detail

/// Parse JSON text, reporting syntax errors with line context.
inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ConfigError(origin + ": " + detail::line_context(text, e.byte > 0 ? e.byte - 1 : 0) +
                          ": JSON syntax error: " + e.what());
    }
}

inline json load_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_json_text(ss.str(), path);
}

/// Apply `a.b.c=value`; value parsed as JSON, else taken as a string.
inline void apply_override(json& root, const std::string& assignment) {
    const auto eq = assignment.find('=');
    if (eq == std::string::npos || eq == 0) {
        throw ConfigError("override '" + assignment + "': expected key=value");
    }
    const std::string key = assignment.substr(0, eq);
    const std::string raw = assignment.substr(eq + 1);
    json value;
    try {
        value = json::parse(raw);
    } catch (const json::parse_error&) {
        value = raw;
    }
    json* node = &root;
    std::stringstream ks(key);
    std::string part;
    std::vector<std::string> parts;
    while (std::getline(ks, part, '.')) parts.push_back(part);
    for (std::size_t i = 0; i + 1 < parts.size(); ++i) {
        json& child = (*node)[parts[i]];
        if (child.is_null()) child = json::object();
        if (!child.is_object()) throw ConfigError("override '" + key + "': '" + parts[i] + "' is not a section");
        node = &child;
    }
    (*node)[parts.back()] = value;
}

/// Validate and default a raw config document.
inline ExperimentConfig parse_config(json raw) {
    if (!raw.is_object()) throw ConfigError("config: top level must be a JSON object");
    ExperimentConfig cfg;

    if (!raw.contains("experiment") || !raw["experiment"].is_string()) {
        throw ConfigError("experiment: required string field");
    }
    cfg.kind = raw["experiment"].get<std::string>();
    const auto& kinds = experiment_kinds();
    if (std::find(kinds.begin(), kinds.end(), cfg.kind) == kinds.end()) {
        std::string list;
        for (const auto& k : kinds) list += (list.empty() ? "" : ", ") + k;
        throw ConfigError("experiment: unknown kind '" + cfg.kind + "'; valid kinds: " + list);
    }
    if (raw.contains("output")) {
        const auto& out = raw["output"];
        if (out.is_object() && out.contains("directory")) {
            if (!out["directory"].is_string()) detail::invalid("output.directory", "must be a string");
            cfg.output_dir = out["directory"].get<std::string>();
        }
        raw.erase("output");
    }

    // model: defaults give the constant-mean scalar model
    json& model = raw["model"];
    if (model.is_null()) model = json::object();
    if (!model.is_object()) throw ConfigError("model: must be an object");
    detail::default_to(model, "F", 0.0);
    detail::default_to(model, "A", 1.0);
    detail::default_to(model, "Q", 0.0);
    detail::default_to(model, "R", 1.0);
    detail::default_to(model, "x0_mean", 0.0);
    detail::default_to(model, "p0", 1.0);
    detail::default_to(model, "T", 1.0);
    cfg.model.F = detail::parse_matrix_function(model["F"], "model.F");
    cfg.model.A = detail::parse_matrix_function(model["A"], "model.A");
    cfg.model.Q = detail::parse_matrix_function(model["Q"], "model.Q");
    cfg.model.R = detail::parse_matrix_function(model["R"], "model.R");
    cfg.model.x0_mean = detail::parse_vector(model["x0_mean"], "model.x0_mean");
    cfg.model.p0 = detail::parse_matrix_value(model["p0"], "model.p0");
    cfg.model.horizon = detail::get_number<double>(model, "T", "model");
    if (!(cfg.model.horizon > 0.0)) detail::invalid("model.T", "must be > 0");

    json& pen = raw["penalty"];
    if (pen.is_null()) pen = json::object();
    detail::default_to(pen, "lambda", 0.0);
    detail::default_to(pen, "gamma", 1.0);
    const double lambda = detail::get_number<double>(pen, "lambda", "penalty");
    if (!(lambda >= 0.0)) detail::invalid("penalty.lambda", "lambda must be >= 0");
    const Matrix gamma = detail::parse_matrix_value(pen["gamma"], "penalty.gamma");
    if (gamma.rows() != gamma.cols() || !(min_eigenvalue(gamma) > 0.0) || !is_symmetric(gamma, 1e-10)) {
        detail::invalid("penalty.gamma", "Gamma must be symmetric positive definite");
    }
    cfg.penalty = PenaltySpec::quadratic(lambda, gamma);

    json& sim = raw["simulation"];
    if (sim.is_null()) sim = json::object();
    detail::default_to(sim, "dt", 1e-3 * cfg.model.horizon);
    detail::default_to(sim, "n_paths", 100);
    detail::default_to(sim, "seed", 0);
    detail::default_to(sim, "lambda_grid", json::array({1e-3, 1e-4, 1e-5, 1e-6}));
    detail::default_to(sim, "xi_stride", 0);
    detail::default_to(sim, "input_csv", "");
    cfg.simulation.dt = detail::get_number<double>(sim, "dt", "simulation");
    if (!(cfg.simulation.dt > 0.0)) detail::invalid("simulation.dt", "must be > 0");
    if (cfg.simulation.dt > cfg.model.horizon) detail::invalid("simulation.dt", "must not exceed model.T");
    cfg.simulation.n_paths = detail::get_number<std::size_t>(sim, "n_paths", "simulation");
    if (cfg.simulation.n_paths < 1) detail::invalid("simulation.n_paths", "must be >= 1");
    cfg.simulation.seed = detail::get_number<std::uint64_t>(sim, "seed", "simulation");
    cfg.simulation.lambda_grid = detail::get_number_list(sim, "lambda_grid", "simulation");
    cfg.simulation.xi_stride = detail::get_number<std::size_t>(sim, "xi_stride", "simulation");
    if (!sim["input_csv"].is_string()) detail::invalid("simulation.input_csv", "must be a string");
    cfg.simulation.input_csv = sim["input_csv"].get<std::string>();

    json& bern = raw["bernoulli"];
    if (bern.is_null()) bern = json::object();
    detail::default_to(bern, "p_true", 0.5);
    detail::default_to(bern, "T", 100000);
    detail::default_to(bern, "burn_in_fraction", 0.01);
    detail::default_to(bern, "live_sigma", false);
    detail::default_to(bern, "input_csv", "");
    detail::default_to(bern, "trajectory_stride", 1);
    cfg.bernoulli.model.p_true = detail::get_number<double>(bern, "p_true", "bernoulli");
    cfg.bernoulli.model.horizon = detail::get_number<long>(bern, "T", "bernoulli");
    cfg.bernoulli.model.burn_in_fraction = detail::get_number<double>(bern, "burn_in_fraction", "bernoulli");
    cfg.bernoulli.live_sigma = detail::get_number<bool>(bern, "live_sigma", "bernoulli");
    if (!bern["input_csv"].is_string()) detail::invalid("bernoulli.input_csv", "must be a string");
    cfg.bernoulli.input_csv = bern["input_csv"].get<std::string>();
    cfg.bernoulli.trajectory_stride = detail::get_number<std::size_t>(bern, "trajectory_stride", "bernoulli");
    if (cfg.bernoulli.trajectory_stride < 1) detail::invalid("bernoulli.trajectory_stride", "must be >= 1");

    json& dens = raw["density"];
    if (dens.is_null()) dens = json::object();
    detail::default_to(dens, "source", "bernoulli");
    detail::default_to(dens, "bins", 50);
    if (!dens["source"].is_string()) detail::invalid("density.source", "must be a string");
    cfg.density.source = dens["source"].get<std::string>();
    if (cfg.density.source != "bernoulli" && cfg.density.source != "continuous") {
        detail::invalid("density.source", "must be 'bernoulli' or 'continuous'");
    }
    cfg.density.bins = detail::get_number<std::size_t>(dens, "bins", "density");
    if (cfg.density.bins < 2) detail::invalid("density.bins", "must be >= 2");

    json& dp = raw["dp"];
    if (dp.is_null()) dp = json::object();
    detail::default_to(dp, "step_variance", 1e-4);
    detail::default_to(dp, "dt", 1e-4);
    detail::default_to(dp, "n_grid", 201);
    detail::default_to(dp, "horizon", 10000);
    detail::default_to(dp, "lambdas", json::array({1e-2, 1e-4, 1e-6}));
    detail::default_to(dp, "radius", 0.0);
    cfg.dp.step_variance = detail::get_number<double>(dp, "step_variance", "dp");
    cfg.dp.dt = detail::get_number<double>(dp, "dt", "dp");
    cfg.dp.n_grid = detail::get_number<std::size_t>(dp, "n_grid", "dp");
    cfg.dp.horizon = detail::get_number<long>(dp, "horizon", "dp");
    cfg.dp.lambdas = detail::get_number_list(dp, "lambdas", "dp");
    cfg.dp.radius = detail::get_number<double>(dp, "radius", "dp");
    if (!(cfg.dp.step_variance >= 0.0)) detail::invalid("dp.step_variance", "must be >= 0");
    if (!(cfg.dp.dt > 0.0)) detail::invalid("dp.dt", "must be > 0");
    if (cfg.dp.n_grid < 51 || cfg.dp.n_grid % 2 == 0) detail::invalid("dp.n_grid", "must be odd and >= 51");
    if (cfg.dp.horizon < 100) detail::invalid("dp.horizon", "must be >= 100");
    for (double l : cfg.dp.lambdas) {
        if (!(l >= 0.0)) detail::invalid("dp.lambdas", "lambda must be >= 0");
    }

    json& ts = raw["test_size"];
    if (ts.is_null()) ts = json::object();
    if (ts.contains("alpha") && !ts["alpha"].is_null()) {
        cfg.alpha = detail::get_number<double>(ts, "alpha", "test_size");
        if (!(*cfg.alpha > 0.0 && *cfg.alpha <= 1.0)) detail::invalid("test_size.alpha", "must lie in (0, 1]");
    }

    // Kind-specific preconditions.
    if (cfg.kind == "filter" || cfg.kind == "simulate" || cfg.kind == "scaling" ||
        (cfg.kind == "density" && cfg.density.source == "continuous")) {
        const auto rep = validate_model(cfg.model, default_sample_times(cfg.model));
        if (!rep.ok()) throw ConfigError("model: " + rep.summary());
        if (cfg.penalty.gamma.rows() != cfg.model.state_dim()) {
            detail::invalid("penalty.gamma", "must be d x d with d the model's state dimension");
        }
    }
    if (cfg.kind == "scaling") {
        try {
            check_lambda_grid(cfg.simulation.lambda_grid);
        } catch (const DomainError& e) {
            detail::invalid("simulation.lambda_grid", e.what());
        }
    }
    if (cfg.kind == "bernoulli" || (cfg.kind == "density" && cfg.density.source == "bernoulli")) {
        try {
            cfg.bernoulli.model.validate();
        } catch (const DomainError& e) {
            detail::invalid("bernoulli", e.what());
        }
        if (cfg.penalty.gamma.rows() != 1) detail::invalid("penalty.gamma", "must be a scalar for bernoulli runs");
    }
    if (cfg.kind == "dp-oracle" || cfg.kind == "test-size") {
        if (cfg.penalty.gamma.rows() != 1) detail::invalid("penalty.gamma", "must be a scalar");
    }

    cfg.effective = std::move(raw);
    return cfg;
}

}  // namespace switchband
