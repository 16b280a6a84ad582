// switchband: command-line front end. Parses configuration, dispatches to
// the experiment drivers, and maps failures to exit codes
// (0 success, 2 config error, 3 runtime error).
#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "switchband/switchband.hpp"

namespace {

constexpr int kConfigError = 2;
constexpr int kRuntimeError = 3;

struct CommonArgs {
    std::string config_path;
    std::vector<std::string> overrides;
    std::optional<std::uint64_t> seed;
    unsigned threads = 0;
    std::string out_dir;
    std::optional<double> lambda;
    std::optional<double> gamma;
    std::optional<double> alpha;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
    cmd->add_option("--config", args.config_path, "JSON experiment configuration");
    cmd->add_option("--set", args.overrides, "Override a config field, e.g. penalty.lambda=1e-4")
        ->allow_extra_args(false);
    cmd->add_option("--seed", args.seed, "Random seed (simulation.seed)");
    cmd->add_option("--threads", args.threads, "Worker threads for replications (0 = all cores)");
    cmd->add_option("--out", args.out_dir, "Output directory");
}

int run(const std::string& kind, const CommonArgs& args) {
    using namespace switchband;
    ExperimentConfig cfg;
    try {
        json raw = args.config_path.empty() ? json::object() : load_json_file(args.config_path);
        raw["experiment"] = kind;
        for (const auto& o : args.overrides) apply_override(raw, o);
        if (args.seed) raw["simulation"]["seed"] = *args.seed;
        if (args.lambda) raw["penalty"]["lambda"] = *args.lambda;
        if (args.gamma) raw["penalty"]["gamma"] = *args.gamma;
        if (args.alpha) raw["test_size"]["alpha"] = *args.alpha;
        cfg = parse_config(std::move(raw));
    } catch (const ConfigError& e) {
        std::cerr << "switchband " << kind << ": config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "switchband " << kind << ": config error: " << e.what() << '\n';
        return kConfigError;
    }

    try {
        if (kind == "test-size" && args.out_dir.empty() && cfg.output_dir.empty()) {
            std::cout << test_size_json(cfg).dump(2) << '\n';
            return 0;
        }
        RunContext ctx;
        ctx.threads = args.threads;
        ctx.out_dir = !args.out_dir.empty()      ? args.out_dir
                      : !cfg.output_dir.empty() ? cfg.output_dir
                                                : "switchband-out/" + kind + "-" + cfg.hash();
        run_experiment(cfg, ctx);
        if (kind != "test-size") std::cout << "wrote " << ctx.out_dir.string() << '\n';
        return 0;
    } catch (const ConfigError& e) {
        std::cerr << "switchband " << kind << ": config error: " << e.what() << '\n';
        return kConfigError;
    } catch (const std::exception& e) {
        std::cerr << "switchband " << kind << ": " << e.what() << '\n';
        return kRuntimeError;
    }
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"switchband: band-of-inaction policies for filtered estimates under switching costs"};
    app.require_subcommand(1);

    CommonArgs args;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"filter", "Run the Kalman-Bucy filter on simulated or ingested observations"},
        {"simulate", "Monte Carlo of the band policy: per-path cost ledgers"},
        {"scaling", "Cost and band scaling across a lambda grid"},
        {"density", "Rescaled tracking error vs the triangular density"},
        {"bernoulli", "Track a Bernoulli parameter with the discrete-time band"},
        {"dp-oracle", "Exact backward-induction policy vs the asymptotic band"},
        {"test-size", "Map a switching cost to a two-sided test size (or back)"},
    };
    for (const auto& [name, help] : commands) {
        CLI::App* cmd = app.add_subcommand(name, help);
        add_common(cmd, args);
        if (name == "test-size") {
            cmd->add_option("--lambda", args.lambda, "Switching cost");
            cmd->add_option("--gamma", args.gamma, "Running-cost curvature");
            cmd->add_option("--alpha", args.alpha, "Test size to invert into a cost");
        }
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : kConfigError;
    }
    for (const auto& [name, help] : commands) {
        if (app.got_subcommand(name)) return run(name, args);
    }
    return kConfigError;
}
