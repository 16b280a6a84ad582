#include <gtest/gtest.h>

#include <nlohmann/json.hpp>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out;
};

Result run(const std::string& args) {
    const std::string cmd = std::string(SWITCHBAND_CLI_PATH) + " " + args + " 2>&1";
    FILE* pipe = popen(cmd.c_str(), "r");
    std::string out;
    std::array<char, 4096> buf{};
    while (std::fgets(buf.data(), buf.size(), pipe)) out += buf.data();
    const int status = pclose(pipe);
    return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("switchband-cli-test-" + name);
    fs::remove_all(dir);
    return dir;
}

}  // namespace

TEST(Cli, TestSizeJson) {
    const auto r = run("test-size --lambda 1 --gamma 2");
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(r.out);
    EXPECT_NEAR(j["c"].get<double>(), 1.0, 1e-12);
    EXPECT_NEAR(j["alpha"].get<double>(), 0.317311, 1e-6);
}

TEST(Cli, BadConfigExitCode) {
    const auto r = run("test-size --lambda -1 --gamma 1");
    EXPECT_EQ(r.code, 2) << r.out;
    EXPECT_NE(r.out.find("lambda must be >= 0"), std::string::npos) << r.out;
    EXPECT_EQ(run("simulate --config /nonexistent/file.json").code, 2);
}

TEST(Cli, RerunIsByteIdentical) {
    const auto a = scratch("a"), b = scratch("b");
    const std::string common = " --config " SWITCHBAND_CONFIG_DIR "/bernoulli_small.json";
    ASSERT_EQ(run("bernoulli" + common + " --out " + a.string()).code, 0);
    ASSERT_EQ(run("bernoulli" + common + " --threads 3 --out " + b.string()).code, 0);
    std::size_t files = 0;
    for (const auto& entry : fs::directory_iterator(a)) {
        ++files;
        const auto other = b / entry.path().filename();
        ASSERT_TRUE(fs::exists(other)) << other;
        EXPECT_EQ(slurp(entry.path()), slurp(other)) << entry.path().filename();
    }
    EXPECT_GE(files, 2u);
    const auto traj = slurp(a / "trajectory.csv");
    EXPECT_EQ(traj.rfind("# switchband 0.1.0", 0), 0u) << traj.substr(0, 80);
}

TEST(Cli, BernoulliFromCsvStream) {
    const auto dir = scratch("csv");
    fs::create_directories(dir);
    {
        std::ofstream f(dir / "obs.csv");
        f << "y\n";
        unsigned long long state = 12345;
        for (int i = 0; i < 5000; ++i) {
            state = state * 6364136223846793005ULL + 1442695040888963407ULL;
            f << ((state >> 33) & 1ULL) << "\n";
        }
    }
    const auto out = dir / "run";
    const auto r = run("bernoulli --set bernoulli.T=5000 --set bernoulli.input_csv=" + (dir / "obs.csv").string() +
                       " --set penalty.lambda=1e-5 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    EXPECT_TRUE(fs::exists(out / "trajectory.csv"));
}

TEST(Cli, ScalingSummaryHasSlopes) {
    const auto out = scratch("scaling");
    const auto r = run("scaling --set model.T=2 --set simulation.n_paths=20 --out " + out.string());
    ASSERT_EQ(r.code, 0) << r.out;
    const auto j = nlohmann::json::parse(slurp(out / "summary.json"));
    ASSERT_TRUE(j.contains("band_slope")) << j.dump(2);
    EXPECT_NEAR(j["band_slope"].get<double>(), 0.25, 1e-6);
    EXPECT_TRUE(j.contains("cost_slope"));
}
