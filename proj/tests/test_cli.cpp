#include <gtest/gtest.h>

#include "ocm/csv.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <sys/wait.h>

namespace fs = std::filesystem;

namespace {

struct RunResult {
    int status = -1;
    std::string output;
};

RunResult run(const std::string& args) {
    const std::string cmd = std::string(OCM_CLI_PATH) + " " + args + " 2>&1";
    RunResult r;
    FILE* pipe = popen(cmd.c_str(), "r");
    if (!pipe)
        return r;
    char buf[4096];
    std::size_t got;
    while ((got = fread(buf, 1, sizeof buf, pipe)) > 0)
        r.output.append(buf, got);
    const int raw = pclose(pipe);
    r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

fs::path scratch(const std::string& name) {
    const auto dir = fs::temp_directory_path() / ("ocm_cli_test_" + name);
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

} // namespace

TEST(Cli, HelpExitsZero) {
    const auto r = run("--help");
    EXPECT_EQ(r.status, 0);
    EXPECT_NE(r.output.find("table1"), std::string::npos);
}

TEST(Cli, MissingSubcommandIsUsageError) { EXPECT_EQ(run("").status, 2); }

TEST(Cli, ToyMatchesClosedForm) {
    const auto dir = scratch("toy");
    const auto r = run("toy --p 0.9 --gamma 0.9 --cobs 0 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.output;
    const auto t = ocm::read_csv((dir / "toy.csv").string());
    ASSERT_EQ(t.rows.size(), 1u);
    EXPECT_NEAR(ocm::parse_double(t.rows[0][3]), 10.0, 1e-9);
    EXPECT_NEAR(ocm::parse_double(t.rows[0][5]), 10.0, 1e-4);
    EXPECT_TRUE(fs::exists(dir / "manifest.json"));
}

TEST(Cli, ValidateReportsRow) {
    const auto dir = scratch("validate");
    const auto path = dir / "bad.json";
    std::ofstream(path) << R"({"states": 2, "actions": 1,
        "transition": [[[0.5, 0.5], [0.7, 0.7]]],
        "reward": [[1], [0]], "c_obs": 0.1, "gamma": 0.9, "horizon": 10})";
    const auto r = run("validate --model " + path.string() + " --out " + dir.string());
    EXPECT_EQ(r.status, 2) << r.output;
    EXPECT_NE(r.output.find("row 1"), std::string::npos) << r.output;

    EXPECT_EQ(run("validate --model " + (dir / "missing.json").string() + " --out " + dir.string()).status, 2);
}

TEST(Cli, ValidateAcceptsGoodModel) {
    const auto dir = scratch("validate_ok");
    const auto path = dir / "good.json";
    std::ofstream(path) << R"({"states": 2, "actions": 1,
        "transition": [[[0.5, 0.5], [0.3, 0.7]]],
        "reward": [[1], [0]], "c_obs": 0.1, "gamma": 0.9, "horizon": 10})";
    const auto r = run("validate --model " + path.string() + " --out " + dir.string());
    EXPECT_EQ(r.status, 0) << r.output;
}

TEST(Cli, BadPriorIsConfigError) {
    const auto dir = scratch("prior");
    EXPECT_EQ(run("bayes --prior 2 --horizon 5 --out " + dir.string()).status, 2);
    EXPECT_EQ(run("bayes --prior -1:2 --horizon 5 --out " + dir.string()).status, 2);
}

TEST(Cli, RerunIsByteIdentical) {
    const auto a = scratch("rerun_a");
    const auto b = scratch("rerun_b");
    const std::string args = "simulate --prior 2:5 --cobs 0.25 --horizon 20 --trajectories 200 --seed 7 --out ";
    ASSERT_EQ(run(args + a.string()).status, 0);
    ASSERT_EQ(run(args + b.string()).status, 0);
    for (const char* name : {"table3.csv", "table3_cells.csv", "regret.csv", "regret_exponents.csv"})
        EXPECT_EQ(slurp(a / name), slurp(b / name)) << name;
}

TEST(Cli, SolveWritesReport) {
    const auto dir = scratch("solve");
    const auto r = run("solve --builtin toy --horizon 100 --cobs 0.1,0.5 --out " + dir.string());
    ASSERT_EQ(r.status, 0) << r.output;
    const auto report = ocm::read_csv((dir / "report_c0.1.csv").string());
    EXPECT_EQ(report.rows.at(0).at(0), "iterations");
    EXPECT_TRUE(fs::exists(dir / "policy_c0.5.csv"));
}
