#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "obcs/cli.hpp"

using nlohmann::json;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run(std::vector<std::string> args) {
    args.insert(args.begin(), "obcs");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    const int code = obcs::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
    return {code, out.str(), err.str()};
}

std::filesystem::path temp(const std::string& name) { return std::filesystem::temp_directory_path() / name; }

}  // namespace

TEST(Cli, SimulateThenEstimate) {
    const auto record = temp("obcs_cli_record.bin").string();
    const auto sim = run({"simulate", "--n", "80", "--s", "3", "--m", "3000", "--seed", "5", "--output", record});
    ASSERT_EQ(sim.code, 0) << sim.err;
    EXPECT_EQ(json::parse(sim.out)["m"], 3000);

    const auto est = run({"estimate", "--record", record, "--s", "3", "--truth", "true", "--bound", "true"});
    ASSERT_EQ(est.code, 0) << est.err;
    const json r = json::parse(est.out);
    EXPECT_EQ(r["x_hat"].size(), 80u);
    EXPECT_LT(r["error_sq"].get<double>(), 0.1);
    EXPECT_LE(r["constraint_violation"].get<double>(), 1e-12);
    EXPECT_GT(r["bound_value"].get<double>(), r["error_sq"].get<double>());
    std::filesystem::remove(record);
}

TEST(Cli, ConfigFileAndFlagOverride) {
    const auto cfg = temp("obcs_cli_cfg.json");
    std::ofstream(cfg) << R"({"n": 30, "s": 2, "m_grid": [100], "trials": 2, "seed": 3, "width_samples": 10})";
    const auto out = temp("obcs_cli_sweep.csv");
    const auto r = run({"sweep", "-c", cfg.string(), "--trials", "3", "--output", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(r.out)["rows"], 3);
    const json echoed = json::parse(r.err.substr(0, r.err.find('\n')));
    EXPECT_EQ(echoed["trials"], 3);
    EXPECT_EQ(echoed["n"], 30);
    EXPECT_TRUE(std::filesystem::exists(out.string() + ".meta.json"));
    std::filesystem::remove(cfg);
    std::filesystem::remove(out);
    std::filesystem::remove(out.string() + ".meta.json");
}

TEST(Cli, Errors) {
    EXPECT_EQ(run({"sweep", "-c", "/nonexistent/cfg.json"}).code, 1);
    EXPECT_EQ(run({"estimate", "--record", "/nonexistent/rec.bin"}).code, 1);
    EXPECT_EQ(run({"lambda", "--model", "bitflip", "--p", "0.2"}).code, 1);
    EXPECT_EQ(run({"frobnicate"}).code, 1);
    EXPECT_EQ(run({}).code, 1);
    EXPECT_EQ(run({"--help"}).code, 0);
}

TEST(Cli, Lambda) {
    const auto r = run({"lambda", "--model", "prequant", "--sigma", "1", "--m", "20000"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(r.out.rfind("lambda_analytic 0.5641895835\nlambda_empirical ", 0), 0u) << r.out;
}

TEST(Cli, MeanWidthAndTessellate) {
    const auto w = run({"meanwidth", "--set", "ball", "--n", "20", "--samples", "500"});
    ASSERT_EQ(w.code, 0) << w.err;
    EXPECT_NEAR(json::parse(w.out)["w_hat"].get<double>(), 2 * 4.3655, 0.3);
    const auto t = run({"tessellate", "--n", "16", "--s", "2", "--m", "2000", "--pairs", "10", "--samples", "10",
                        "--width_samples", "20"});
    ASSERT_EQ(t.code, 0) << t.err;
    const json j = json::parse(t.out);
    EXPECT_EQ(j["tessellation"]["pair_count"], 10);
    EXPECT_TRUE(j["l1_embedding"]["within_bound"].get<bool>());
}
