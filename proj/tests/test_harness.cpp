#include <gtest/gtest.h>

#include <charconv>
#include <fstream>
#include <random>
#include <sstream>

#include "obcs/errors.hpp"
#include "obcs/harness.hpp"

using namespace obcs;
using nlohmann::json;

namespace {

SweepConfig small_config() {
    SweepConfig c;
    c.n = 60;
    c.s = 3;
    c.m_grid = {200, 800};
    c.trials = 3;
    c.base_seed = 9;
    c.width_samples = 50;
    return c;
}

std::string csv_of(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    write_csv(out, rows);
    return out.str();
}

}  // namespace

TEST(Config, FromJson) {
    const auto c = sweep_config_from_json(json::parse(R"({
        "n": 200, "s": 5, "m_grid": [100, 400], "model": {"name": "bitflip", "p": 0.9},
        "tau": 0.05, "strategy": "greedy", "trials": 4, "seed": 11,
        "constraint": "correlated", "covariance": {"kappa": 4}, "output": "x.csv"})"));
    EXPECT_EQ(c.n, 200);
    EXPECT_EQ(c.m_grid, (std::vector<Eigen::Index>{100, 400}));
    EXPECT_EQ(tag_of(c.model), ModelTag::bitflip);
    EXPECT_EQ(model_parameter(c.model), 0.9);
    EXPECT_EQ(c.strategy, CorruptionStrategy::greedy_magnitude);
    ASSERT_TRUE(c.covariance_diagonal);
    EXPECT_EQ((*c.covariance_diagonal)(0), 4.0);
    EXPECT_EQ((*c.covariance_diagonal)(199), 1.0);
    const auto again = sweep_config_from_json(to_json(c));
    EXPECT_EQ(to_json(again), to_json(c));
}

TEST(Config, Validation) {
    auto bad = [](const char* text) { return sweep_config_from_json(json::parse(text)).validate(); };
    EXPECT_THROW(bad(R"({"n": 10, "s": 20, "m_grid": [10]})"), ParameterError);
    EXPECT_THROW(bad(R"({"n": 10, "s": 2, "m_grid": []})"), ParameterError);
    EXPECT_THROW(bad(R"({"n": 10, "s": 2, "m_grid": [10], "tau": 2})"), ParameterError);
    EXPECT_THROW(bad(R"({"n": 10, "s": 2, "m_grid": [10], "constraint": "box"})"), ParameterError);
    EXPECT_NO_THROW(bad(R"({"n": 10, "s": 2, "m_grid": [10]})"));
}

TEST(Sweep, RowsOrderedAndDeterministic) {
    auto config = small_config();
    const auto rows = run_sweep(config);
    ASSERT_EQ(rows.size(), 6u);
    EXPECT_EQ(rows[0].m, 200);
    EXPECT_EQ(rows[3].m, 800);
    EXPECT_EQ(rows[4].trial, 1u);
    EXPECT_EQ(rows[1].seed, trial_seed(9, 1));
    for (const auto& r : rows) {
        EXPECT_TRUE(r.error.empty()) << r.error;
        ASSERT_TRUE(r.bound_thm11 && r.bound_thm13 && r.w_hat);
    }
    config.workers = 4;
    EXPECT_EQ(csv_of(run_sweep(config)), csv_of(rows));
}

TEST(Sweep, SameSignalAcrossGrid) {
    auto config = small_config();
    config.m_grid = {100, 100};
    const auto rows = run_sweep(config);
    EXPECT_EQ(rows[0].error_sq, rows[3].error_sq);
}

TEST(Sweep, CorruptionIncreasesError) {
    auto config = small_config();
    config.m_grid = {2000};
    config.trials = 5;
    config.compute_width = false;
    const double clean = median_of(run_sweep(config), "error_sq");
    config.tau = 0.2;
    config.strategy = CorruptionStrategy::greedy_magnitude;
    const auto rows = run_sweep(config);
    EXPECT_GT(median_of(rows, "error_sq"), clean);
    EXPECT_FALSE(rows[0].w_hat.has_value());
}

TEST(Sweep, LowRankAndCorrelated) {
    SweepConfig lr;
    lr.constraint = "lowrank";
    lr.signal_kind = SignalKind::low_rank;
    lr.rows = 6;
    lr.cols = 5;
    lr.n = 30;
    lr.s = 2;
    lr.m_grid = {400};
    lr.width_samples = 20;
    const auto a = run_sweep(lr);
    EXPECT_TRUE(a[0].error.empty()) << a[0].error;

    SweepConfig co = small_config();
    co.constraint = "correlated";
    Eigen::VectorXd d = Eigen::VectorXd::Ones(60);
    d.head(30).setConstant(4.0);
    co.covariance_diagonal = d;
    const auto b = run_sweep(co);
    EXPECT_TRUE(b[0].error.empty()) << b[0].error;
    EXPECT_TRUE(b[0].sigma_err_sq.has_value());
}

TEST(Stats, MedianAndFit) {
    EXPECT_EQ(median({3, 1, 2}), 2.0);
    EXPECT_EQ(median({4, 1, 2, 3}), 2.5);
    std::vector<SweepRow> rows;
    for (Eigen::Index m : {100, 200, 400, 800})
        for (int t = 0; t < 3; ++t) {
            SweepRow r;
            r.m = m;
            r.error_sq = 5.0 * std::pow(static_cast<double>(m), -0.5) * (1 + 0.1 * (t - 1));
            rows.push_back(r);
        }
    rows.push_back(SweepRow{});
    rows.back().m = 100;
    rows.back().error = "failed";
    rows.back().error_sq = 1e9;
    const auto fit = fit_scaling(rows, "m", "error_sq");
    EXPECT_NEAR(fit.slope, -0.5, 1e-12);
    EXPECT_NEAR(fit.intercept, std::log(5.0), 1e-12);
    EXPECT_NEAR(median_of(rows, "error_sq", 400), 0.25, 1e-12);
    rows.resize(6);
    EXPECT_THROW(fit_scaling(rows, "m", "error_sq"), ParameterError);
}

TEST(Bounds, Overlays) {
    EXPECT_NEAR(bound_thm13(0.0, 0.1), 1.9990317562567, 1e-12);
    EXPECT_EQ(bound_thm13(0.0, 0.0), 0.0);
    EXPECT_NEAR(bound_thm11(1.0, 100, 3.0, 1.0), 3.2, 1e-15);
    EXPECT_NEAR(std::pow(delta_from_measurements(1000, 5.0, 2.0), -6.0) * 2.0 * 25.0, 1000.0, 1e-9);
}

TEST(Output, FormatDoubleRoundTrips) {
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-1e6, 1e6);
    for (int i = 0; i < 1000; ++i) {
        const double v = u(gen) * std::pow(10.0, i % 20 - 10);
        const std::string text = format_double(v);
        double back = 0;
        std::from_chars(text.data(), text.data() + text.size(), back);
        EXPECT_EQ(back, v);
    }
    EXPECT_EQ(format_double(0.5), "0.5");
}

TEST(Output, CsvShape) {
    auto config = small_config();
    config.model = BitFlip{0.9};
    const auto rows = run_sweep(config);
    const std::string csv = csv_of(rows);
    EXPECT_EQ(csv.substr(0, kCsvHeader.size()), kCsvHeader);
    EXPECT_EQ(csv.substr(kCsvHeader.size(), 2), "\r\n");
    std::size_t lines = 0, pos = 0;
    while ((pos = csv.find("\r\n", pos)) != std::string::npos) {
        ++lines;
        pos += 2;
    }
    EXPECT_EQ(lines, rows.size() + 1);
    const std::size_t first = kCsvHeader.size() + 2;
    const std::string row = csv.substr(first, csv.find("\r\n", first) - first);
    EXPECT_EQ(std::count(row.begin(), row.end(), ','), std::count(kCsvHeader.begin(), kCsvHeader.end(), ','));
    EXPECT_NE(row.find(",bitflip,0.9,,,"), std::string::npos);
}

TEST(Output, FilesAndMetadata) {
    auto config = small_config();
    config.output = std::filesystem::temp_directory_path() / "obcs_sweep_test.json";
    const auto rows = run_sweep(config);
    write_sweep_outputs(config, rows);
    std::ifstream data(config.output), meta(config.output.string() + ".meta.json");
    const json j = json::parse(data), m = json::parse(meta);
    EXPECT_EQ(j.size(), rows.size());
    EXPECT_EQ(m["library_version"], std::string(library_version()));
    EXPECT_TRUE(m["failures"].empty());
    EXPECT_EQ(m["config"]["n"], 60);
    std::filesystem::remove(config.output);
    std::filesystem::remove(config.output.string() + ".meta.json");
}
