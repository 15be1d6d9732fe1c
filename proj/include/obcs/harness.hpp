#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "obcs/measure.hpp"
#include "obcs/sampling.hpp"
#include "obcs/solve.hpp"

namespace obcs {

struct SweepConfig {
    /// Signal dimension; for low-rank sweeps this is rows * cols.
    Eigen::Index n = 100;
    /// Sparsity budget, or the rank budget for low-rank sweeps.
    double s = 5.0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
    SignalKind signal_kind = SignalKind::exact_sparse;
    LinkModel model = Noiseless{};
    /// "sparse", "correlated" or "lowrank".
    std::string constraint = "sparse";
    std::vector<Eigen::Index> m_grid{100};
    double tau = 0.0;
    CorruptionStrategy strategy = CorruptionStrategy::random;
    std::size_t trials = 1;
    std::uint64_t base_seed = 1;
    /// Diagonal of Sigma for correlated sweeps.
    std::optional<Eigen::VectorXd> covariance_diagonal;
    double beta = 1.0;
    /// Calibration constant C in m = C delta^-6 w^2.
    double delta_constant = 1.0;
    bool compute_width = true;
    std::size_t width_samples = 200;
    bool record_timing = false;
    unsigned workers = 1;
    std::filesystem::path output;
    /// "csv" or "json"; empty picks from the output extension.
    std::string format;

    void validate() const;
};

SweepConfig sweep_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SweepConfig& config);

struct SweepRow {
    Eigen::Index n = 0;
    double s = 0.0;
    Eigen::Index m = 0;
    LinkModel model = Noiseless{};
    double tau = 0.0;
    CorruptionStrategy strategy = CorruptionStrategy::random;
    std::size_t trial = 0;
    std::uint64_t seed = 0;
    double error_sq = 0.0;
    std::optional<double> sigma_err_sq;
    double objective = 0.0;
    double lambda = 0.0;
    std::optional<double> w_hat;
    std::optional<double> bound_thm11;
    double beta = 0.0;
    std::optional<double> bound_thm13;
    double wall_time_s = 0.0;
    /// Non-empty when the trial failed; numeric results are then meaningless.
    std::string error;
};

/// Runs every (m, trial) cell. Trial t uses seed mix(base_seed, t) for its
/// signal, measurements and corruption, so cells at different m share the
/// same signal. Rows come back ordered by (m grid position, trial) whatever
/// the worker count. A failing trial is recorded with its error and the sweep
/// continues.
std::vector<SweepRow> run_sweep(const SweepConfig& config);

/// Per-trial seed used by run_sweep.
std::uint64_t trial_seed(std::uint64_t base_seed, std::size_t trial);

struct ScalingFit {
    double slope = 0.0;
    double intercept = 0.0;
};

/// Least squares of log(median y) on log(x) over the distinct x values of
/// successful rows. Fields: "m", "error_sq", "sigma_err_sq", "objective",
/// "tau". Throws ParameterError with fewer than three distinct x values.
ScalingFit fit_scaling(const std::vector<SweepRow>& rows, std::string_view x_field,
                       std::string_view y_field);

/// Median of a field over successful rows matching `m` (all rows when m < 0).
double median_of(const std::vector<SweepRow>& rows, std::string_view field, Eigen::Index m = -1);

double median(std::vector<double> values);

// Bound overlays -------------------------------------------------------------

/// (8 / (lambda sqrt m)) (w + beta).
double bound_thm11(double lambda, Eigen::Index m, double w, double beta);
/// delta solving m = C delta^-6 w^2.
double delta_from_measurements(Eigen::Index m, double w, double constant = 1.0);
/// delta sqrt(log(e/delta)) + 11 tau sqrt(log(e/tau)); each term is 0 at 0.
double bound_thm13(double delta, double tau);

// Output ---------------------------------------------------------------------

inline constexpr std::string_view kCsvHeader =
    "n,s,m,model,p,sigma,alpha,tau,strategy,trial,seed,error_sq,sigma_err_sq,objective,lambda,"
    "w_hat,bound_thm11,beta,bound_thm13,wall_time_s";

/// Shortest decimal string that parses back to the same double.
std::string format_double(double value);

void write_csv(std::ostream& out, const std::vector<SweepRow>& rows);
nlohmann::json rows_to_json(const std::vector<SweepRow>& rows);
/// Config echo, library version, git hash and the failures list.
nlohmann::json sweep_metadata(const SweepConfig& config, const std::vector<SweepRow>& rows);

/// Writes rows to config.output (CSV or JSON array) and the metadata sidecar
/// next to it as <output>.meta.json.
void write_sweep_outputs(const SweepConfig& config, const std::vector<SweepRow>& rows);

std::string_view library_version();
std::string_view git_hash();

}  // namespace obcs
