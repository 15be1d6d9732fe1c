#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "obcs/rng.hpp"
#include "obcs/sampling.hpp"

namespace obcs {

// ---------------------------------------------------------------------------
// Link models: E y_i = theta(<a_i, x>) for unit-norm x.

struct Noiseless {};

/// y_i = xi_i * sign(<a_i, x>) with P{xi_i = 1} = p.
struct BitFlip {
    double p = 1.0;
};

/// y_i = sign(<a_i, x> + nu_i), nu_i ~ N(0, sigma^2).
struct PreQuantNoise {
    double sigma = 0.0;
};

/// P{y_i = 1} = 1 / (1 + exp(-alpha <a_i, x>)), i.e. theta(z) = tanh(alpha z / 2).
struct Logistic {
    double alpha = 1.0;
};

using LinkModel = std::variant<Noiseless, BitFlip, PreQuantNoise, Logistic>;

/// Stable tag used by the record file and CSV output.
enum class ModelTag : std::uint8_t { noiseless = 0, bitflip = 1, prequant = 2, logistic = 3 };

ModelTag tag_of(const LinkModel& model);
std::string_view model_name(const LinkModel& model);

/// Builds a model from its name and scalar parameter (p, sigma or alpha;
/// ignored for noiseless). Throws ParameterError on unknown names or invalid
/// parameters.
LinkModel make_model(std::string_view name, double parameter = 0.0);

/// The scalar parameter of a model (p, sigma, alpha) or NaN for noiseless.
double model_parameter(const LinkModel& model);

/// Throws ParameterError unless the model parameters are in range:
/// p in [1/2, 1] (1/2 is the zero-correlation limit), sigma >= 0, alpha > 0.
void validate(const LinkModel& model);

/// sign with the tie rule sign(0) = +1.
inline double sign(double z) { return z >= 0.0 ? 1.0 : -1.0; }

double theta_eval(const LinkModel& model, double z);

/// Correlation coefficient lambda = E theta(g) g, g ~ N(0, 1), in closed form
/// (Gauss-Hermite quadrature for the logistic link).
double lambda_analytic(const LinkModel& model);

/// E f(g) for g ~ N(0, 1) by 64-node Gauss-Hermite quadrature.
double gaussian_expectation(const std::function<double(double)>& f);

// ---------------------------------------------------------------------------
// Measurement covariance.

/// Symmetric positive-definite covariance of the measurement rows together
/// with its eigendecomposition and symmetric square root.
class CovarianceSpec {
public:
    /// Full matrix; throws ParameterError if not symmetric positive-definite.
    explicit CovarianceSpec(const Eigen::MatrixXd& sigma);
    /// Diagonal shorthand.
    static CovarianceSpec diagonal(const Eigen::VectorXd& entries);

    Eigen::Index dim() const { return matrix_.rows(); }
    const Eigen::MatrixXd& matrix() const { return matrix_; }
    const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
    /// Orthonormal eigenvectors; columns match eigenvalues(). Identity when diagonal.
    const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
    const Eigen::MatrixXd& sqrt_matrix() const { return sqrt_; }
    bool is_diagonal() const { return diagonal_; }

    double lambda_min() const { return eigenvalues_.minCoeff(); }
    double lambda_max() const { return eigenvalues_.maxCoeff(); }
    double condition_number() const { return lambda_max() / lambda_min(); }

    /// Sigma^{1/2} v.
    Eigen::VectorXd apply_sqrt(const Eigen::VectorXd& v) const;
    /// ||Sigma^{1/2} v||_2.
    double sqrt_norm(const Eigen::VectorXd& v) const;

private:
    CovarianceSpec() = default;
    void decompose();

    Eigen::MatrixXd matrix_;
    Eigen::VectorXd eigenvalues_;
    Eigen::MatrixXd eigenvectors_;
    Eigen::MatrixXd sqrt_;
    bool diagonal_ = false;
};

// ---------------------------------------------------------------------------
// Synthesis.

/// Rows are generated in fixed blocks, each from its own substream of the
/// record's RngSpec, so any row range can be regenerated independently.
inline constexpr Eigen::Index kRowBlock = 256;

struct SynthesisOptions {
    bool retain_rows = false;
    /// Keep <a_i, x> for every row (needed by the greedy adversary).
    bool keep_inner_products = false;
    std::size_t max_retained_bytes = std::size_t{1} << 30;
    unsigned workers = 1;
};

/// Bits, streamed direction c = (1/m) sum y_i a_i and optional row data.
struct MeasurementRecord {
    std::vector<std::int8_t> y;
    Eigen::VectorXd c;
    Eigen::Index m = 0;
    LinkModel model = Noiseless{};
    RngSpec rng;
    /// m x n, present only when requested.
    std::optional<Eigen::MatrixXd> retained_rows;
    /// <a_i, x>, present only when requested.
    std::optional<Eigen::VectorXd> inner_products;
    std::optional<CovarianceSpec> covariance;

    Eigen::Index n() const { return c.size(); }
};

/// Draws m measurements of `signal` under `model`.
///
/// Row i is a_i = Sigma^{1/2} g_i with g_i standard Gaussian (Sigma = I when
/// no covariance is given). Requires ||x||_2 = 1, or ||Sigma^{1/2} x||_2 = 1
/// on the correlated path. Throws ParameterError for m <= 0, dimension
/// mismatches or a retained matrix above the memory budget.
MeasurementRecord synthesize(const Signal& signal, const LinkModel& model, Eigen::Index m,
                             const RngSpec& rng, const SynthesisOptions& options = {},
                             const std::optional<CovarianceSpec>& covariance = std::nullopt);

/// Same row stream as synthesize, with bits drawn as P{y_i = 1} = (1 + theta(z_i)) / 2
/// for an arbitrary odd link. Used for links beyond the four named models.
MeasurementRecord synthesize_with_theta(const Signal& signal,
                                        const std::function<double(double)>& theta,
                                        Eigen::Index m, const RngSpec& rng,
                                        const SynthesisOptions& options = {});

/// Regenerates the rows of `record` and returns (1/m) sum y_i a_i for the
/// given bits. Uses retained rows when present.
Eigen::VectorXd direction_for_bits(const MeasurementRecord& record, std::span<const std::int8_t> y,
                                   unsigned workers = 1);

// ---------------------------------------------------------------------------
// Corruption.

enum class CorruptionStrategy { random, greedy_magnitude };

std::string_view to_string(CorruptionStrategy strategy);
CorruptionStrategy corruption_strategy_from_string(std::string_view name);

/// Flips exactly floor(tau * m) entries of y. `random` flips a uniform
/// subset; `greedy_magnitude` flips the entries with largest |<a_i, x>|
/// (ties broken by lower index) and needs those inner products as context.
std::vector<std::int8_t> corrupt(std::span<const std::int8_t> y, double tau,
                                 CorruptionStrategy strategy, const RngSpec& rng,
                                 std::optional<std::span<const double>> context = std::nullopt);

// ---------------------------------------------------------------------------
// Empirical correlation.

struct LambdaEstimate {
    double value = 0.0;
    double std_err = 0.0;
};

/// (1/m) sum y_i <a_i, x> with its standard error, from a fresh synthesis.
LambdaEstimate lambda_empirical(const Signal& signal, const LinkModel& model, Eigen::Index m,
                                const RngSpec& rng, unsigned workers = 1);

}  // namespace obcs
