#include "obcs/measure.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "obcs/errors.hpp"
#include "obcs/parallel.hpp"

namespace obcs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

constexpr std::uint64_t kRowStream = 1;
constexpr std::uint64_t kNoiseStream = 2;

using RowBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Eigen::Index block_count(Eigen::Index m) { return (m + kRowBlock - 1) / kRowBlock; }

RowBlock generate_rows(const RngSpec& rng, Eigen::Index block, Eigen::Index m, Eigen::Index n,
                       const CovarianceSpec* covariance) {
    const Eigen::Index begin = block * kRowBlock;
    const Eigen::Index rows = std::min(kRowBlock, m - begin);
    RowBlock a(rows, n);
    NormalSampler sampler(rng.child(kRowStream), static_cast<std::uint64_t>(block));
    sampler.fill_normal(a.data(), static_cast<std::size_t>(a.size()));
    if (covariance) {
        if (covariance->is_diagonal())
            a = a * covariance->eigenvalues().cwiseSqrt().asDiagonal();
        else
            a = a * covariance->sqrt_matrix();
    }
    return a;
}

double sigmoid(double t) {
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

// Draws one bit given z = <a_i, x>; `noise` is the block's noise substream.
using BitRule = std::function<std::int8_t(double, NormalSampler&)>;

BitRule bit_rule_for(const LinkModel& model) {
    return std::visit(
        overloaded{
            [](const Noiseless&) -> BitRule {
                return [](double z, NormalSampler&) { return static_cast<std::int8_t>(sign(z)); };
            },
            [](const BitFlip& m) -> BitRule {
                return [p = m.p](double z, NormalSampler& noise) {
                    const double xi = noise.uniform() < p ? 1.0 : -1.0;
                    return static_cast<std::int8_t>(xi * sign(z));
                };
            },
            [](const PreQuantNoise& m) -> BitRule {
                return [sigma = m.sigma](double z, NormalSampler& noise) {
                    return static_cast<std::int8_t>(sign(z + sigma * noise.normal()));
                };
            },
            [](const Logistic& m) -> BitRule {
                return [alpha = m.alpha](double z, NormalSampler& noise) {
                    return static_cast<std::int8_t>(noise.uniform() < sigmoid(alpha * z) ? 1 : -1);
                };
            },
        },
        model);
}

MeasurementRecord synthesize_impl(const Signal& signal, const BitRule& rule, Eigen::Index m,
                                  const RngSpec& rng, const SynthesisOptions& options,
                                  const std::optional<CovarianceSpec>& covariance) {
    const Eigen::Index n = signal.n();
    if (m <= 0) throw ParameterError("measurement count m must be positive");
    if (n <= 0) throw ParameterError("signal must be nonempty");
    if (covariance) {
        if (covariance->dim() != n)
            throw ParameterError("covariance dimension " + std::to_string(covariance->dim()) +
                                 " does not match signal dimension " + std::to_string(n));
        if (std::abs(covariance->sqrt_norm(signal.values) - 1.0) > 1e-8)
            throw ParameterError("correlated synthesis requires ||Sigma^{1/2} x||_2 = 1");
    } else if (std::abs(signal.values.norm() - 1.0) > 1e-8) {
        throw ParameterError("synthesis requires a unit-norm signal");
    }
    if (options.retain_rows) {
        const double bytes = static_cast<double>(m) * static_cast<double>(n) * sizeof(double);
        if (bytes > static_cast<double>(options.max_retained_bytes))
            throw ParameterError("retained measurement matrix (" + std::to_string(m) + " x " +
                                 std::to_string(n) + ") exceeds the memory budget");
    }

    MeasurementRecord record;
    record.m = m;
    record.rng = rng;
    record.covariance = covariance;
    record.y.resize(static_cast<std::size_t>(m));
    if (options.retain_rows) record.retained_rows.emplace(m, n);
    if (options.keep_inner_products) record.inner_products.emplace(m);

    const Eigen::Index blocks = block_count(m);
    std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(blocks));
    const CovarianceSpec* cov = covariance ? &*covariance : nullptr;

    detail::parallel_for(static_cast<std::size_t>(blocks), options.workers, [&](std::size_t b) {
        const auto block = static_cast<Eigen::Index>(b);
        const RowBlock a = generate_rows(rng, block, m, n, cov);
        const Eigen::VectorXd z = a * signal.values;
        NormalSampler noise(rng.child(kNoiseStream), static_cast<std::uint64_t>(block));
        Eigen::VectorXd yb(a.rows());
        const Eigen::Index begin = block * kRowBlock;
        for (Eigen::Index i = 0; i < a.rows(); ++i) {
            const std::int8_t bit = rule(z(i), noise);
            record.y[static_cast<std::size_t>(begin + i)] = bit;
            yb(i) = bit;
        }
        partial[b] = a.transpose() * yb;
        if (record.retained_rows) record.retained_rows->middleRows(begin, a.rows()) = a;
        if (record.inner_products) record.inner_products->segment(begin, a.rows()) = z;
    });

    record.c = Eigen::VectorXd::Zero(n);
    for (const auto& p : partial) record.c += p;
    record.c /= static_cast<double>(m);
    return record;
}

// Golub-Welsch nodes and weights for the probabilists' Hermite weight
// exp(-x^2/2)/sqrt(2 pi); weights sum to one.
struct GaussHermite {
    Eigen::VectorXd nodes;
    Eigen::VectorXd weights;
};

constexpr int kHermiteNodes = 64;

const GaussHermite& hermite_rule() {
    static const GaussHermite rule = [] {
        Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(kHermiteNodes, kHermiteNodes);
        for (int k = 1; k < kHermiteNodes; ++k) {
            jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(static_cast<double>(k));
        }
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(jacobi);
        GaussHermite out;
        out.nodes = solver.eigenvalues();
        out.weights = solver.eigenvectors().row(0).transpose().array().square();
        out.weights /= out.weights.sum();
        return out;
    }();
    return rule;
}

// lambda = (alpha/2) E sech^2(alpha g / 2). Gauss-Hermite resolves the
// integrand for alpha <= 1; beyond that sech^2 narrows to width ~1/alpha and
// the substituted form 2 int_0^inf sech^2(u) phi(2u/alpha) du is integrated
// adaptively.
double logistic_lambda(double alpha) {
    if (alpha <= 1.0) {
        return 0.5 * alpha * gaussian_expectation([alpha](double g) {
                   const double c = std::cosh(alpha * g / 2.0);
                   return 1.0 / (c * c);
               });
    }
    const double inv_sqrt_2pi = 1.0 / std::sqrt(2.0 * M_PI);
    auto integrand = [alpha, inv_sqrt_2pi](double u) {
        const double c = std::cosh(u);
        const double t = 2.0 * u / alpha;
        return 2.0 / (c * c) * inv_sqrt_2pi * std::exp(-0.5 * t * t);
    };
    return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
        integrand, 0.0, 40.0, 15, 1e-14);
}

}  // namespace

// ---------------------------------------------------------------------------

ModelTag tag_of(const LinkModel& model) {
    return static_cast<ModelTag>(model.index());
}

std::string_view model_name(const LinkModel& model) {
    static constexpr std::string_view names[] = {"noiseless", "bitflip", "prequant", "logistic"};
    return names[model.index()];
}

LinkModel make_model(std::string_view name, double parameter) {
    LinkModel model;
    if (name == "noiseless")
        model = Noiseless{};
    else if (name == "bitflip")
        model = BitFlip{parameter};
    else if (name == "prequant")
        model = PreQuantNoise{parameter};
    else if (name == "logistic")
        model = Logistic{parameter};
    else
        throw ParameterError("unknown model '" + std::string(name) +
                             "' (expected noiseless, bitflip, prequant or logistic)");
    validate(model);
    return model;
}

double model_parameter(const LinkModel& model) {
    return std::visit(overloaded{
                          [](const Noiseless&) { return std::nan(""); },
                          [](const BitFlip& m) { return m.p; },
                          [](const PreQuantNoise& m) { return m.sigma; },
                          [](const Logistic& m) { return m.alpha; },
                      },
                      model);
}

void validate(const LinkModel& model) {
    std::visit(overloaded{
                   [](const Noiseless&) {},
                   [](const BitFlip& m) {
                       if (!(m.p >= 0.5 && m.p <= 1.0))
                           throw ParameterError("bit-flip probability p must lie in [1/2, 1]");
                   },
                   [](const PreQuantNoise& m) {
                       if (!(m.sigma >= 0.0) || !std::isfinite(m.sigma))
                           throw ParameterError("pre-quantization noise sigma must be >= 0");
                   },
                   [](const Logistic& m) {
                       if (!(m.alpha > 0.0) || !std::isfinite(m.alpha))
                           throw ParameterError("logistic scale alpha must be > 0");
                   },
               },
               model);
}

double theta_eval(const LinkModel& model, double z) {
    return std::visit(overloaded{
                          [z](const Noiseless&) { return sign(z); },
                          [z](const BitFlip& m) { return 2.0 * sign(z) * (m.p - 0.5); },
                          [z](const PreQuantNoise& m) {
                              // 1 - 2 P{nu <= -z} = erf(z / (sigma sqrt 2))
                              if (m.sigma == 0.0) return sign(z);
                              return std::erf(z / (m.sigma * std::sqrt(2.0)));
                          },
                          [z](const Logistic& m) { return std::tanh(m.alpha * z / 2.0); },
                      },
                      model);
}

double gaussian_expectation(const std::function<double(double)>& f) {
    const auto& rule = hermite_rule();
    double sum = 0.0;
    for (Eigen::Index i = 0; i < rule.nodes.size(); ++i) sum += rule.weights(i) * f(rule.nodes(i));
    return sum;
}

double lambda_analytic(const LinkModel& model) {
    const double mean_abs = std::sqrt(2.0 / M_PI);
    return std::visit(overloaded{
                          [&](const Noiseless&) { return mean_abs; },
                          [&](const BitFlip& m) { return 2.0 * mean_abs * (m.p - 0.5); },
                          [](const PreQuantNoise& m) {
                              return std::sqrt(2.0 / (M_PI * (m.sigma * m.sigma + 1.0)));
                          },
                          [](const Logistic& m) { return logistic_lambda(m.alpha); },
                      },
                      model);
}

// ---------------------------------------------------------------------------

CovarianceSpec::CovarianceSpec(const Eigen::MatrixXd& sigma) : matrix_(sigma) {
    if (sigma.rows() != sigma.cols() || sigma.rows() == 0)
        throw ParameterError("covariance must be a nonempty square matrix");
    const double scale = std::max(1.0, sigma.cwiseAbs().maxCoeff());
    if ((sigma - sigma.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
        throw ParameterError("covariance must be symmetric");
    const Eigen::MatrixXd off = sigma - Eigen::MatrixXd(sigma.diagonal().asDiagonal());
    diagonal_ = off.cwiseAbs().maxCoeff() == 0.0;
    decompose();
}

CovarianceSpec CovarianceSpec::diagonal(const Eigen::VectorXd& entries) {
    if (entries.size() == 0) throw ParameterError("covariance must be nonempty");
    CovarianceSpec out;
    out.matrix_ = entries.asDiagonal();
    out.diagonal_ = true;
    out.decompose();
    return out;
}

void CovarianceSpec::decompose() {
    const Eigen::Index n = matrix_.rows();
    if (diagonal_) {
        eigenvalues_ = matrix_.diagonal();
        eigenvectors_ = Eigen::MatrixXd::Identity(n, n);
    } else {
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix_);
        if (solver.info() != Eigen::Success)
            throw ParameterError("covariance eigendecomposition failed");
        eigenvalues_ = solver.eigenvalues();
        eigenvectors_ = solver.eigenvectors();
    }
    if (!(eigenvalues_.minCoeff() > 0.0) || !eigenvalues_.allFinite())
        throw ParameterError("covariance must be positive-definite");
    sqrt_ = eigenvectors_ * eigenvalues_.cwiseSqrt().asDiagonal() * eigenvectors_.transpose();
    const Eigen::MatrixXd rebuilt =
        eigenvectors_ * eigenvalues_.asDiagonal() * eigenvectors_.transpose();
    if ((rebuilt - matrix_).cwiseAbs().maxCoeff() > 1e-8 * std::max(1.0, lambda_max()))
        throw ParameterError("covariance eigendecomposition is inconsistent");
}

Eigen::VectorXd CovarianceSpec::apply_sqrt(const Eigen::VectorXd& v) const {
    if (diagonal_) return eigenvalues_.cwiseSqrt().cwiseProduct(v);
    return sqrt_ * v;
}

double CovarianceSpec::sqrt_norm(const Eigen::VectorXd& v) const {
    if (diagonal_) return std::sqrt((eigenvalues_.array() * v.array().square()).sum());
    return std::sqrt(std::max(0.0, v.dot(matrix_ * v)));
}

// ---------------------------------------------------------------------------

MeasurementRecord synthesize(const Signal& signal, const LinkModel& model, Eigen::Index m,
                             const RngSpec& rng, const SynthesisOptions& options,
                             const std::optional<CovarianceSpec>& covariance) {
    validate(model);
    auto record = synthesize_impl(signal, bit_rule_for(model), m, rng, options, covariance);
    record.model = model;
    return record;
}

MeasurementRecord synthesize_with_theta(const Signal& signal,
                                        const std::function<double(double)>& theta,
                                        Eigen::Index m, const RngSpec& rng,
                                        const SynthesisOptions& options) {
    BitRule rule = [&theta](double z, NormalSampler& noise) {
        const double prob_plus = 0.5 * (1.0 + std::clamp(theta(z), -1.0, 1.0));
        return static_cast<std::int8_t>(noise.uniform() < prob_plus ? 1 : -1);
    };
    return synthesize_impl(signal, rule, m, rng, options, std::nullopt);
}

Eigen::VectorXd direction_for_bits(const MeasurementRecord& record, std::span<const std::int8_t> y,
                                   unsigned workers) {
    const Eigen::Index m = record.m;
    const Eigen::Index n = record.n();
    if (static_cast<Eigen::Index>(y.size()) != m)
        throw ParameterError("bit vector length does not match the record");
    Eigen::VectorXd yv(m);
    for (Eigen::Index i = 0; i < m; ++i) yv(i) = y[static_cast<std::size_t>(i)];

    const Eigen::Index blocks = block_count(m);
    std::vector<Eigen::VectorXd> partial(static_cast<std::size_t>(blocks));
    const CovarianceSpec* cov = record.covariance ? &*record.covariance : nullptr;
    detail::parallel_for(static_cast<std::size_t>(blocks), workers, [&](std::size_t b) {
        const auto block = static_cast<Eigen::Index>(b);
        const Eigen::Index begin = block * kRowBlock;
        const Eigen::Index rows = std::min(kRowBlock, m - begin);
        if (record.retained_rows) {
            partial[b] = record.retained_rows->middleRows(begin, rows).transpose() *
                         yv.segment(begin, rows);
        } else {
            const RowBlock a = generate_rows(record.rng, block, m, n, cov);
            partial[b] = a.transpose() * yv.segment(begin, rows);
        }
    });
    Eigen::VectorXd c = Eigen::VectorXd::Zero(n);
    for (const auto& p : partial) c += p;
    return c / static_cast<double>(m);
}

// ---------------------------------------------------------------------------

std::string_view to_string(CorruptionStrategy strategy) {
    return strategy == CorruptionStrategy::random ? "random" : "greedy";
}

CorruptionStrategy corruption_strategy_from_string(std::string_view name) {
    if (name == "random") return CorruptionStrategy::random;
    if (name == "greedy" || name == "greedy-magnitude" || name == "greedy_magnitude")
        return CorruptionStrategy::greedy_magnitude;
    throw ParameterError("unknown corruption strategy '" + std::string(name) + "'");
}

std::vector<std::int8_t> corrupt(std::span<const std::int8_t> y, double tau,
                                 CorruptionStrategy strategy, const RngSpec& rng,
                                 std::optional<std::span<const double>> context) {
    if (!(tau >= 0.0 && tau <= 1.0)) throw ParameterError("corruption fraction tau must lie in [0, 1]");
    for (auto bit : y)
        if (bit != 1 && bit != -1) throw ParameterError("corrupt expects a +-1 sign vector");
    const std::size_t m = y.size();
    const auto flips = static_cast<std::size_t>(std::floor(tau * static_cast<double>(m)));
    std::vector<std::int8_t> out(y.begin(), y.end());

    std::vector<std::size_t> order(m);
    std::iota(order.begin(), order.end(), std::size_t{0});
    if (strategy == CorruptionStrategy::greedy_magnitude) {
        if (!context) throw ParameterError("greedy-magnitude corruption needs row inner products");
        if (context->size() != m) throw ParameterError("corruption context length mismatch");
        const auto& z = *context;
        std::partial_sort(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(flips),
                          order.end(), [&](std::size_t a, std::size_t b) {
                              const double za = std::abs(z[a]), zb = std::abs(z[b]);
                              return za != zb ? za > zb : a < b;
                          });
    } else {
        // Partial Fisher-Yates: the first `flips` slots become a uniform subset.
        NormalSampler sampler(rng);
        for (std::size_t i = 0; i < flips; ++i) {
            const auto j = i + static_cast<std::size_t>(sampler.below(m - i));
            std::swap(order[i], order[j]);
        }
    }
    for (std::size_t i = 0; i < flips; ++i) out[order[i]] = static_cast<std::int8_t>(-out[order[i]]);
    return out;
}

// ---------------------------------------------------------------------------

LambdaEstimate lambda_empirical(const Signal& signal, const LinkModel& model, Eigen::Index m,
                                const RngSpec& rng, unsigned workers) {
    SynthesisOptions options;
    options.keep_inner_products = true;
    options.workers = workers;
    const auto record = synthesize(signal, model, m, rng, options);
    const auto& z = *record.inner_products;
    double sum = 0.0, sum_sq = 0.0;
    for (Eigen::Index i = 0; i < m; ++i) {
        const double v = record.y[static_cast<std::size_t>(i)] * z(i);
        sum += v;
        sum_sq += v * v;
    }
    const double md = static_cast<double>(m);
    const double mean = sum / md;
    const double var = m > 1 ? std::max(0.0, (sum_sq - md * mean * mean) / (md - 1.0)) : 0.0;
    return {mean, std::sqrt(var / md)};
}

}  // namespace obcs
