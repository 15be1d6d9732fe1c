#include "obcs/solve.hpp"

#include <algorithm>
#include <cmath>
#include <deque>

#include "obcs/errors.hpp"

namespace obcs {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};

Eigen::VectorXd soft_threshold(const Eigen::VectorXd& c, double t) {
    return (c.array().sign() * (c.array().abs() - t).max(0.0)).matrix();
}

double correlated_l1_radius(const CovarianceSpec& cov, double s) {
    return std::sqrt(s / cov.lambda_min());
}

Eigen::VectorXd singular_values(const Eigen::MatrixXd& x) {
    return Eigen::JacobiSVD<Eigen::MatrixXd>(x).singularValues();
}

}  // namespace

std::string constraint_tag(const ConstraintSet& set) {
    return std::visit(overloaded{
                          [](const SparseBall&) { return std::string("sparse"); },
                          [](const CorrelatedSparse&) { return std::string("correlated"); },
                          [](const NuclearFrobenius&) { return std::string("lowrank"); },
                          [](const OracleSet& o) { return o.tag; },
                      },
                      set);
}

double fixed_signal_error_bound(double lambda, Eigen::Index m, double w, double beta) {
    return 8.0 / (lambda * std::sqrt(static_cast<double>(m))) * (w + beta);
}

// ---------------------------------------------------------------------------

EstimateReport sparse_argmax(const Eigen::VectorXd& c, double s) {
    if (!(s >= 1.0)) throw ParameterError("sparsity budget s must be >= 1");
    const double l2 = c.norm();
    if (!(l2 > 0.0)) throw DegenerateInputError("sparse_argmax: zero objective has no unique maximizer");
    const double budget = std::sqrt(s);

    EstimateReport report;
    report.solver_tag = "sparse-closed-form";
    if (c.lpNorm<1>() <= budget * l2) {
        report.x_hat = c / l2;
        report.objective = c.dot(report.x_hat);
        return report;
    }

    const double top = c.cwiseAbs().maxCoeff();
    const auto ties = (c.array().abs() == top).count();
    if (static_cast<double>(ties) > s) {
        // Every soft-threshold level keeps the l1/l2 ratio >= sqrt(ties) > sqrt(s).
        auto fallback = generic_argmax(c, sparse_ball_projection(budget));
        fallback.solver_tag = "sparse-fallback-ascent";
        return fallback;
    }

    auto feasible = [&](double t) {
        const Eigen::VectorXd shrunk = soft_threshold(c, t);
        return shrunk.lpNorm<1>() <= budget * shrunk.norm();
    };
    double lo = 0.0, hi = top;
    long it = 0;
    while (hi - lo > 1e-12 * top && it < 200) {
        const double mid = 0.5 * (lo + hi);
        (feasible(mid) ? hi : lo) = mid;
        ++it;
    }
    Eigen::VectorXd x = soft_threshold(c, hi);
    if (!(x.norm() > 0.0)) {
        // The crossing sits at t -> max|c|: the limit keeps only the tied entries.
        x = (c.array().abs() == top).select(c.array().sign(), 0.0).matrix();
    }
    report.x_hat = x / x.norm();
    report.objective = c.dot(report.x_hat);
    report.iterations = it;
    return report;
}

EstimateReport generic_argmax(const Eigen::VectorXd& c, const Projection& project,
                              const AscentOptions& options) {
    const double cnorm = c.norm();
    if (!(cnorm > 0.0)) throw DegenerateInputError("generic_argmax: zero objective has no unique maximizer");
    if (options.patience < 1) throw ParameterError("ascent patience must be >= 1");
    const double step0 = options.step0 > 0.0 ? options.step0 : 1.0 / cnorm;

    Eigen::VectorXd x = options.start.size() == 0 ? Eigen::VectorXd::Zero(c.size()) : options.start;
    if (x.size() != c.size()) throw ParameterError("ascent start has the wrong dimension");
    x = project(x);
    Eigen::VectorXd best = x;
    double best_obj = c.dot(x);

    // best objective at the end of each of the last `patience` iterations
    std::deque<double> window;
    double gap = std::numeric_limits<double>::infinity();
    for (int k = 0; k < options.max_iter; ++k) {
        const double step = step0 / std::sqrt(static_cast<double>(k) + 1.0);
        x = project(x + step * c);
        const double obj = c.dot(x);
        if (obj > best_obj) {
            best_obj = obj;
            best = x;
        }
        window.push_back(best_obj);
        if (static_cast<int>(window.size()) > options.patience) {
            gap = best_obj - window.front();
            window.pop_front();
            if (gap < options.tol * cnorm) {
                EstimateReport report;
                report.x_hat = best;
                report.objective = best_obj;
                report.solver_tag = "projected-ascent";
                report.iterations = k + 1;
                return report;
            }
        }
    }
    throw NumericalError("projected ascent did not stabilize", gap, options.max_iter);
}

EstimateReport correlated_argmax(const Eigen::VectorXd& c, const CovarianceSpec& cov, double s,
                                 const AscentOptions& options) {
    if (c.size() != cov.dim()) throw ParameterError("correlated_argmax: dimension mismatch");
    auto report = generic_argmax(c, projection_for(CorrelatedSparse{cov, s}), options);
    report.solver_tag = "correlated-ascent";
    return report;
}

// ---------------------------------------------------------------------------

EstimateReport lowrank_argmax(const Eigen::MatrixXd& c, double r, Eigen::Index svd_cap) {
    if (std::min(c.rows(), c.cols()) > svd_cap)
        throw ParameterError("lowrank_argmax: min dimension " + std::to_string(std::min(c.rows(), c.cols())) +
                             " exceeds the SVD cap " + std::to_string(svd_cap));
    if (!(r >= 1.0)) throw ParameterError("rank budget r must be >= 1");
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(c, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sigma = svd.singularValues();
    if (!(sigma.norm() > 0.0)) throw DegenerateInputError("lowrank_argmax: zero objective");
    const auto spectral = sparse_argmax(sigma, r);
    const Eigen::MatrixXd x = svd.matrixU() * spectral.x_hat.asDiagonal() * svd.matrixV().transpose();

    EstimateReport report;
    report.x_hat = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    report.objective = Eigen::Map<const Eigen::VectorXd>(c.data(), c.size()).dot(report.x_hat);
    report.solver_tag = "lowrank-spectral";
    report.iterations = spectral.iterations;
    return report;
}

Eigen::MatrixXd project_nuclear_ball(const Eigen::MatrixXd& x, double radius) {
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(x, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const Eigen::VectorXd sigma = svd.singularValues();
    if (sigma.sum() <= radius) return x;
    const Eigen::VectorXd shrunk = project_l1_ball(sigma, radius);
    return svd.matrixU() * shrunk.asDiagonal() * svd.matrixV().transpose();
}

Projection nuclear_frobenius_projection(double r, Eigen::Index rows, Eigen::Index cols,
                                        const DykstraOptions& options) {
    if (!(r >= 1.0)) throw ParameterError("rank budget r must be >= 1");
    const double radius = std::sqrt(r);
    return [radius, rows, cols, options](const Eigen::VectorXd& v) {
        if (v.size() != rows * cols) throw ParameterError("nuclear projection: dimension mismatch");
        const Projection parts[] = {
            [](const Eigen::VectorXd& u) { return project_l2_ball(u, 1.0); },
            [=](const Eigen::VectorXd& u) {
                const Eigen::MatrixXd p =
                    project_nuclear_ball(Eigen::Map<const Eigen::MatrixXd>(u.data(), rows, cols), radius);
                return Eigen::VectorXd(Eigen::Map<const Eigen::VectorXd>(p.data(), p.size()));
            },
        };
        return dykstra_project(v, parts, options);
    };
}

Projection projection_for(const ConstraintSet& set) {
    return std::visit(
        overloaded{
            [](const SparseBall& k) { return sparse_ball_projection(std::sqrt(k.s)); },
            [](const CorrelatedSparse& k) -> Projection {
                const double radius = correlated_l1_radius(k.cov, k.s);
                return [radius, cov = k.cov](const Eigen::VectorXd& v) {
                    const Projection parts[] = {
                        [radius](const Eigen::VectorXd& u) { return project_l1_ball(u, radius); },
                        [&cov](const Eigen::VectorXd& u) { return project_ellipsoid(u, cov); },
                    };
                    return dykstra_project(v, parts);
                };
            },
            [](const NuclearFrobenius& k) { return nuclear_frobenius_projection(k.r, k.rows, k.cols); },
            [](const OracleSet& k) { return k.project; },
        },
        set);
}

double constraint_violation(const ConstraintSet& set, const Eigen::VectorXd& x) {
    return std::visit(
        overloaded{
            [&](const SparseBall& k) {
                return std::max({0.0, x.norm() - 1.0, x.lpNorm<1>() - std::sqrt(k.s)});
            },
            [&](const CorrelatedSparse& k) {
                return std::max({0.0, k.cov.sqrt_norm(x) - 1.0,
                                 x.lpNorm<1>() - correlated_l1_radius(k.cov, k.s)});
            },
            [&](const NuclearFrobenius& k) {
                const Eigen::MatrixXd mat = Eigen::Map<const Eigen::MatrixXd>(x.data(), k.rows, k.cols);
                return std::max({0.0, x.norm() - 1.0, singular_values(mat).sum() - std::sqrt(k.r)});
            },
            [&](const OracleSet& k) { return (k.project(x) - x).norm(); },
        },
        set);
}

SupportFunction support_function_for(const ConstraintSet& set) {
    return std::visit(
        overloaded{
            [](const SparseBall& k) -> SupportFunction {
                return [s = k.s](const Eigen::VectorXd& g) {
                    return g.norm() > 0.0 ? sparse_argmax(g, s).objective : 0.0;
                };
            },
            [](const CorrelatedSparse& k) -> SupportFunction {
                return [k](const Eigen::VectorXd& g) {
                    return g.norm() > 0.0 ? correlated_argmax(g, k.cov, k.s).objective : 0.0;
                };
            },
            [](const NuclearFrobenius& k) -> SupportFunction {
                return [k](const Eigen::VectorXd& g) {
                    if (!(g.norm() > 0.0)) return 0.0;
                    return lowrank_argmax(Eigen::Map<const Eigen::MatrixXd>(g.data(), k.rows, k.cols), k.r)
                        .objective;
                };
            },
            [](const OracleSet& k) -> SupportFunction {
                return [project = k.project](const Eigen::VectorXd& g) {
                    return g.norm() > 0.0 ? generic_argmax(g, project).objective : 0.0;
                };
            },
        },
        set);
}

// ---------------------------------------------------------------------------

namespace {

Eigen::Index expected_dimension(const ConstraintSet& set, Eigen::Index fallback) {
    return std::visit(overloaded{
                          [&](const SparseBall&) { return fallback; },
                          [](const CorrelatedSparse& k) { return k.cov.dim(); },
                          [](const NuclearFrobenius& k) { return k.rows * k.cols; },
                          [&](const OracleSet&) { return fallback; },
                      },
                      set);
}

}  // namespace

EstimateReport estimate(const MeasurementRecord& record, const ConstraintSet& constraint,
                        const std::optional<Signal>& truth, const EstimateOptions& options) {
    const Eigen::VectorXd& c = record.c;
    if (c.size() == 0) throw ParameterError("measurement record has no direction vector");
    if (expected_dimension(constraint, c.size()) != c.size())
        throw ParameterError("constraint dimension does not match the record (n=" +
                             std::to_string(c.size()) + ")");
    if (truth && truth->n() != c.size())
        throw ParameterError("ground-truth dimension does not match the record");

    EstimateReport report = std::visit(
        overloaded{
            [&](const SparseBall& k) { return sparse_argmax(c, k.s); },
            [&](const CorrelatedSparse& k) { return correlated_argmax(c, k.cov, k.s, options.ascent); },
            [&](const NuclearFrobenius& k) {
                return lowrank_argmax(Eigen::Map<const Eigen::MatrixXd>(c.data(), k.rows, k.cols), k.r);
            },
            [&](const OracleSet& k) { return generic_argmax(c, k.project, options.ascent); },
        },
        constraint);

    if (truth) {
        const Eigen::VectorXd& x = truth->values;
        report.error_sq = (report.x_hat - x).squaredNorm();
        report.normalized_error_sq = (report.x_hat - x / x.norm()).squaredNorm();
        if (const auto* k = std::get_if<CorrelatedSparse>(&constraint)) {
            const double e = k->cov.sqrt_norm(report.x_hat - x);
            report.sigma_metric_error_sq = e * e;
        }
    }

    if (options.compute_bound) {
        const LinkModel model = options.model.value_or(record.model);
        const double lambda = lambda_analytic(model);
        report.lambda_used = lambda;
        report.beta = options.beta;
        report.w_hat = options.w_hat ? *options.w_hat
                                     : mean_width_mc(support_function_for(constraint), c.size(),
                                                     options.width_samples, options.width_rng,
                                                     constraint_tag(constraint))
                                           .w_hat;
        if (lambda > 0.0)
            report.bound_value = fixed_signal_error_bound(lambda, record.m, *report.w_hat, options.beta);
    }
    return report;
}

}  // namespace obcs
