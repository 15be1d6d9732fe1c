#include "obcs/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "obcs/errors.hpp"
#include "obcs/parallel.hpp"

namespace obcs {

Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius) {
    if (!(radius > 0.0)) throw ParameterError("l1 ball radius must be positive");
    if (v.lpNorm<1>() <= radius) return v;

    std::vector<double> mags(v.data(), v.data() + v.size());
    for (auto& a : mags) a = std::abs(a);
    std::sort(mags.begin(), mags.end(), std::greater<>());
    double cumulative = 0.0, threshold = 0.0;
    for (std::size_t j = 0; j < mags.size(); ++j) {
        cumulative += mags[j];
        const double candidate = (cumulative - radius) / static_cast<double>(j + 1);
        if (mags[j] - candidate > 0.0) threshold = candidate;
        else break;
    }
    Eigen::VectorXd out(v.size());
    for (Eigen::Index i = 0; i < v.size(); ++i) {
        const double shrunk = std::max(std::abs(v(i)) - threshold, 0.0);
        out(i) = std::copysign(shrunk, v(i));
    }
    return out;
}

Eigen::VectorXd project_l2_ball(const Eigen::VectorXd& v, double radius) {
    if (!(radius > 0.0)) throw ParameterError("l2 ball radius must be positive");
    const double norm = v.norm();
    if (norm <= radius) return v;
    return v * (radius / norm);
}

Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& v, const CovarianceSpec& cov,
                                  const EllipsoidOptions& options) {
    if (v.size() != cov.dim()) throw ParameterError("ellipsoid projection dimension mismatch");
    const double level = cov.sqrt_norm(v);
    if (level <= 1.0) return v;

    const Eigen::VectorXd& lam = cov.eigenvalues();
    const Eigen::VectorXd w = cov.is_diagonal() ? v : Eigen::VectorXd(cov.eigenvectors().transpose() * v);
    // g(mu) = sum lam_i w_i^2 / (1 + mu lam_i)^2 - 1, strictly decreasing in mu.
    auto residual = [&](double mu) {
        return (lam.array() * w.array().square() / (1.0 + mu * lam.array()).square()).sum() - 1.0;
    };
    auto slope = [&](double mu) {
        return -2.0 * (lam.array().square() * w.array().square() / (1.0 + mu * lam.array()).cube()).sum();
    };

    double lo = 0.0, hi = 1.0 / lam.minCoeff();
    while (residual(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (!std::isfinite(hi)) throw NumericalError("ellipsoid projection: multiplier bracket diverged", residual(lo), 0);
    }
    double mu = 0.5 * (lo + hi);
    double r = residual(mu);
    int it = 0;
    for (; it < options.max_iter && std::abs(r) > options.residual_tol; ++it) {
        if (r > 0.0) lo = mu;
        else hi = mu;
        double next = mu - r / slope(mu);
        if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
        if (next == mu) break;
        mu = next;
        r = residual(mu);
    }
    if (std::abs(r) > options.residual_tol && hi - lo > 1e-15 * std::max(1.0, hi))
        throw NumericalError("ellipsoid projection did not converge", r, it);

    const Eigen::VectorXd scaled = (w.array() / (1.0 + mu * lam.array())).matrix();
    return cov.is_diagonal() ? scaled : Eigen::VectorXd(cov.eigenvectors() * scaled);
}

Eigen::VectorXd dykstra_project(const Eigen::VectorXd& v, std::span<const Projection> constraints,
                                const DykstraOptions& options) {
    if (constraints.empty()) return v;
    if (constraints.size() == 1) return constraints.front()(v);

    Eigen::VectorXd x = v;
    std::vector<Eigen::VectorXd> corrections(constraints.size(), Eigen::VectorXd::Zero(v.size()));
    double movement = 0.0;
    for (int sweep = 0; sweep < options.max_iter; ++sweep) {
        const Eigen::VectorXd start = x;
        for (std::size_t i = 0; i < constraints.size(); ++i) {
            const Eigen::VectorXd shifted = x + corrections[i];
            x = constraints[i](shifted);
            corrections[i] = shifted - x;
        }
        movement = (x - start).norm();
        if (movement < options.tol) return x;
    }
    throw NumericalError("Dykstra projection did not converge", movement, options.max_iter);
}

Projection sparse_ball_projection(double l1_radius, const DykstraOptions& options) {
    if (!(l1_radius > 0.0)) throw ParameterError("l1 radius must be positive");
    return [l1_radius, options](const Eigen::VectorXd& v) {
        const Projection parts[] = {
            [](const Eigen::VectorXd& u) { return project_l2_ball(u, 1.0); },
            [l1_radius](const Eigen::VectorXd& u) { return project_l1_ball(u, l1_radius); },
        };
        return dykstra_project(v, parts, options);
    };
}

// ---------------------------------------------------------------------------

double support_sparse_exact(const Eigen::VectorXd& g, std::size_t s) {
    const auto n = static_cast<std::size_t>(g.size());
    if (s < 1 || s > n) throw ParameterError("support_sparse_exact requires 1 <= s <= n");
    std::vector<double> sq(n);
    for (std::size_t i = 0; i < n; ++i) sq[i] = g(static_cast<Eigen::Index>(i)) * g(static_cast<Eigen::Index>(i));
    std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(s - 1), sq.end(), std::greater<>());
    std::sort(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(s), std::greater<>());
    double total = 0.0;
    for (std::size_t i = 0; i < s; ++i) total += sq[i];
    return std::sqrt(total);
}

MeanWidthEstimate mean_width_mc(const SupportFunction& support, Eigen::Index n, std::size_t samples,
                                const RngSpec& rng, std::string set_tag, unsigned workers) {
    if (samples < 2) throw ParameterError("mean width estimate needs at least two samples");
    std::vector<double> values(samples);
    detail::parallel_for(samples, workers, [&](std::size_t j) {
        Eigen::VectorXd g(n);
        NormalSampler sampler(rng, j);
        sampler.fill_normal(g.data(), static_cast<std::size_t>(n));
        values[j] = 2.0 * support(g);
    });
    const double count = static_cast<double>(samples);
    const double mean = std::accumulate(values.begin(), values.end(), 0.0) / count;
    double ss = 0.0;
    for (double v : values) ss += (v - mean) * (v - mean);
    MeanWidthEstimate out;
    out.w_hat = mean;
    out.std_err = std::sqrt(ss / (count - 1.0) / count);
    out.n_samples = samples;
    out.set_tag = std::move(set_tag);
    return out;
}

// ---------------------------------------------------------------------------

double geodesic_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y) {
    if (x.size() != y.size()) throw ParameterError("geodesic distance: dimension mismatch");
    if (std::abs(x.norm() - 1.0) > 1e-8 || std::abs(y.norm() - 1.0) > 1e-8)
        throw ParameterError("geodesic distance requires unit-norm inputs");
    return 2.0 * std::atan2((x - y).norm(), (x + y).norm());
}

std::size_t hamming_distance(std::span<const std::int8_t> y, std::span<const std::int8_t> z) {
    if (y.size() != z.size()) throw ParameterError("hamming distance: length mismatch");
    std::size_t count = 0;
    for (std::size_t i = 0; i < y.size(); ++i) count += y[i] != z[i];
    return count;
}

// ---------------------------------------------------------------------------

namespace {

using RowBlock = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// Calls visit(A_block) for each row block of an m x n Gaussian matrix and
// returns the per-block results in block order.
template <class Visit>
auto for_row_blocks(Eigen::Index m, Eigen::Index n, const RngSpec& rng, unsigned workers, Visit&& visit) {
    using Result = decltype(visit(std::declval<const RowBlock&>()));
    const auto blocks = static_cast<std::size_t>((m + kRowBlock - 1) / kRowBlock);
    std::vector<Result> results(blocks);
    detail::parallel_for(blocks, workers, [&](std::size_t b) {
        const Eigen::Index begin = static_cast<Eigen::Index>(b) * kRowBlock;
        RowBlock a(std::min(kRowBlock, m - begin), n);
        NormalSampler sampler(rng, b);
        sampler.fill_normal(a.data(), static_cast<std::size_t>(a.size()));
        results[b] = visit(a);
    });
    return results;
}

Eigen::VectorXd normalized(const Eigen::VectorXd& v) { return v / v.norm(); }

}  // namespace

std::vector<double> tessellation_deviations(std::span<const PointPair> pairs, Eigen::Index m,
                                            const RngSpec& rng, unsigned workers) {
    if (m <= 0) throw ParameterError("audit needs m > 0");
    if (pairs.empty()) return {};
    const Eigen::Index n = pairs.front().first.size();
    const auto count = static_cast<Eigen::Index>(pairs.size());
    Eigen::MatrixXd points(n, 2 * count);
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto& [x, y] = pairs[static_cast<std::size_t>(k)];
        if (x.size() != n || y.size() != n) throw ParameterError("audit points have mixed dimensions");
        points.col(2 * k) = x;
        points.col(2 * k + 1) = y;
    }
    auto partial = for_row_blocks(m, n, rng, workers, [&](const RowBlock& a) {
        const Eigen::MatrixXd z = a * points;
        Eigen::VectorXi disagreements = Eigen::VectorXi::Zero(count);
        for (Eigen::Index k = 0; k < count; ++k)
            for (Eigen::Index i = 0; i < z.rows(); ++i)
                disagreements(k) += sign(z(i, 2 * k)) != sign(z(i, 2 * k + 1));
        return disagreements;
    });
    Eigen::VectorXi total = Eigen::VectorXi::Zero(count);
    for (const auto& p : partial) total += p;

    std::vector<double> deviations(pairs.size());
    for (Eigen::Index k = 0; k < count; ++k) {
        const auto& [x, y] = pairs[static_cast<std::size_t>(k)];
        const double angular = geodesic_distance(x, y) / M_PI;
        deviations[static_cast<std::size_t>(k)] =
            std::abs(angular - static_cast<double>(total(k)) / static_cast<double>(m));
    }
    return deviations;
}

TessellationAudit tessellation_audit(const PointSampler& sampler, Eigen::Index n, Eigen::Index m,
                                     std::size_t pair_count, const RngSpec& rng,
                                     const AuditOptions& options) {
    const RngSpec points_rng = rng.child(1);
    const RngSpec matrix_rng = rng.child(2);
    const auto near_count =
        static_cast<std::size_t>(std::floor(options.near_fraction * static_cast<double>(pair_count)));
    std::vector<PointPair> pairs;
    pairs.reserve(pair_count);
    for (std::size_t k = 0; k < pair_count; ++k) {
        const RngSpec pair_rng = points_rng.child(k);
        Eigen::VectorXd x = sampler(pair_rng.child(0));
        Eigen::VectorXd z = sampler(pair_rng.child(1));
        if (x.size() != n || z.size() != n) throw ParameterError("sampler returned wrong dimension");
        if (k < near_count) {
            NormalSampler u(pair_rng.child(2));
            const double e = options.near_scale * u.uniform();
            z = normalized((1.0 - e) * x + e * z);
        }
        pairs.emplace_back(std::move(x), std::move(z));
    }
    const auto deviations = tessellation_deviations(pairs, m, matrix_rng, options.workers);
    TessellationAudit audit;
    audit.max_abs_deviation = deviations.empty() ? 0.0 : *std::max_element(deviations.begin(), deviations.end());
    audit.pair_count = pair_count;
    audit.m = m;
    audit.delta_target = options.delta_target;
    return audit;
}

std::vector<double> l1_embedding_deviations(std::span<const Eigen::VectorXd> points, Eigen::Index m,
                                            const RngSpec& rng, unsigned workers) {
    if (m <= 0) throw ParameterError("audit needs m > 0");
    if (points.empty()) return {};
    const Eigen::Index n = points.front().size();
    Eigen::MatrixXd cols(n, static_cast<Eigen::Index>(points.size()));
    for (std::size_t k = 0; k < points.size(); ++k) {
        if (points[k].size() != n) throw ParameterError("audit points have mixed dimensions");
        cols.col(static_cast<Eigen::Index>(k)) = points[k];
    }
    auto partial = for_row_blocks(m, n, rng, workers, [&](const RowBlock& a) {
        return Eigen::VectorXd((a * cols).cwiseAbs().colwise().sum().transpose());
    });
    Eigen::VectorXd total = Eigen::VectorXd::Zero(cols.cols());
    for (const auto& p : partial) total += p;

    std::vector<double> deviations(points.size());
    const double mean_abs = std::sqrt(2.0 / M_PI);
    for (std::size_t k = 0; k < points.size(); ++k)
        deviations[k] = std::abs(total(static_cast<Eigen::Index>(k)) / static_cast<double>(m) -
                                 mean_abs * points[k].norm());
    return deviations;
}

double l1_embedding_audit(const PointSampler& sampler, Eigen::Index n, Eigen::Index m,
                          std::size_t sample_count, const RngSpec& rng, unsigned workers) {
    std::vector<Eigen::VectorXd> points;
    points.reserve(sample_count);
    for (std::size_t k = 0; k < sample_count; ++k) {
        points.push_back(sampler(rng.child(1).child(k)));
        if (points.back().size() != n) throw ParameterError("sampler returned wrong dimension");
    }
    const auto deviations = l1_embedding_deviations(points, m, rng.child(2), workers);
    return deviations.empty() ? 0.0 : *std::max_element(deviations.begin(), deviations.end());
}

}  // namespace obcs
