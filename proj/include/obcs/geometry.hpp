#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "obcs/measure.hpp"
#include "obcs/rng.hpp"

namespace obcs {

/// Euclidean projection onto a closed convex set.
using Projection = std::function<Eigen::VectorXd(const Eigen::VectorXd&)>;
/// Support function h_K(g) = sup_{x in K} <g, x>.
using SupportFunction = std::function<double(const Eigen::VectorXd&)>;
/// Draws one point of a set from the given stream.
using PointSampler = std::function<Eigen::VectorXd(const RngSpec&)>;

// ---------------------------------------------------------------------------
// Projections

/// Projection onto {||x||_1 <= radius} by sorting magnitudes and locating the
/// soft-threshold level, O(n log n). Throws ParameterError unless radius > 0.
Eigen::VectorXd project_l1_ball(const Eigen::VectorXd& v, double radius);

Eigen::VectorXd project_l2_ball(const Eigen::VectorXd& v, double radius);

struct EllipsoidOptions {
    double residual_tol = 1e-10;
    int max_iter = 200;
};

/// Projection onto {x : x^T Sigma x <= 1}. Infeasible points map to
/// (I + mu Sigma)^{-1} v, with mu > 0 the root of the constraint found by
/// Newton steps safeguarded by bisection in the eigenbasis of Sigma.
/// Throws NumericalError if the root is not bracketed to tolerance.
Eigen::VectorXd project_ellipsoid(const Eigen::VectorXd& v, const CovarianceSpec& cov,
                                  const EllipsoidOptions& options = {});

struct DykstraOptions {
    double tol = 1e-9;
    int max_iter = 10000;
};

/// Dykstra's alternating projections onto the intersection of convex sets.
/// Stops when one full sweep moves the iterate by less than `tol`; throws
/// NumericalError with the last movement after `max_iter` sweeps.
Eigen::VectorXd dykstra_project(const Eigen::VectorXd& v, std::span<const Projection> constraints,
                                const DykstraOptions& options = {});

/// Projection onto B_2^n ∩ radius_l1 · B_1^n via Dykstra.
Projection sparse_ball_projection(double l1_radius, const DykstraOptions& options = {});

// ---------------------------------------------------------------------------
// Support functions and mean width

/// Support function of the exact-sparse set S_{n,s} = {||x||_0 <= s, ||x||_2 <= 1}:
/// the l2 norm of the s largest-magnitude entries of g.
double support_sparse_exact(const Eigen::VectorXd& g, std::size_t s);

struct MeanWidthEstimate {
    double w_hat = 0.0;
    double std_err = 0.0;
    std::size_t n_samples = 0;
    std::string set_tag;
};

/// Monte Carlo mean width of an origin-symmetric set: w = 2 E h_K(g).
/// Draw j uses NormalSampler(rng, j), so two calls with the same rng see the
/// same Gaussian vectors.
MeanWidthEstimate mean_width_mc(const SupportFunction& support, Eigen::Index n,
                                std::size_t samples, const RngSpec& rng,
                                std::string set_tag = {}, unsigned workers = 1);

// ---------------------------------------------------------------------------
// Distances

/// arccos(<x, x'>), evaluated as 2 atan2(||x - x'||, ||x + x'||). Throws
/// ParameterError unless both inputs have unit norm within 1e-8.
double geodesic_distance(const Eigen::VectorXd& x, const Eigen::VectorXd& y);

/// Number of disagreeing coordinates. Throws ParameterError on length mismatch.
std::size_t hamming_distance(std::span<const std::int8_t> y, std::span<const std::int8_t> z);

// ---------------------------------------------------------------------------
// Embedding audits

struct TessellationAudit {
    double max_abs_deviation = 0.0;
    std::size_t pair_count = 0;
    Eigen::Index m = 0;
    double delta_target = 0.0;
};

struct AuditOptions {
    /// Fraction of pairs built as near-duplicates.
    double near_fraction = 0.25;
    /// Near-duplicate pairs are normalize((1 - e) x + e z), e ~ U(0, near_scale).
    double near_scale = 0.05;
    double delta_target = 0.05;
    unsigned workers = 1;
};

using PointPair = std::pair<Eigen::VectorXd, Eigen::VectorXd>;

/// |d_G(x, x')/pi - d_H(sign(Ax), sign(Ax'))/m| for each pair, with a single
/// Gaussian A (m x n) streamed in row blocks from `rng`.
std::vector<double> tessellation_deviations(std::span<const PointPair> pairs, Eigen::Index m,
                                            const RngSpec& rng, unsigned workers = 1);

/// Samples `pair_count` pairs from `sampler` (points of K on the unit
/// sphere), a share of them near-duplicates, and reports the largest
/// tessellation deviation.
TessellationAudit tessellation_audit(const PointSampler& sampler, Eigen::Index n, Eigen::Index m,
                                     std::size_t pair_count, const RngSpec& rng,
                                     const AuditOptions& options = {});

/// |(1/m) ||Ax||_1 - sqrt(2/pi) ||x||_2| for each point.
std::vector<double> l1_embedding_deviations(std::span<const Eigen::VectorXd> points,
                                            Eigen::Index m, const RngSpec& rng,
                                            unsigned workers = 1);

/// Largest l1-embedding deviation over `sample_count` points drawn from
/// `sampler` (points of K - K).
double l1_embedding_audit(const PointSampler& sampler, Eigen::Index n, Eigen::Index m,
                          std::size_t sample_count, const RngSpec& rng, unsigned workers = 1);

}  // namespace obcs
