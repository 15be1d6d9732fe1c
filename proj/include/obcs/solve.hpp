#pragma once

#include <optional>
#include <string>
#include <variant>

#include <Eigen/Dense>

#include "obcs/geometry.hpp"
#include "obcs/measure.hpp"
#include "obcs/sampling.hpp"

namespace obcs {

// ---------------------------------------------------------------------------
// Constraint sets (all convex, closed, bounded and origin-symmetric).

/// B_2^n ∩ sqrt(s) B_1^n.
struct SparseBall {
    double s = 1.0;
};

/// {||x||_1 <= sqrt(s / lambda_min(Sigma)), ||Sigma^{1/2} x||_2 <= 1}.
struct CorrelatedSparse {
    CovarianceSpec cov;
    double s = 1.0;
};

/// {X in R^{rows x cols} : ||X||_* <= sqrt(r), ||X||_F <= 1}, vectorized column-major.
struct NuclearFrobenius {
    double r = 1.0;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;
};

/// An arbitrary set given by its projection.
struct OracleSet {
    Projection project;
    std::string tag = "oracle";
};

using ConstraintSet = std::variant<SparseBall, CorrelatedSparse, NuclearFrobenius, OracleSet>;

std::string constraint_tag(const ConstraintSet& set);

// ---------------------------------------------------------------------------

struct EstimateReport {
    /// Vectorized estimate (column-major matrix for low-rank sets).
    Eigen::VectorXd x_hat;
    double objective = 0.0;
    std::string solver_tag;
    long iterations = 0;
    std::optional<double> error_sq;
    std::optional<double> normalized_error_sq;
    std::optional<double> sigma_metric_error_sq;
    std::optional<double> lambda_used;
    std::optional<double> w_hat;
    std::optional<double> beta;
    std::optional<double> bound_value;
};

struct AscentOptions {
    /// Initial step; <= 0 selects 1 / ||c||_2.
    double step0 = 0.0;
    double tol = 1e-10;
    int patience = 50;
    int max_iter = 50000;
    /// Starting point; zero when empty.
    Eigen::VectorXd start;
};

/// Maximizer of <c, x> over B_2^n ∩ sqrt(s) B_1^n.
///
/// When ||c||_1 / ||c||_2 <= sqrt(s) the answer is c / ||c||_2. Otherwise the
/// answer is S_t(c) / ||S_t(c)||_2 for the soft-threshold level t at which the
/// l1/l2 ratio of S_t(c) equals sqrt(s); t is bisected on (0, max|c|) and the
/// feasible end of the bracket is returned. If tied top magnitudes keep the
/// ratio above sqrt(s) for every t, the problem is handed to generic_argmax.
/// Throws DegenerateInputError for c = 0.
EstimateReport sparse_argmax(const Eigen::VectorXd& c, double s);

/// Projected gradient ascent x <- P_K(x + eta_k c), eta_k = eta_0 / sqrt(k + 1),
/// tracking the best iterate. Stops once the best objective has improved by
/// less than `tol` over `patience` iterations; throws NumericalError if that
/// does not happen within max_iter.
EstimateReport generic_argmax(const Eigen::VectorXd& c, const Projection& project,
                              const AscentOptions& options = {});

/// Correlated program: projected ascent with Dykstra over the scaled l1 ball
/// and the Sigma-ellipsoid.
EstimateReport correlated_argmax(const Eigen::VectorXd& c, const CovarianceSpec& cov, double s,
                                 const AscentOptions& options = {});

/// Default cap on min(rows, cols) for the dense SVD.
inline constexpr Eigen::Index kSvdCap = 128;

/// Maximizer of <C, X> over {||X||_* <= sqrt(r), ||X||_F <= 1}: the spectrum of
/// the answer is sparse_argmax(sigma(C), r) on the singular vectors of C.
/// Throws ParameterError when min(rows, cols) exceeds `svd_cap`.
EstimateReport lowrank_argmax(const Eigen::MatrixXd& c, double r, Eigen::Index svd_cap = kSvdCap);

/// Projection onto {||X||_* <= radius} (l1 projection of the singular values).
Eigen::MatrixXd project_nuclear_ball(const Eigen::MatrixXd& x, double radius);

/// Projection onto NuclearFrobenius(r) on vectorized matrices, via Dykstra.
Projection nuclear_frobenius_projection(double r, Eigen::Index rows, Eigen::Index cols,
                                        const DykstraOptions& options = {});

/// Projection onto a constraint set (Dykstra for the intersections).
Projection projection_for(const ConstraintSet& set);

/// Feasibility residual: the largest constraint violation of x (0 when feasible).
double constraint_violation(const ConstraintSet& set, const Eigen::VectorXd& x);

// ---------------------------------------------------------------------------

struct EstimateOptions {
    /// Fill lambda_used, w_hat and bound_value = (8 / (lambda sqrt m)) (w_hat + beta).
    bool compute_bound = false;
    double beta = 1.0;
    std::size_t width_samples = 200;
    RngSpec width_rng{0, 0};
    /// Overrides the record's model for lambda (records read from disk carry
    /// only the model kind).
    std::optional<LinkModel> model;
    /// Reuse a precomputed width instead of estimating it.
    std::optional<double> w_hat;
    AscentOptions ascent;
};

/// Support function of a constraint set (the optimal objective of its argmax).
SupportFunction support_function_for(const ConstraintSet& set);

/// Solves max <c, x> over `constraint` with the record's direction c and, when
/// `truth` is given, fills error_sq = ||x_hat - x||^2, the error against
/// x / ||x||_2, and for correlated sets ||Sigma^{1/2}(x_hat - x)||^2.
/// Throws ParameterError on dimension mismatch or a missing direction.
EstimateReport estimate(const MeasurementRecord& record, const ConstraintSet& constraint,
                        const std::optional<Signal>& truth = std::nullopt,
                        const EstimateOptions& options = {});

}  // namespace obcs

namespace obcs {

/// (8 / (lambda sqrt(m))) (w + beta): the fixed-signal squared-error bound,
/// holding with probability at least 1 - 4 exp(-2 beta^2).
double fixed_signal_error_bound(double lambda, Eigen::Index m, double w, double beta);

}  // namespace obcs
