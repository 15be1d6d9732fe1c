#pragma once

#include <cstddef>
#include <string_view>

#include <Eigen/Dense>

#include "obcs/rng.hpp"

namespace obcs {

enum class SignalKind { exact_sparse, compressible, low_rank };

std::string_view to_string(SignalKind kind);
SignalKind signal_kind_from_string(std::string_view name);

/// Ground-truth signal on the unit sphere.
///
/// `s` is the sparsity budget (rank budget for low_rank). Low-rank signals
/// store an rows x cols matrix column-major in `values`.
struct Signal {
    Eigen::VectorXd values;
    double s = 1.0;
    SignalKind kind = SignalKind::exact_sparse;
    Eigen::Index rows = 0;
    Eigen::Index cols = 0;

    Eigen::Index n() const { return values.size(); }
    Eigen::Map<const Eigen::MatrixXd> as_matrix() const {
        return {values.data(), rows, cols};
    }
};

/// Magnitude decay exponent used for compressible signals (|x_(i)| ∝ i^-exponent).
inline constexpr double kCompressibleExponent = 1.0;

/// Draws a unit-norm signal in B_2^n ∩ sqrt(s) B_1^n.
///
/// exact_sparse: uniform random support of floor(s) entries with iid Gaussian
/// values, normalized. compressible: power-law magnitudes on a random
/// permutation with random signs, normalized;
/// the tail is damped just enough to meet the budget, and draws violating it
/// after normalization are rejected.
/// Throws ParameterError unless 1 <= s <= n.
Signal sample_signal(const RngSpec& rng, Eigen::Index n, double s, SignalKind kind);

/// Draws a rows x cols matrix of rank floor(r) with unit Frobenius norm:
/// random orthonormal factors (QR of Gaussian matrices) and Gaussian
/// singular-value magnitudes. Throws ParameterError unless 1 <= r <= min(rows, cols).
Signal sample_lowrank_signal(const RngSpec& rng, Eigen::Index rows, Eigen::Index cols, double r);

}  // namespace obcs
