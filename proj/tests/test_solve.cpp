#include <gtest/gtest.h>

#include <random>

#include "obcs/errors.hpp"
#include "obcs/geometry.hpp"
#include "obcs/solve.hpp"
#include "oracles.hpp"

using namespace obcs;

namespace {

Eigen::VectorXd random_vector(std::mt19937_64& gen, int n) {
    std::normal_distribution<double> normal;
    Eigen::VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = normal(gen);
    return v;
}

}  // namespace

TEST(SparseArgmax, MatchesDualOracle) {
    std::mt19937_64 gen(1);
    for (int t = 0; t < 200; ++t) {
        const int n = 2 + t % 60;
        const double s = 1.0 + (n - 1) * std::uniform_real_distribution<double>()(gen);
        const Eigen::VectorXd c = random_vector(gen, n);
        const auto r = sparse_argmax(c, s);
        const double ref = oracle::intersection_support_dual(c, std::sqrt(s), Eigen::VectorXd::Ones(n));
        EXPECT_NEAR(r.objective, ref, 1e-7 * ref) << "n=" << n << " s=" << s;
        EXPECT_NEAR(r.objective, c.dot(r.x_hat), 1e-12);
        EXPECT_LE(r.x_hat.norm(), 1.0 + 1e-12);
        EXPECT_LE(r.x_hat.lpNorm<1>(), std::sqrt(s) * (1 + 1e-12));
    }
}

TEST(SparseArgmax, UnconstrainedWhenFlat) {
    const Eigen::Vector4d c(1, -1, 1, 1);
    const auto r = sparse_argmax(c, 4.0);
    EXPECT_LT((r.x_hat - c / 2.0).norm(), 1e-15);
    EXPECT_EQ(r.solver_tag, "sparse-closed-form");
}

TEST(SparseArgmax, TiesFallBackToAscent) {
    const Eigen::Vector4d c(1, 1, 1, 0.2);
    const auto r = sparse_argmax(c, 2.0);
    const double ref = oracle::intersection_support_dual(c, std::sqrt(2.0), Eigen::VectorXd::Ones(4));
    EXPECT_NEAR(r.objective, ref, 1e-6);
    EXPECT_LE(r.x_hat.lpNorm<1>(), std::sqrt(2.0) + 1e-8);
}

TEST(SparseArgmax, ScaleAndPermutationEquivariance) {
    std::mt19937_64 gen(2);
    for (int t = 0; t < 50; ++t) {
        const Eigen::VectorXd c = random_vector(gen, 30);
        const auto base = sparse_argmax(c, 4.0);
        EXPECT_EQ(sparse_argmax(8.0 * c, 4.0).x_hat, base.x_hat);
        EXPECT_LT((sparse_argmax(3.7 * c, 4.0).x_hat - base.x_hat).norm(), 1e-12);
        EXPECT_EQ(sparse_argmax(-c, 4.0).x_hat, -base.x_hat);
        Eigen::PermutationMatrix<Eigen::Dynamic> perm(30);
        perm.setIdentity();
        std::shuffle(perm.indices().data(), perm.indices().data() + 30, gen);
        const Eigen::VectorXd pc = perm * c;
        EXPECT_LT((sparse_argmax(pc, 4.0).x_hat - perm * base.x_hat).norm(), 1e-12);
    }
}

TEST(SparseArgmax, RejectsZero) {
    EXPECT_THROW(sparse_argmax(Eigen::VectorXd::Zero(5), 2.0), DegenerateInputError);
    EXPECT_THROW(sparse_argmax(Eigen::VectorXd::Ones(5), 0.5), ParameterError);
}

TEST(GenericArgmax, AgreesWithClosedForm) {
    std::mt19937_64 gen(3);
    for (int t = 0; t < 30; ++t) {
        const int n = 5 + t;
        const double s = 1.0 + t % 5;
        const Eigen::VectorXd c = random_vector(gen, n);
        const auto g = generic_argmax(c, sparse_ball_projection(std::sqrt(s)));
        const auto e = sparse_argmax(c, s);
        EXPECT_NEAR(g.objective, e.objective, 1e-6 * e.objective);
        EXPECT_EQ(g.solver_tag, "projected-ascent");
    }
}

TEST(GenericArgmax, BoundaryGridOracleInLowDimension) {
    std::mt19937_64 gen(4);
    for (int t = 0; t < 12; ++t) {
        const int n = 2 + t % 2;
        const double s = 1.0 + 0.4 * (t % 4);
        const Eigen::VectorXd c = random_vector(gen, n);
        auto gauge = [s](const Eigen::VectorXd& u) { return std::max(u.norm(), u.lpNorm<1>() / std::sqrt(s)); };
        const double ref = oracle::boundary_grid_max(c, gauge);
        EXPECT_NEAR(sparse_argmax(c, s).objective, ref, 1e-4);
    }
}

TEST(GenericArgmax, ThrowsWithoutConvergence) {
    AscentOptions opt;
    opt.max_iter = 3;
    opt.patience = 50;
    EXPECT_THROW(generic_argmax(Eigen::Vector3d(1, 2, 3), sparse_ball_projection(1.2), opt), NumericalError);
}

TEST(CorrelatedArgmax, MatchesDualOracle) {
    std::mt19937_64 gen(5);
    for (int t = 0; t < 10; ++t) {
        const int n = 20;
        Eigen::VectorXd d = Eigen::VectorXd::Ones(n);
        d.head(n / 2).setConstant(4.0);
        const auto cov = CovarianceSpec::diagonal(d);
        const Eigen::VectorXd c = random_vector(gen, n);
        const double s = 3.0;
        const auto r = correlated_argmax(c, cov, s);
        const double radius = std::sqrt(s / cov.lambda_min());
        const double ref = oracle::intersection_support_dual(c, radius, d);
        EXPECT_NEAR(r.objective, ref, 1e-5 * ref);
        EXPECT_LE(constraint_violation(CorrelatedSparse{cov, s}, r.x_hat), 1e-8);
    }
}

TEST(LowRank, SpectralMatchesAscent) {
    std::mt19937_64 gen(6);
    for (int t = 0; t < 5; ++t) {
        const Eigen::VectorXd cv = random_vector(gen, 30);
        const Eigen::MatrixXd c = Eigen::Map<const Eigen::MatrixXd>(cv.data(), 6, 5);
        const auto spectral = lowrank_argmax(c, 2.0);
        const auto ascent = generic_argmax(cv, nuclear_frobenius_projection(2.0, 6, 5));
        EXPECT_NEAR(spectral.objective, ascent.objective, 1e-6);
        EXPECT_LE(constraint_violation(NuclearFrobenius{2.0, 6, 5}, spectral.x_hat), 1e-10);
    }
    EXPECT_THROW(lowrank_argmax(Eigen::MatrixXd::Ones(3, 3), 1.0, 2), ParameterError);
}

TEST(LowRank, NuclearProjection) {
    const Eigen::MatrixXd x = Eigen::Vector3d(3, 1, 0.5).asDiagonal();
    const Eigen::MatrixXd p = project_nuclear_ball(x, 2.0);
    EXPECT_LT((p - Eigen::MatrixXd(Eigen::Vector3d(2, 0, 0).asDiagonal())).norm(), 1e-12);
    EXPECT_EQ(project_nuclear_ball(x, 10.0), x);
}

TEST(Estimate, FillsErrorAndBound) {
    const Signal x = sample_signal({1, 1}, 40, 3, SignalKind::exact_sparse);
    const auto rec = synthesize(x, Noiseless{}, 2000, {1, 2});
    EstimateOptions opt;
    opt.compute_bound = true;
    const auto r = estimate(rec, SparseBall{3}, x, opt);
    ASSERT_TRUE(r.error_sq && r.bound_value && r.w_hat && r.lambda_used);
    EXPECT_NEAR(*r.error_sq, (r.x_hat - x.values).squaredNorm(), 1e-15);
    EXPECT_LT(*r.error_sq, 0.2);
    EXPECT_NEAR(*r.bound_value, fixed_signal_error_bound(*r.lambda_used, 2000, *r.w_hat, 1.0), 1e-15);
    EXPECT_THROW(estimate(rec, SparseBall{3}, sample_signal({1, 1}, 41, 3, SignalKind::exact_sparse)), ParameterError);
}

TEST(Estimate, BoundFrozen) {
    EXPECT_NEAR(fixed_signal_error_bound(std::sqrt(2 / M_PI), 64, 0.5, 0.5), 1.2533141373155, 1e-12);
}

TEST(Estimate, OracleSetDispatch) {
    const Signal x = sample_signal({2, 1}, 10, 2, SignalKind::exact_sparse);
    const auto rec = synthesize(x, Noiseless{}, 500, {2, 2});
    const auto a = estimate(rec, OracleSet{sparse_ball_projection(std::sqrt(2.0)), "mine"});
    const auto b = estimate(rec, SparseBall{2});
    EXPECT_NEAR(a.objective, b.objective, 1e-6 * b.objective);
    EXPECT_EQ(constraint_tag(OracleSet{nullptr, "mine"}), "mine");
}
