#include "obcs/sampling.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>
#include <vector>

#include "obcs/errors.hpp"

namespace obcs {

std::string_view to_string(SignalKind kind) {
    switch (kind) {
        case SignalKind::exact_sparse: return "exact";
        case SignalKind::compressible: return "compressible";
        case SignalKind::low_rank: return "lowrank";
    }
    return "unknown";
}

SignalKind signal_kind_from_string(std::string_view name) {
    if (name == "exact" || name == "exact-sparse" || name == "exact_sparse")
        return SignalKind::exact_sparse;
    if (name == "compressible") return SignalKind::compressible;
    if (name == "lowrank" || name == "low-rank" || name == "low_rank") return SignalKind::low_rank;
    throw ParameterError("unknown signal kind '" + std::string(name) + "'");
}

namespace {

// Fisher-Yates permutation of [0, n).
std::vector<Eigen::Index> random_permutation(NormalSampler& rng, Eigen::Index n) {
    std::vector<Eigen::Index> perm(static_cast<std::size_t>(n));
    std::iota(perm.begin(), perm.end(), Eigen::Index{0});
    for (Eigen::Index i = n - 1; i > 0; --i) {
        const auto j = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(i + 1)));
        std::swap(perm[static_cast<std::size_t>(i)], perm[static_cast<std::size_t>(j)]);
    }
    return perm;
}

Eigen::VectorXd draw_exact_sparse(NormalSampler& rng, Eigen::Index n, double s) {
    const auto k = static_cast<Eigen::Index>(std::floor(s));
    const auto perm = random_permutation(rng, n);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (;;) {
        for (Eigen::Index i = 0; i < k; ++i) x(perm[static_cast<std::size_t>(i)]) = rng.normal();
        const double norm = x.norm();
        if (norm > 0.0) return x / norm;
    }
}

// Power-law magnitudes u_i / i (u_i ~ U(0.5, 1]) on a random permutation with
// random signs. The head of floor(s) entries keeps its magnitudes and the tail
// is scaled by the largest factor in (0, 1] that keeps ||x||_1 <= sqrt(s)||x||_2,
// so the draw has full support and lies in the l1 budget after normalization.
Eigen::VectorXd draw_compressible(NormalSampler& rng, Eigen::Index n, double s) {
    const double budget = std::sqrt(s);
    const auto head = static_cast<Eigen::Index>(std::floor(s));
    for (;;) {
        Eigen::VectorXd magnitude(n);
        for (Eigen::Index i = 0; i < n; ++i)
            magnitude(i) = (1.0 - 0.5 * rng.uniform()) *
                           std::pow(static_cast<double>(i + 1), -kCompressibleExponent);
        const double head_l1 = magnitude.head(head).sum();
        const double head_l2sq = magnitude.head(head).squaredNorm();
        const double tail_l1 = magnitude.tail(n - head).sum();
        const double tail_l2sq = magnitude.tail(n - head).squaredNorm();
        auto fits = [&](double scale, double slack) {
            return head_l1 + scale * tail_l1 <=
                   slack * budget * std::sqrt(head_l2sq + scale * scale * tail_l2sq);
        };
        if (!fits(0.0, 1.0)) continue;
        double scale = 1.0;
        if (!fits(scale, 1.0 - 1e-12)) {
            double lo = 0.0, hi = 1.0;
            for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
                const double mid = 0.5 * (lo + hi);
                (fits(mid, 1.0 - 1e-12) ? lo : hi) = mid;
            }
            scale = lo;
        }
        magnitude.tail(n - head) *= scale;

        const auto perm = random_permutation(rng, n);
        Eigen::VectorXd x(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            const double sign = rng.uniform() < 0.5 ? -1.0 : 1.0;
            x(perm[static_cast<std::size_t>(i)]) = sign * magnitude(i);
        }
        x /= x.norm();
        if (x.lpNorm<1>() <= budget) return x;
    }
}

}  // namespace

Signal sample_signal(const RngSpec& rng, Eigen::Index n, double s, SignalKind kind) {
    if (!(s >= 1.0) || static_cast<double>(n) < s)
        throw ParameterError("sample_signal requires 1 <= s <= n (s=" + std::to_string(s) +
                             ", n=" + std::to_string(n) + ")");
    if (kind == SignalKind::low_rank)
        throw ParameterError("sample_signal: use sample_lowrank_signal for low-rank signals");
    NormalSampler sampler(rng);
    Signal out;
    out.s = s;
    out.kind = kind;
    out.rows = n;
    out.cols = 1;
    out.values = kind == SignalKind::exact_sparse ? draw_exact_sparse(sampler, n, s)
                                                  : draw_compressible(sampler, n, s);
    return out;
}

Signal sample_lowrank_signal(const RngSpec& rng, Eigen::Index rows, Eigen::Index cols, double r) {
    if (!(r >= 1.0) || static_cast<double>(std::min(rows, cols)) < r)
        throw ParameterError("sample_lowrank_signal requires 1 <= r <= min(rows, cols)");
    const auto k = static_cast<Eigen::Index>(std::floor(r));
    NormalSampler sampler(rng);
    auto gaussian = [&](Eigen::Index a, Eigen::Index b) {
        Eigen::MatrixXd g(a, b);
        sampler.fill_normal(g.data(), static_cast<std::size_t>(g.size()));
        return g;
    };
    const Eigen::MatrixXd left = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(rows, k))
                                     .householderQ() *
                                 Eigen::MatrixXd::Identity(rows, k);
    const Eigen::MatrixXd right = Eigen::HouseholderQR<Eigen::MatrixXd>(gaussian(cols, k))
                                      .householderQ() *
                                  Eigen::MatrixXd::Identity(cols, k);
    Eigen::VectorXd spectrum = gaussian(k, 1).col(0).cwiseAbs();
    spectrum /= spectrum.norm();
    const Eigen::MatrixXd x = left * spectrum.asDiagonal() * right.transpose();

    Signal out;
    out.s = r;
    out.kind = SignalKind::low_rank;
    out.rows = rows;
    out.cols = cols;
    out.values = Eigen::Map<const Eigen::VectorXd>(x.data(), x.size());
    out.values /= out.values.norm();
    return out;
}

}  // namespace obcs
