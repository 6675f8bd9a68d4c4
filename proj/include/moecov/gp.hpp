#pragma once

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <array>
#include <cmath>
#include <optional>

#include "moecov/kernels.hpp"

namespace moecov {

inline constexpr double kLog2Pi = 1.8378770664093454836;

/// Jitter ladder: multiples of the mean covariance diagonal that are added
/// to the diagonal, smallest first, until the factorization succeeds.
inline constexpr std::array<double, 5> kJitterLadder = {0.0, 1e-10, 1e-8, 1e-6, 1e-4};

struct CholeskyFactor {
    Matrix L;            ///< lower-triangular factor, K + jitter·I = L Lᵀ
    double used_jitter;  ///< absolute diagonal shift that made it succeed
};

/// Cholesky factorization with escalating diagonal jitter. Returns nullopt
/// when the matrix is not positive definite even at the top of the ladder.
inline std::optional<CholeskyFactor> cholesky_with_jitter(const Matrix& K) {
    if (K.rows() != K.cols()) throw std::invalid_argument("cholesky_with_jitter: matrix not square");
    double scale = K.diagonal().mean();
    if (!std::isfinite(scale) || scale <= 0) scale = 1.0;
    Eigen::LLT<Matrix> llt;
    for (double mult : kJitterLadder) {
        Matrix M = K;
        M.diagonal().array() += mult * scale;
        llt.compute(M);
        if (llt.info() == Eigen::Success) {
            Matrix L = llt.matrixL();
            if (L.diagonal().allFinite()) return CholeskyFactor{std::move(L), mult * scale};
        }
    }
    return std::nullopt;
}

/// A GP regression model: prior mean zero, covariance k(·,·; theta), exact
/// targets (observation noise, if wanted, enters through the kernel itself,
/// e.g. an added white-noise term).
struct GPModel {
    AnyKernel kernel;
    HyperparamVector theta;
    Matrix X;  ///< training inputs, one sample per row
    Vector f;  ///< training targets
    double extra_diag = 0.0;  ///< fixed diagonal addition before the jitter ladder
};

namespace detail {

struct FittedGP {
    CholeskyFactor chol;
    Vector white;  ///< L⁻¹ f
    double lml;
};

inline std::optional<FittedGP> fit_gp(const GPModel& m, const PairGrid& train_grid) {
    if (m.X.rows() != m.f.size()) throw std::invalid_argument("fit_gp: X rows != f size");
    auto K = build_covariance(m.kernel, m.theta, train_grid);
    if (!K) return std::nullopt;
    if (m.extra_diag != 0.0) K->diagonal().array() += m.extra_diag;
    auto chol = cholesky_with_jitter(*K);
    if (!chol) return std::nullopt;
    const double n = static_cast<double>(m.f.size());
    Vector white = chol->L.triangularView<Eigen::Lower>().solve(m.f);
    double lml = -0.5 * white.squaredNorm() -
                 chol->L.diagonal().array().log().sum() -
                 0.5 * n * kLog2Pi;
    if (!std::isfinite(lml)) return std::nullopt;
    return FittedGP{std::move(*chol), std::move(white), lml};
}

}  // namespace detail

/// log p(f | X, theta) = -1/2 fᵀK⁻¹f - 1/2 log|K| - n/2 log 2π,
/// computed through the jittered Cholesky factor. Returns nullopt on a
/// covariance fault or a matrix that stays indefinite across the ladder.
inline std::optional<double> log_marginal_likelihood(const GPModel& m) {
    auto fit = detail::fit_gp(m, PairGrid::self(m.X));
    if (!fit) return std::nullopt;
    return fit->lml;
}

struct PredictiveDistribution {
    Vector mean;
    Vector variance;  ///< pointwise, clamped at zero
    std::optional<Matrix> full_cov;
};

/// Posterior predictive at new inputs:
///   mean  = K(X*,X) K⁻¹ f
///   cov   = K(X*,X*) - K(X*,X) K⁻¹ K(X,X*)
/// The training factorization reuses the jitter ladder; pointwise variances
/// are clamped at zero to absorb rounding. Set want_full_cov for the whole
/// posterior covariance matrix (symmetrized).
inline std::optional<PredictiveDistribution> posterior_predict(const GPModel& m,
                                                               const Matrix& Xstar,
                                                               bool want_full_cov = false) {
    if (Xstar.cols() != m.X.cols())
        throw std::invalid_argument("posterior_predict: input dimension mismatch");
    auto fit = detail::fit_gp(m, PairGrid::self(m.X));
    if (!fit) return std::nullopt;

    auto Kxs = build_covariance(m.kernel, m.theta, PairGrid::cross(m.X, Xstar));
    if (!Kxs) return std::nullopt;  // n × n*

    Matrix V = fit->chol.L.triangularView<Eigen::Lower>().solve(*Kxs);

    PredictiveDistribution out;
    out.mean = V.transpose() * fit->white;

    PairGrid star_grid = PairGrid::self(Xstar);
    if (want_full_cov) {
        auto Kss = build_covariance(m.kernel, m.theta, star_grid);
        if (!Kss) return std::nullopt;
        Matrix C = *Kss - V.transpose() * V;
        C = ((C + C.transpose()) / 2.0).eval();
        out.variance = C.diagonal().cwiseMax(0.0);
        out.full_cov = std::move(C);
    } else {
        out.variance.resize(Xstar.rows());
        for (Eigen::Index i = 0; i < Xstar.rows(); ++i) {
            auto prior = eval_kernel(m.kernel, m.theta, star_grid.at(i, i));
            if (!prior) return std::nullopt;
            out.variance(i) = std::max(0.0, *prior - V.col(i).squaredNorm());
        }
    }
    if (!out.mean.allFinite() || !out.variance.allFinite()) return std::nullopt;
    return out;
}

}  // namespace moecov
