#pragma once

#include <cmath>
#include <optional>
#include <utility>
#include <vector>

#include "moecov/gp.hpp"
#include "moecov/powell.hpp"

namespace moecov {

/// Objective value reported for out-of-bounds or faulting hyperparameters.
/// Large enough to dominate any real negated LML, small enough to leave
/// headroom for the distance-to-box slope on top.
inline constexpr double kPenaltyValue = 1e10;

struct OptBudget {
    int max_lml_evals = 150;  ///< hard ceiling on objective evaluations, shared by all restarts
    double ftol = 1e-4;       ///< per-sweep relative tolerance handed to Powell
};

struct OptResult {
    HyperparamVector theta;  ///< best in-bounds hyperparameters found
    double best_lml = -kInfinity;
    int evals_used = 0;
    int restarts = 0;  ///< number of Powell starts consumed
};

/// Negated LML as a function of log-hyperparameters, with box constraints
/// enforced by penalty: outside the box the value is kPenaltyValue plus the
/// log-space distance to the box (a slope pointing back in), and any
/// evaluation fault (covariance fault, factorization failure) also maps to
/// kPenaltyValue. Minimizing this is maximizing the LML inside the box.
class PenalizedLml {
public:
    PenalizedLml(AnyKernel kernel, const Matrix& X, const Vector& f)
        : kernel_(std::move(kernel)),
          grid_(PairGrid::self(X)),
          f_(f),
          slots_(kernel_slots(kernel_)) {
        if (X.rows() != f.size()) throw std::invalid_argument("PenalizedLml: X rows != f size");
    }

    const std::vector<SlotDescriptor>& slots() const { return slots_; }

    double operator()(const Eigen::VectorXd& theta_log) const {
        if (static_cast<std::size_t>(theta_log.size()) != slots_.size())
            throw std::invalid_argument("PenalizedLml: wrong number of hyperparameters");
        double dist2 = 0;
        for (std::size_t i = 0; i < slots_.size(); ++i) {
            double z = theta_log(static_cast<Eigen::Index>(i));
            double lo = std::log(slots_[i].lo), hi = std::log(slots_[i].hi);
            if (z < lo) dist2 += (lo - z) * (lo - z);
            if (z > hi) dist2 += (z - hi) * (z - hi);
        }
        if (dist2 > 0) return kPenaltyValue + std::sqrt(dist2);

        HyperparamVector theta(slots_.size());
        for (std::size_t i = 0; i < slots_.size(); ++i)
            theta[i] = std::exp(theta_log(static_cast<Eigen::Index>(i)));
        auto K = build_covariance(kernel_, theta, grid_);
        if (!K) return kPenaltyValue;
        auto chol = cholesky_with_jitter(*K);
        if (!chol) return kPenaltyValue;
        Vector white = chol->L.triangularView<Eigen::Lower>().solve(f_);
        double lml = -0.5 * white.squaredNorm() - chol->L.diagonal().array().log().sum() -
                     0.5 * static_cast<double>(f_.size()) * kLog2Pi;
        if (!std::isfinite(lml)) return kPenaltyValue;
        return -lml;
    }

private:
    AnyKernel kernel_;
    PairGrid grid_;
    Vector f_;
    std::vector<SlotDescriptor> slots_;
};

/// Convenience free-function form of the penalized objective.
inline double penalized_objective(const AnyKernel& kernel, const Matrix& X, const Vector& f,
                                  const Eigen::VectorXd& theta_log) {
    return PenalizedLml(kernel, X, f)(theta_log);
}

/// Maximizes the training LML over the kernel's hyperparameters with
/// multi-start Powell in log-space. All starts share one evaluation budget
/// (each objective call counts against it); the first start is the center
/// of the log-box, later starts are drawn log-uniformly. For a kernel with
/// no hyperparameters the single LML evaluation is counted as one.
/// Returns nullopt when not a single start produced a usable LML.
inline std::optional<OptResult> optimize_hyperparams(const AnyKernel& kernel, const Matrix& X,
                                                     const Vector& f, const OptBudget& budget,
                                                     RandomSource& rng) {
    if (budget.max_lml_evals < 1)
        throw std::invalid_argument("optimize_hyperparams: max_lml_evals must be >= 1");

    const std::vector<SlotDescriptor> slots = kernel_slots(kernel);
    const auto p = static_cast<Eigen::Index>(slots.size());

    if (p == 0) {
        auto lml = log_marginal_likelihood(GPModel{kernel, {}, X, f});
        if (!lml) return std::nullopt;
        return OptResult{{}, *lml, 1, 0};
    }

    PenalizedLml objective(kernel, X, f);

    double best_f = kInfinity;
    Eigen::VectorXd best_z;
    auto recorded = [&](const Eigen::VectorXd& z) {
        double v = objective(z);
        if (v < best_f) {
            best_f = v;
            best_z = z;
        }
        return v;
    };

    int remaining = budget.max_lml_evals;
    int used = 0;
    int restarts = 0;
    while (remaining > 0) {
        Eigen::VectorXd z0(p);
        for (Eigen::Index i = 0; i < p; ++i) {
            double lo = std::log(slots[static_cast<std::size_t>(i)].lo);
            double hi = std::log(slots[static_cast<std::size_t>(i)].hi);
            z0(i) = (restarts == 0) ? 0.5 * (lo + hi)
                                    : std::uniform_real_distribution<double>(lo, hi)(rng);
        }
        PowellOptions popts;
        popts.max_evals = remaining;
        popts.ftol = budget.ftol;
        PowellResult pr = powell_minimize(recorded, z0, popts);
        remaining -= pr.evals;
        used += pr.evals;
        ++restarts;
    }

    if (!(best_f < kPenaltyValue)) return std::nullopt;
    OptResult out;
    out.theta.resize(slots.size());
    for (std::size_t i = 0; i < slots.size(); ++i)
        out.theta[i] = std::exp(best_z(static_cast<Eigen::Index>(i)));
    out.best_lml = -best_f;
    out.evals_used = used;
    out.restarts = restarts;
    return out;
}

}  // namespace moecov
