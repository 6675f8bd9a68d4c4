#pragma once

#include <cmath>
#include <optional>

#include "moecov/data.hpp"
#include "moecov/gp.hpp"
#include "moecov/hyperopt.hpp"

namespace moecov {

/// Pearson correlation between targets and predictions. Returns nullopt
/// when either side has zero variance — a constant prediction carries no
/// ranking information and is treated as a fault by fitness evaluation.
inline std::optional<double> pcc(const Vector& f, const Vector& mu) {
    if (f.size() != mu.size()) throw std::invalid_argument("pcc: size mismatch");
    if (f.size() < 2) throw std::invalid_argument("pcc: need at least two samples");
    double mf = f.mean(), mm = mu.mean();
    double sff = 0, smm = 0, sfm = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        double a = f(i) - mf, b = mu(i) - mm;
        sff += a * a;
        smm += b * b;
        sfm += a * b;
    }
    if (sff <= 0 || smm <= 0) return std::nullopt;
    double r = sfm / std::sqrt(sff * smm);
    return std::clamp(r, -1.0, 1.0);
}

/// Variances below this floor are clamped before entering the NLPD.
inline constexpr double kVarianceFloor = 1e-12;

/// Negative log predictive density per sample, under independent Gaussian
/// predictive marginals:
///   (1/n) Σ [ (f_i - mu_i)² / (2 σ_i²) + log(σ_i²)/2 + log(2π)/2 ].
/// Positive orientation: smaller is better.
inline double nlpd(const Vector& f, const Vector& mu, const Vector& variance) {
    if (f.size() != mu.size() || f.size() != variance.size())
        throw std::invalid_argument("nlpd: size mismatch");
    if (f.size() == 0) throw std::invalid_argument("nlpd: empty input");
    double acc = 0;
    for (Eigen::Index i = 0; i < f.size(); ++i) {
        double v = std::max(variance(i), kVarianceFloor);
        double d = f(i) - mu(i);
        acc += d * d / (2.0 * v) + 0.5 * std::log(v) + 0.5 * kLog2Pi;
    }
    return acc / static_cast<double>(f.size());
}

/// Bayesian information criterion, smaller is better: -2·LML + p·log(n).
inline double bic(double lml, int num_hyperparams, double n) {
    if (!(n > 0)) throw std::invalid_argument("bic: n must be positive");
    return -2.0 * lml + static_cast<double>(num_hyperparams) * std::log(n);
}

// ---------------------------------------------------------------------------
// fitness

/// Minimized objective triple: negated mean test PCC, mean test NLPD, and
/// summed metric-evaluation wall time. A faulting kernel carries +inf in
/// every component and is dominated by any working one.
struct FitnessVector {
    double neg_pcc = kInfinity;
    double nlpd = kInfinity;
    double eval_seconds = kInfinity;

    bool faulted() const {
        return !(std::isfinite(neg_pcc) && std::isfinite(nlpd) && std::isfinite(eval_seconds));
    }

    std::array<double, 3> objectives() const { return {neg_pcc, nlpd, eval_seconds}; }

    friend bool operator==(const FitnessVector&, const FitnessVector&) = default;
};

/// One train/test evaluation of a kernel: fit hyperparameters on the
/// training part (unless frozen ones are supplied), predict the held-out
/// part, and measure both metrics. The clock brackets the prediction and
/// metric computation — the part whose cost scales with kernel complexity.
struct SplitEval {
    double pcc_value = 0;
    double nlpd_value = 0;
    double train_lml = -kInfinity;
    double metric_seconds = 0;
    HyperparamVector theta;
    int optimizer_evals = 0;  ///< LML evaluations spent; 0 when theta was frozen
};

inline std::optional<SplitEval> evaluate_split(
    const AnyKernel& kernel, const Matrix& X_train, const Vector& y_train, const Matrix& X_test,
    const Vector& y_test, const OptBudget& budget, RandomSource& rng, const Clock& clock,
    const std::optional<HyperparamVector>& frozen_theta = std::nullopt) {
    SplitEval out;
    if (frozen_theta) {
        out.theta = *frozen_theta;
        out.optimizer_evals = 0;
    } else {
        auto opt = optimize_hyperparams(kernel, X_train, y_train, budget, rng);
        if (!opt) return std::nullopt;
        out.theta = std::move(opt->theta);
        out.optimizer_evals = opt->evals_used;
    }

    GPModel model{kernel, out.theta, X_train, y_train};
    auto train_lml = log_marginal_likelihood(model);
    if (!train_lml) return std::nullopt;
    out.train_lml = *train_lml;

    const double t0 = clock();
    auto pred = posterior_predict(model, X_test);
    if (!pred) return std::nullopt;
    auto r = pcc(y_test, pred->mean);
    if (!r) return std::nullopt;
    out.pcc_value = *r;
    out.nlpd_value = nlpd(y_test, pred->mean, pred->variance);
    const double t1 = clock();
    out.metric_seconds = t1 - t0;
    if (!std::isfinite(out.nlpd_value)) return std::nullopt;
    return out;
}

struct FitnessOptions {
    int k_folds = 3;
    OptBudget budget;
    std::uint64_t fold_seed = 0;
};

/// A kernel with everything selection needs to know about it.
struct EvaluatedIndividual {
    KernelExpr expr;
    HyperparamVector theta;   ///< fit on the last fold's training part
    FitnessVector fitness;
    double mean_lml = -kInfinity;  ///< mean training LML across folds
    double bic_value = kInfinity;
    int generation = 0;
};

/// k-fold cross-validated fitness of an expression kernel: hyperparameters
/// are optimized per fold, test PCC/NLPD are averaged, and the metric
/// timings are summed. Any fault in any fold (covariance fault, indefinite
/// matrix, degenerate correlation, optimization failure) marks the whole
/// individual as faulted.
inline EvaluatedIndividual evaluate_fitness(const KernelExpr& expr, const Dataset& data,
                                            const FitnessOptions& opts, RandomSource& rng,
                                            const Clock& clock) {
    EvaluatedIndividual ind;
    ind.expr = expr;

    FoldAssignment folds;
    try {
        folds = make_folds(static_cast<int>(data.n()), opts.k_folds, opts.fold_seed);
    } catch (const std::invalid_argument&) {
        return ind;  // dataset too small to fold: faulted fitness
    }

    double sum_pcc = 0, sum_nlpd = 0, sum_time = 0, sum_lml = 0;
    double sum_train_n = 0;
    for (int fold = 0; fold < opts.k_folds; ++fold) {
        TrainTestSplit s = split_fold(data.X, data.y, folds, fold);
        auto cell = evaluate_split(AnyKernel(expr), s.X_train, s.y_train, s.X_test, s.y_test,
                                   opts.budget, rng, clock);
        if (!cell) return ind;
        sum_pcc += cell->pcc_value;
        sum_nlpd += cell->nlpd_value;
        sum_time += cell->metric_seconds;
        sum_lml += cell->train_lml;
        sum_train_n += static_cast<double>(s.X_train.rows());
        ind.theta = std::move(cell->theta);
    }
    const double k = static_cast<double>(opts.k_folds);
    ind.fitness.neg_pcc = -(sum_pcc / k);
    ind.fitness.nlpd = sum_nlpd / k;
    ind.fitness.eval_seconds = sum_time;
    ind.mean_lml = sum_lml / k;
    ind.bic_value = bic(ind.mean_lml, static_cast<int>(num_slots(expr)), sum_train_n / k);
    return ind;
}

}  // namespace moecov
