#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>

#include "moecov/common.hpp"

namespace moecov {

struct PowellOptions {
    int max_evals = 150;     ///< hard ceiling on objective evaluations
    double ftol = 1e-4;      ///< stop when a whole sweep improves f by less (relative)
    double line_tol = 1e-6;  ///< relative x-tolerance of each line minimization
    double initial_step = 1.0;
    int max_sweeps = 60;
};

struct PowellResult {
    Eigen::VectorXd x;
    double fval = kInfinity;
    int evals = 0;
    bool converged = false;  ///< stopped by ftol rather than by budget/sweep cap
};

namespace detail {

/// Objective wrapper enforcing the evaluation budget and remembering the
/// best point seen, so a budget cut-off still returns something sensible.
class BudgetedFunction {
public:
    BudgetedFunction(std::function<double(const Eigen::VectorXd&)> f, int max_evals)
        : f_(std::move(f)), remaining_(max_evals) {}

    std::optional<double> operator()(const Eigen::VectorXd& x) {
        if (remaining_ <= 0) return std::nullopt;
        --remaining_;
        ++used_;
        double v = f_(x);
        if (std::isnan(v)) v = kInfinity;
        if (v < best_f_ || !has_best_) {
            best_f_ = v;
            best_x_ = x;
            has_best_ = true;
        }
        return v;
    }

    int used() const { return used_; }
    bool exhausted() const { return remaining_ <= 0; }
    double best_f() const { return best_f_; }
    const Eigen::VectorXd& best_x() const { return best_x_; }
    bool has_best() const { return has_best_; }

private:
    std::function<double(const Eigen::VectorXd&)> f_;
    int remaining_;
    int used_ = 0;
    bool has_best_ = false;
    double best_f_ = kInfinity;
    Eigen::VectorXd best_x_;
};

struct LineResult {
    double t = 0;  ///< step along the direction
    double f = kInfinity;
    bool budget_out = false;
};

/// Minimizes g(t) = F(base + t·dir). Brackets the minimum by golden-ratio
/// expansion with parabolic probes, then refines with Brent. `f0` is the
/// already-known value g(0); it is not re-evaluated.
inline LineResult line_minimize(BudgetedFunction& F, const Eigen::VectorXd& base,
                                const Eigen::VectorXd& dir, double f0, double step,
                                double rel_tol) {
    constexpr double kGold = 1.618034;
    constexpr double kGrowLimit = 100.0;
    constexpr double kTiny = 1e-21;

    LineResult best{0.0, f0, false};
    auto g = [&](double t) -> std::optional<double> {
        auto v = F(base + t * dir);
        if (v && *v < best.f) {
            best.f = *v;
            best.t = t;
        }
        return v;
    };
    auto out_of_budget = [&]() {
        best.budget_out = true;
        return best;
    };

    // --- bracketing (downhill expansion from t = 0)
    double ax = 0.0, fa = f0;
    double bx = step;
    auto fbv = g(bx);
    if (!fbv) return out_of_budget();
    double fb = *fbv;
    if (fb > fa) {
        std::swap(ax, bx);
        std::swap(fa, fb);
    }
    double cx = bx + kGold * (bx - ax);
    auto fcv = g(cx);
    if (!fcv) return out_of_budget();
    double fc = *fcv;

    while (fb > fc) {
        double r = (bx - ax) * (fb - fc);
        double q = (bx - cx) * (fb - fa);
        double denom = 2.0 * std::copysign(std::max(std::abs(q - r), kTiny), q - r);
        double u = bx - ((bx - cx) * q - (bx - ax) * r) / denom;
        double ulim = bx + kGrowLimit * (cx - bx);
        double fu;
        if ((bx - u) * (u - cx) > 0) {  // parabolic u between b and c
            auto fv = g(u);
            if (!fv) return out_of_budget();
            fu = *fv;
            if (fu < fc) {
                ax = bx; fa = fb; bx = u; fb = fu;
                break;
            }
            if (fu > fb) {
                cx = u; fc = fu;
                break;
            }
            u = cx + kGold * (cx - bx);
            fv = g(u);
            if (!fv) return out_of_budget();
            fu = *fv;
        } else if ((cx - u) * (u - ulim) > 0) {  // parabolic u beyond c, inside limit
            auto fv = g(u);
            if (!fv) return out_of_budget();
            fu = *fv;
            if (fu < fc) {
                bx = cx; cx = u; fb = fc; fc = fu;
                u = cx + kGold * (cx - bx);
                fv = g(u);
                if (!fv) return out_of_budget();
                fu = *fv;
            }
        } else if ((u - ulim) * (ulim - cx) >= 0) {  // cap at the limit
            u = ulim;
            auto fv = g(u);
            if (!fv) return out_of_budget();
            fu = *fv;
        } else {  // reject parabola, golden step
            u = cx + kGold * (cx - bx);
            auto fv = g(u);
            if (!fv) return out_of_budget();
            fu = *fv;
        }
        ax = bx; bx = cx; cx = u;
        fa = fb; fb = fc; fc = fu;
    }

    // --- refinement: successive parabolic interpolation, safeguarded by
    // golden-section steps. When the observed value at a parabolic vertex
    // agrees with the fit's prediction, the function is locally quadratic
    // along this line and the vertex is accepted outright — on an exactly
    // quadratic objective every line minimization costs a single
    // refinement evaluation, which is what lets a full direction-set cycle
    // fit into a tight evaluation budget.
    double lo = std::min(ax, cx), hi = std::max(ax, cx);
    double flo = (ax < cx) ? fa : fc, fhi = (ax < cx) ? fc : fa;
    double mid = bx, fmid = fb;
    constexpr double kCGold = 0.3819660;
    constexpr double kZeps = 1e-12;

    for (int iter = 0; iter < 40; ++iter) {
        double tol1 = rel_tol * std::abs(mid) + kZeps;
        if (hi - lo <= 4.0 * tol1) break;
        // bracket has gone flat: no measurable improvement left on this line
        if (std::max(flo, fhi) - fmid <= 1e-11 * std::abs(fmid)) break;

        // parabola through (lo, flo), (mid, fmid), (hi, fhi)
        double d1 = mid - lo, d2 = mid - hi;
        double r = d1 * (fmid - fhi);
        double q = d2 * (fmid - flo);
        double denom = 2.0 * (q - r);
        double u = 0;
        bool have_parabola = std::abs(denom) > kTiny;
        if (have_parabola) u = mid - (d2 * q - d1 * r) / denom;
        // vertex sitting on mid means the interpolation has converged
        if (have_parabola && u > lo && u < hi && std::abs(u - mid) < tol1) break;
        if (!have_parabola || !(u > lo + tol1) || !(u < hi - tol1)) {
            // golden step into the larger subinterval
            u = (hi - mid > mid - lo) ? mid + kCGold * (hi - mid) : mid - kCGold * (mid - lo);
            have_parabola = false;
        }
        double predicted = 0;
        if (have_parabola) {
            double l0 = (u - mid) * (u - hi) / ((lo - mid) * (lo - hi));
            double l1 = (u - lo) * (u - hi) / ((mid - lo) * (mid - hi));
            double l2 = (u - lo) * (u - mid) / ((hi - lo) * (hi - mid));
            predicted = flo * l0 + fmid * l1 + fhi * l2;
        }
        auto fuv = g(u);
        if (!fuv) return out_of_budget();
        double fu = *fuv;
        if (have_parabola && fu <= fmid &&
            std::abs(fu - predicted) <= 1e-8 * (std::abs(fu) + std::abs(fmid)) + 1e-14)
            break;
        if (u > mid) {
            if (fu < fmid) { lo = mid; flo = fmid; mid = u; fmid = fu; }
            else { hi = u; fhi = fu; }
        } else {
            if (fu < fmid) { hi = mid; fhi = fmid; mid = u; fmid = fu; }
            else { lo = u; flo = fu; }
        }
    }
    return best;
}

}  // namespace detail

/// Powell's conjugate-direction minimizer (no gradients). Each sweep
/// line-minimizes along every direction, then line-minimizes along the
/// sweep's net displacement and adopts it as a direction, retiring the
/// oldest. With (near-)exact line minimizations the direction set becomes
/// mutually conjugate, so a positive-definite quadratic is minimized
/// exactly after about p sweeps. A determinant guard resets the directions
/// to the coordinate axes if repeated adoption ever degenerates the set.
/// Stops on the ftol criterion, the sweep cap, or the evaluation budget —
/// the budget is a hard ceiling, and the best point evaluated is returned.
inline PowellResult powell_minimize(const std::function<double(const Eigen::VectorXd&)>& f,
                                    const Eigen::VectorXd& x0, const PowellOptions& opts) {
    if (opts.max_evals < 1) throw std::invalid_argument("powell_minimize: max_evals must be >= 1");
    const Eigen::Index p = x0.size();
    detail::BudgetedFunction F(f, opts.max_evals);

    auto finish = [&](bool converged) {
        PowellResult r;
        if (F.has_best()) {
            r.x = F.best_x();
            r.fval = F.best_f();
        } else {
            r.x = x0;
        }
        r.evals = F.used();
        r.converged = converged;
        return r;
    };

    auto fv0 = F(x0);
    if (!fv0) return finish(false);
    if (p == 0) return finish(true);

    Eigen::MatrixXd dirs = Eigen::MatrixXd::Identity(p, p);
    Eigen::VectorXd x = x0;
    double fx = *fv0;
    // per-direction bracketing step, warmed by the previous sweep's move
    Eigen::VectorXd steps = Eigen::VectorXd::Constant(p, opts.initial_step);

    for (int sweep = 0; sweep < opts.max_sweeps; ++sweep) {
        const Eigen::VectorXd x_start = x;
        const double f_start = fx;

        for (Eigen::Index i = 0; i < p; ++i) {
            auto lr = detail::line_minimize(F, x, dirs.col(i), fx, steps(i), opts.line_tol);
            x += lr.t * dirs.col(i);
            fx = lr.f;
            steps(i) = std::clamp(std::abs(lr.t), 1e-3 * opts.initial_step, opts.initial_step);
            if (lr.budget_out) return finish(false);
        }

        if (2.0 * (f_start - fx) <= opts.ftol * (std::abs(f_start) + std::abs(fx)) + 1e-25)
            return finish(true);

        Eigen::VectorXd displacement = x - x_start;
        double dn = displacement.norm();
        if (dn > 1e-14) {
            auto lr = detail::line_minimize(F, x, displacement, fx, 1.0, opts.line_tol);
            x += lr.t * displacement;
            fx = lr.f;
            if (lr.budget_out) return finish(false);
            for (Eigen::Index i = 0; i + 1 < p; ++i) {
                dirs.col(i) = dirs.col(i + 1);
                steps(i) = steps(i + 1);
            }
            dirs.col(p - 1) = displacement / dn;
            steps(p - 1) = opts.initial_step;
            // all columns are unit vectors, so |det| near zero means the
            // set has collapsed into a subspace
            if (p > 1 && std::abs(dirs.determinant()) < 1e-4) {
                dirs.setIdentity();
                steps.setConstant(opts.initial_step);
            }
        }
    }
    return finish(false);
}

}  // namespace moecov
