#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

#include "moecov/expr.hpp"

namespace moecov {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using HyperparamVector = std::vector<double>;

inline constexpr double kPi = 3.14159265358979323846;

/// ||x - x'|| / theta_l
inline double scaled_distance(const Vector& x, const Vector& xp, double theta_l) {
    if (x.size() != xp.size()) throw std::invalid_argument("scaled_distance: dimension mismatch");
    if (!(theta_l > 0)) throw std::invalid_argument("scaled_distance: lengthscale must be > 0");
    return (x - xp).norm() / theta_l;
}

/// (x - theta_s·1)·(x' - theta_s·1) / theta_l
inline double shifted_dot(const Vector& x, const Vector& xp, double theta_l, double theta_s) {
    if (x.size() != xp.size()) throw std::invalid_argument("shifted_dot: dimension mismatch");
    if (!(theta_l > 0)) throw std::invalid_argument("shifted_dot: lengthscale must be > 0");
    return ((x.array() - theta_s) * (xp.array() - theta_s)).sum() / theta_l;
}

// ---------------------------------------------------------------------------
// baseline kernels

enum class BaselineKind : std::uint8_t { SE, M32, M52, RQ, E, EG, PER, LIN, CON, WN };

inline constexpr std::array<BaselineKind, 10> kAllBaselines = {
    BaselineKind::SE,  BaselineKind::M32, BaselineKind::M52, BaselineKind::RQ,
    BaselineKind::E,   BaselineKind::EG,  BaselineKind::PER, BaselineKind::LIN,
    BaselineKind::CON, BaselineKind::WN};

constexpr std::string_view baseline_name(BaselineKind k) {
    switch (k) {
        case BaselineKind::SE: return "SE";
        case BaselineKind::M32: return "M32";
        case BaselineKind::M52: return "M52";
        case BaselineKind::RQ: return "RQ";
        case BaselineKind::E: return "E";
        case BaselineKind::EG: return "EG";
        case BaselineKind::PER: return "PER";
        case BaselineKind::LIN: return "LIN";
        case BaselineKind::CON: return "CON";
        case BaselineKind::WN: return "WN";
    }
    return "?";
}

inline std::optional<BaselineKind> baseline_from_name(std::string_view name) {
    for (BaselineKind k : kAllBaselines)
        if (baseline_name(k) == name) return k;
    return std::nullopt;
}

/// Hyperparameter layout of each baseline kernel, in theta-vector order.
/// Stationary kernels carry (amplitude, lengthscale, [extra]); LIN carries
/// (lengthscale, shift); CON and WN carry a single constant.
inline std::vector<SlotDescriptor> baseline_slots(BaselineKind kind) {
    auto slot = [](SlotRole role, double lo = kDefaultSlotLo, double hi = kDefaultSlotHi) {
        SlotDescriptor d;
        d.role = role;
        d.lo = lo;
        d.hi = hi;
        return d;
    };
    switch (kind) {
        case BaselineKind::SE:
        case BaselineKind::M32:
        case BaselineKind::M52:
        case BaselineKind::E:
            return {slot(SlotRole::Amplitude), slot(SlotRole::Lengthscale)};
        case BaselineKind::RQ:
            return {slot(SlotRole::Amplitude), slot(SlotRole::Lengthscale), slot(SlotRole::Alpha)};
        case BaselineKind::EG:
            // exponent restricted to (0, 2]; outside that range the kernel
            // is not positive semidefinite
            return {slot(SlotRole::Amplitude), slot(SlotRole::Lengthscale),
                    slot(SlotRole::Gamma, kDefaultSlotLo, 2.0)};
        case BaselineKind::PER:
            return {slot(SlotRole::Amplitude), slot(SlotRole::Lengthscale), slot(SlotRole::Period)};
        case BaselineKind::LIN:
            return {slot(SlotRole::Lengthscale), slot(SlotRole::Shift)};
        case BaselineKind::CON:
            return {slot(SlotRole::Constant)};
        case BaselineKind::WN:
            return {slot(SlotRole::Noise)};
    }
    return {};
}

/// Scalar summary of one input pair. Everything a kernel can ask about
/// (x, x') is reduced to these quantities, which is what allows covariance
/// builds to reuse a precomputed grid across hyperparameter settings.
struct PairInputs {
    double dist = 0;    ///< ||x - x'||
    double dot = 0;     ///< x · x'
    double sum_x = 0;   ///< sum of the components of x
    double sum_xp = 0;  ///< sum of the components of x'
    double dim = 0;
    bool same_index = false;  ///< x and x' are the same sample (white-noise delta)
};

inline PairInputs make_pair_inputs(const Vector& x, const Vector& xp) {
    if (x.size() != xp.size()) throw std::invalid_argument("make_pair_inputs: dimension mismatch");
    PairInputs c;
    c.dist = (x - xp).norm();
    c.dot = x.dot(xp);
    c.sum_x = x.sum();
    c.sum_xp = xp.sum();
    c.dim = static_cast<double>(x.size());
    c.same_index = (c.dist == 0.0);
    return c;
}

namespace detail {

inline double shifted_dot_from_pair(const PairInputs& c, double theta_l, double theta_s) {
    // (x - s·1)·(x' - s·1) = x·x' - s (sum_x + sum_xp) + s^2 d
    return (c.dot - theta_s * (c.sum_x + c.sum_xp) + theta_s * theta_s * c.dim) / theta_l;
}

inline void check_positive(std::span<const double> theta) {
    for (double t : theta)
        if (!(t > 0) || !std::isfinite(t))
            throw std::invalid_argument("hyperparameters must be positive and finite");
}

}  // namespace detail

/// Evaluates a baseline kernel at one input pair. theta layout follows
/// baseline_slots(). Throws on a malformed theta; numerical faults
/// (non-finite values) are reported by eval_kernel instead.
inline double eval_baseline(BaselineKind kind, std::span<const double> theta, const PairInputs& c) {
    const std::size_t want = baseline_slots(kind).size();
    if (theta.size() != want)
        throw std::invalid_argument(std::string("eval_baseline: ") + std::string(baseline_name(kind)) +
                                    " expects " + std::to_string(want) + " hyperparameters");
    detail::check_positive(theta);
    switch (kind) {
        case BaselineKind::SE: {
            double r = c.dist / theta[1];
            return theta[0] * theta[0] * std::exp(-0.5 * r * r);
        }
        case BaselineKind::M32: {
            double r = c.dist / theta[1];
            double a = std::sqrt(3.0) * r;
            return theta[0] * theta[0] * (1.0 + a) * std::exp(-a);
        }
        case BaselineKind::M52: {
            double r = c.dist / theta[1];
            double a = std::sqrt(5.0) * r;
            return theta[0] * theta[0] * (1.0 + a + (5.0 / 3.0) * r * r) * std::exp(-a);
        }
        case BaselineKind::RQ: {
            double r = c.dist / theta[1];
            double alpha = theta[2];
            return theta[0] * theta[0] * std::pow(1.0 + r * r / (2.0 * alpha), -alpha);
        }
        case BaselineKind::E: {
            double r = c.dist / theta[1];
            return theta[0] * theta[0] * std::exp(-r);
        }
        case BaselineKind::EG: {
            double gamma = theta[2];
            if (gamma > 2.0)
                throw std::invalid_argument("eval_baseline: EG exponent must lie in (0, 2]");
            double r = c.dist / theta[1];
            return theta[0] * theta[0] * std::exp(-std::pow(r, gamma));
        }
        case BaselineKind::PER: {
            double r = c.dist / theta[1];
            double sp = std::sin(kPi * r);
            return theta[0] * theta[0] * std::exp(-2.0 * sp * sp / (theta[2] * theta[2]));
        }
        case BaselineKind::LIN:
            return detail::shifted_dot_from_pair(c, theta[0], theta[1]);
        case BaselineKind::CON:
            return theta[0];
        case BaselineKind::WN:
            return c.same_index ? theta[0] : 0.0;
    }
    throw std::invalid_argument("eval_baseline: unknown kernel");
}

// ---------------------------------------------------------------------------
// expression evaluation

inline std::size_t num_slots(const KernelExpr& expr) {
    std::size_t n = 0;
    for (const Node& nd : expr.nodes()) n += static_cast<std::size_t>(slot_count(nd.kind));
    return n;
}

/// Evaluates an expression tree at one input pair. theta layout follows
/// hyperparam_slots(). Returns nullopt on an evaluation fault: any
/// non-finite intermediate value (overflow, sqrt of a negative number)
/// poisons the whole evaluation.
inline std::optional<double> eval_expr(const KernelExpr& expr, std::span<const double> theta,
                                       const PairInputs& c) {
    if (theta.size() != num_slots(expr))
        throw std::invalid_argument("eval_expr: theta size does not match expression slots");
    detail::check_positive(theta);

    struct Walker {
        const std::vector<Node>& nodes;
        std::span<const double> theta;
        const PairInputs& c;
        std::size_t node = 0, slot = 0;
        bool fault = false;

        double run() {
            NodeKind k = nodes[node++].kind;
            double v = 0;
            switch (k) {
                case NodeKind::DistanceR:
                    v = c.dist / theta[slot++];
                    break;
                case NodeKind::DotProductS: {
                    double tl = theta[slot++];
                    double ts = theta[slot++];
                    v = detail::shifted_dot_from_pair(c, tl, ts);
                    break;
                }
                case NodeKind::HyperConst:
                    v = theta[slot++];
                    break;
                case NodeKind::WhiteNoise:
                    v = c.same_index ? theta[slot] : 0.0;
                    ++slot;
                    break;
                case NodeKind::LiteralOne:
                    v = 1.0;
                    break;
                case NodeKind::Add:
                    v = run();
                    v += run();
                    break;
                case NodeKind::Mul:
                    v = run();
                    v *= run();
                    break;
                case NodeKind::ExpNeg:
                    v = std::exp(-run());
                    break;
                case NodeKind::Square: {
                    double a = run();
                    v = a * a;
                    break;
                }
                case NodeKind::Sqrt:
                    v = std::sqrt(run());
                    break;
                case NodeKind::Sin:
                    v = std::sin(run());
                    break;
            }
            if (!std::isfinite(v)) fault = true;
            return v;
        }
    };

    Walker w{expr.nodes(), theta, c};
    double v = w.run();
    if (w.fault) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// kernels as one type

/// A kernel is either an evolved expression tree or one of the fixed
/// baseline forms. Hyperparameters are always stored separately: the same
/// structure can be re-fit with a new theta.
using AnyKernel = std::variant<KernelExpr, BaselineKind>;

inline std::vector<SlotDescriptor> kernel_slots(const AnyKernel& k) {
    if (std::holds_alternative<KernelExpr>(k)) return hyperparam_slots(std::get<KernelExpr>(k));
    return baseline_slots(std::get<BaselineKind>(k));
}

inline std::string kernel_label(const AnyKernel& k) {
    if (std::holds_alternative<KernelExpr>(k)) return serialize(std::get<KernelExpr>(k));
    return std::string(baseline_name(std::get<BaselineKind>(k)));
}

inline std::optional<double> eval_kernel(const AnyKernel& k, std::span<const double> theta,
                                         const PairInputs& c) {
    if (std::holds_alternative<KernelExpr>(k)) return eval_expr(std::get<KernelExpr>(k), theta, c);
    double v = eval_baseline(std::get<BaselineKind>(k), theta, c);
    if (!std::isfinite(v)) return std::nullopt;
    return v;
}

// ---------------------------------------------------------------------------
// covariance matrices

/// Precomputed pairwise quantities for a pair of sample matrices (rows are
/// samples). Building the grid is the only O(n^2 d) step; every covariance
/// build afterwards is O(n^2 · tree size), independent of the input
/// dimension, which matters because hyperparameter search evaluates the
/// same grid under hundreds of theta settings.
class PairGrid {
public:
    /// Grid over one sample set; diagonal pairs are flagged as identical
    /// samples (the white-noise delta fires on them).
    static PairGrid self(const Matrix& X) {
        PairGrid g;
        g.init(X, X, true);
        return g;
    }

    /// Grid between two sample sets; no pair is considered identical.
    static PairGrid cross(const Matrix& X1, const Matrix& X2) {
        if (X1.cols() != X2.cols())
            throw std::invalid_argument("PairGrid::cross: dimension mismatch");
        PairGrid g;
        g.init(X1, X2, false);
        return g;
    }

    Eigen::Index rows() const { return dist_.rows(); }
    Eigen::Index cols() const { return dist_.cols(); }
    bool is_self() const { return self_; }

    PairInputs at(Eigen::Index i, Eigen::Index j) const {
        PairInputs c;
        c.dist = dist_(i, j);
        c.dot = dot_(i, j);
        c.sum_x = row_sum_(i);
        c.sum_xp = col_sum_(j);
        c.dim = dim_;
        c.same_index = self_ && i == j;
        return c;
    }

private:
    void init(const Matrix& X1, const Matrix& X2, bool self) {
        self_ = self;
        dim_ = static_cast<double>(X1.cols());
        dot_ = X1 * X2.transpose();
        row_sum_ = X1.rowwise().sum();
        col_sum_ = X2.rowwise().sum();
        dist_.resize(X1.rows(), X2.rows());
        if (self) {
            for (Eigen::Index i = 0; i < X1.rows(); ++i) {
                dist_(i, i) = 0.0;
                for (Eigen::Index j = i + 1; j < X1.rows(); ++j) {
                    double d = (X1.row(i) - X1.row(j)).norm();
                    dist_(i, j) = d;
                    dist_(j, i) = d;
                }
            }
        } else {
            for (Eigen::Index i = 0; i < X1.rows(); ++i)
                for (Eigen::Index j = 0; j < X2.rows(); ++j)
                    dist_(i, j) = (X1.row(i) - X2.row(j)).norm();
        }
    }

    bool self_ = false;
    double dim_ = 0;
    Matrix dist_, dot_;
    Vector row_sum_, col_sum_;
};

/// Covariance matrix over a precomputed grid. Self grids produce an exactly
/// symmetric matrix (the upper triangle is mirrored, not recomputed).
/// Returns nullopt if any entry faults.
inline std::optional<Matrix> build_covariance(const AnyKernel& k, std::span<const double> theta,
                                              const PairGrid& grid) {
    Matrix K(grid.rows(), grid.cols());
    if (grid.is_self()) {
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            for (Eigen::Index j = i; j < grid.cols(); ++j) {
                auto v = eval_kernel(k, theta, grid.at(i, j));
                if (!v) return std::nullopt;
                K(i, j) = *v;
                K(j, i) = *v;
            }
        }
    } else {
        for (Eigen::Index i = 0; i < grid.rows(); ++i) {
            for (Eigen::Index j = 0; j < grid.cols(); ++j) {
                auto v = eval_kernel(k, theta, grid.at(i, j));
                if (!v) return std::nullopt;
                K(i, j) = *v;
            }
        }
    }
    return K;
}

inline std::optional<Matrix> build_covariance(const AnyKernel& k, std::span<const double> theta,
                                              const Matrix& X) {
    return build_covariance(k, theta, PairGrid::self(X));
}

inline std::optional<Matrix> build_covariance(const AnyKernel& k, std::span<const double> theta,
                                              const Matrix& X1, const Matrix& X2) {
    if (&X1 == &X2) return build_covariance(k, theta, PairGrid::self(X1));
    return build_covariance(k, theta, PairGrid::cross(X1, X2));
}

}  // namespace moecov
