#pragma once

// Independent reference implementations used to cross-check the library.
// Everything here is written the slow, obvious way on purpose: dense
// Gauss-Jordan inversion instead of Cholesky solves, log-determinant by
// elimination, direct formula transcription for the kernels, and O(n²)
// pairwise domination for Pareto fronts. Nothing in this header calls
// into the library being tested.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <optional>
#include <vector>

namespace oracle {

using Mat = std::vector<std::vector<double>>;

inline Mat identity(std::size_t n) {
    Mat I(n, std::vector<double>(n, 0.0));
    for (std::size_t i = 0; i < n; ++i) I[i][i] = 1.0;
    return I;
}

/// Gauss-Jordan inverse with partial pivoting. Returns nullopt on a
/// (numerically) singular matrix.
inline std::optional<Mat> invert(Mat a) {
    const std::size_t n = a.size();
    Mat inv = identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return std::nullopt;
        std::swap(a[piv], a[col]);
        std::swap(inv[piv], inv[col]);
        const double d = a[col][col];
        for (std::size_t c = 0; c < n; ++c) {
            a[col][c] /= d;
            inv[col][c] /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double m = a[r][col];
            if (m == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                a[r][c] -= m * a[col][c];
                inv[r][c] -= m * inv[col][c];
            }
        }
    }
    return inv;
}

/// log|A| for a positive-definite matrix, by Gaussian elimination with
/// partial pivoting; nullopt when the determinant is not positive.
inline std::optional<double> log_det_pd(Mat a) {
    const std::size_t n = a.size();
    double log_abs = 0.0;
    int sign = 1;
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
        if (std::abs(a[piv][col]) < 1e-300) return std::nullopt;
        if (piv != col) {
            std::swap(a[piv], a[col]);
            sign = -sign;
        }
        const double d = a[col][col];
        log_abs += std::log(std::abs(d));
        if (d < 0) sign = -sign;
        for (std::size_t r = col + 1; r < n; ++r) {
            const double m = a[r][col] / d;
            if (m == 0.0) continue;
            for (std::size_t c = col; c < n; ++c) a[r][c] -= m * a[col][c];
        }
    }
    if (sign < 0) return std::nullopt;
    return log_abs;
}

/// Log marginal likelihood by the dense textbook route:
///   -1/2 fᵀ K⁻¹ f - 1/2 log|K| - n/2 log 2π.
inline std::optional<double> lml(const Mat& K, const std::vector<double>& f) {
    const std::size_t n = K.size();
    auto Kinv = invert(K);
    auto logdet = log_det_pd(K);
    if (!Kinv || !logdet) return std::nullopt;
    double quad = 0.0;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) quad += f[i] * (*Kinv)[i][j] * f[j];
    return -0.5 * quad - 0.5 * *logdet -
           0.5 * static_cast<double>(n) * std::log(2.0 * 3.14159265358979323846);
}

struct Posterior {
    std::vector<double> mean;
    std::vector<double> variance;
};

/// Posterior predictive by dense inversion: mean = KsᵀK⁻¹f and
/// var_j = kss_j - ks_jᵀ K⁻¹ ks_j, where Ks has one column per test point.
inline std::optional<Posterior> posterior(const Mat& K, const Mat& Ks,
                                          const std::vector<double>& kss,
                                          const std::vector<double>& f) {
    const std::size_t n = K.size();
    const std::size_t m = kss.size();
    auto Kinv = invert(K);
    if (!Kinv) return std::nullopt;
    Posterior out;
    out.mean.assign(m, 0.0);
    out.variance.assign(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        std::vector<double> w(n, 0.0);  // K⁻¹ ks_j
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t l = 0; l < n; ++l) w[i] += (*Kinv)[i][l] * Ks[l][j];
        double mu = 0.0, red = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            mu += w[i] * f[i];
            red += Ks[i][j] * w[i];
        }
        out.mean[j] = mu;
        out.variance[j] = kss[j] - red;
    }
    return out;
}

/// Pearson correlation, direct textbook formula.
inline double pcc(const std::vector<double>& a, const std::vector<double>& b) {
    const std::size_t n = a.size();
    double ma = 0, mb = 0;
    for (std::size_t i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= static_cast<double>(n);
    mb /= static_cast<double>(n);
    double saa = 0, sbb = 0, sab = 0;
    for (std::size_t i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    return sab / std::sqrt(saa * sbb);
}

/// Mean negative log predictive density with the same 1e-12 variance
/// floor the library declares.
inline double nlpd(const std::vector<double>& f, const std::vector<double>& mu,
                   const std::vector<double>& var) {
    const std::size_t n = f.size();
    double acc = 0;
    for (std::size_t i = 0; i < n; ++i) {
        double v = std::max(var[i], 1e-12);
        acc += (f[i] - mu[i]) * (f[i] - mu[i]) / (2.0 * v) + 0.5 * std::log(v) +
               0.5 * std::log(2.0 * 3.14159265358979323846);
    }
    return acc / static_cast<double>(n);
}

// ---------------------------------------------------------------------------
// direct kernel formulas

inline double dist(const std::vector<double>& x, const std::vector<double>& xp) {
    double s = 0;
    for (std::size_t i = 0; i < x.size(); ++i) s += (x[i] - xp[i]) * (x[i] - xp[i]);
    return std::sqrt(s);
}

inline double scaled_r(const std::vector<double>& x, const std::vector<double>& xp,
                       double theta_l) {
    return dist(x, xp) / theta_l;
}

/// (x - θs)·(x' - θs) / θl, computed componentwise.
inline double shifted_s(const std::vector<double>& x, const std::vector<double>& xp,
                        double theta_l, double theta_s) {
    double acc = 0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += (x[i] - theta_s) * (xp[i] - theta_s);
    return acc / theta_l;
}

inline double k_se(double theta0, double r) { return theta0 * theta0 * std::exp(-0.5 * r * r); }

inline double k_m32(double theta0, double r) {
    double a = std::sqrt(3.0) * r;
    return theta0 * theta0 * (1.0 + a) * std::exp(-a);
}

inline double k_m52(double theta0, double r) {
    double a = std::sqrt(5.0) * r;
    return theta0 * theta0 * (1.0 + a + (5.0 / 3.0) * r * r) * std::exp(-a);
}

inline double k_rq(double theta0, double alpha, double r) {
    return theta0 * theta0 * std::pow(1.0 + r * r / (2.0 * alpha), -alpha);
}

inline double k_e(double theta0, double r) { return theta0 * theta0 * std::exp(-r); }

inline double k_eg(double theta0, double gamma, double r) {
    return theta0 * theta0 * std::exp(-std::pow(r, gamma));
}

inline double k_per(double theta0, double theta_p, double r) {
    double s = std::sin(3.14159265358979323846 * r);
    return theta0 * theta0 * std::exp(-2.0 * s * s / (theta_p * theta_p));
}

inline double k_lin(double s) { return s; }

inline double k_con(double theta_c) { return theta_c; }

inline double k_wn(double theta_c, bool same_point) { return same_point ? theta_c : 0.0; }

// ---------------------------------------------------------------------------
// brute-force Pareto fronts

inline bool dominates(const std::vector<double>& a, const std::vector<double>& b) {
    bool strict = false;
    for (std::size_t i = 0; i < a.size(); ++i) {
        if (a[i] > b[i]) return false;
        if (a[i] < b[i]) strict = true;
    }
    return strict;
}

/// Peels non-dominated layers by checking every pair, returning front
/// indices in ascending order.
inline std::vector<std::vector<std::size_t>> pareto_fronts(
    const std::vector<std::vector<double>>& pts) {
    std::vector<std::vector<std::size_t>> fronts;
    std::vector<bool> assigned(pts.size(), false);
    std::size_t left = pts.size();
    while (left > 0) {
        std::vector<std::size_t> front;
        for (std::size_t i = 0; i < pts.size(); ++i) {
            if (assigned[i]) continue;
            bool dominated = false;
            for (std::size_t j = 0; j < pts.size(); ++j) {
                if (j == i || assigned[j]) continue;
                if (dominates(pts[j], pts[i])) {
                    dominated = true;
                    break;
                }
            }
            if (!dominated) front.push_back(i);
        }
        for (std::size_t i : front) assigned[i] = true;
        left -= front.size();
        fronts.push_back(std::move(front));
    }
    return fronts;
}

}  // namespace oracle
