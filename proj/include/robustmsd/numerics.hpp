#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <span>
#include <utility>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include "errors.hpp"

namespace robustmsd {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

namespace numerics {

inline bool all_finite(const Matrix& m) { return m.allFinite(); }

inline double max_abs(const Matrix& m) { return m.size() == 0 ? 0.0 : m.cwiseAbs().maxCoeff(); }

/// Lower Cholesky factor L with sigma = L L^T.
class CholeskyFactor {
public:
    CholeskyFactor() = default;
    explicit CholeskyFactor(Matrix lower) : lower_(std::move(lower)) {}

    const Matrix& lower() const noexcept { return lower_; }
    Eigen::Index dim() const noexcept { return lower_.rows(); }

    /// x = sigma^{-1} b via two triangular solves.
    Vector solve(const Vector& b) const {
        Vector y = lower_.triangularView<Eigen::Lower>().solve(b);
        return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    Matrix solve(const Matrix& b) const {
        Matrix y = lower_.triangularView<Eigen::Lower>().solve(b);
        return lower_.transpose().triangularView<Eigen::Upper>().solve(y);
    }

    /// log |sigma|
    double log_det() const { return 2.0 * lower_.diagonal().array().log().sum(); }

    Matrix reconstruct() const { return lower_ * lower_.transpose(); }

private:
    Matrix lower_;
};

inline void require_symmetric(const Matrix& sigma, double tol = 1e-10) {
    detail::require(sigma.rows() == sigma.cols(), ErrorKind::DimensionMismatch, "covariance must be square");
    detail::require(sigma.allFinite(), ErrorKind::NonFinite, "covariance has non-finite entries");
    const double scale = std::max(1.0, max_abs(sigma));
    detail::require(max_abs(sigma - sigma.transpose()) <= tol * scale, ErrorKind::InvalidArgument,
                    "covariance is not symmetric");
}

/// Throws DegenerateCovariance when sigma is not positive definite.
inline CholeskyFactor cholesky(const Matrix& sigma) {
    require_symmetric(sigma);
    detail::require(sigma.rows() > 0, ErrorKind::DimensionMismatch, "empty covariance");
    Eigen::LLT<Matrix> llt(sigma);
    if (llt.info() != Eigen::Success) {
        throw Error(ErrorKind::DegenerateCovariance, "covariance is not positive definite");
    }
    Matrix lower = llt.matrixL();
    if ((lower.diagonal().array() <= 0.0).any() || !lower.allFinite()) {
        throw Error(ErrorKind::DegenerateCovariance, "covariance is not positive definite");
    }
    return CholeskyFactor(std::move(lower));
}

/// Symmetric square root of a PD matrix and its inverse.
struct SymmetricRoot {
    Matrix root;
    Matrix inverse_root;
};

inline SymmetricRoot symmetric_sqrt(const Matrix& sigma) {
    require_symmetric(sigma);
    Eigen::SelfAdjointEigenSolver<Matrix> eig(sigma);
    if (eig.info() != Eigen::Success || (eig.eigenvalues().array() <= 0.0).any()) {
        throw Error(ErrorKind::DegenerateCovariance, "covariance is not positive definite");
    }
    const Matrix& v = eig.eigenvectors();
    const Vector s = eig.eigenvalues().array().sqrt();
    return {v * s.asDiagonal() * v.transpose(), v * s.cwiseInverse().asDiagonal() * v.transpose()};
}

/// Pairwise summation; the reduction tree is fixed by the length alone.
inline double pairwise_sum(std::span<const double> xs) {
    if (xs.size() <= 16) {
        double s = 0.0;
        for (double x : xs) s += x;
        return s;
    }
    const std::size_t half = xs.size() / 2;
    return pairwise_sum(xs.first(half)) + pairwise_sum(xs.subspan(half));
}

inline double mean(std::span<const double> xs) {
    detail::require(!xs.empty(), ErrorKind::InvalidArgument, "mean of empty range");
    return pairwise_sum(xs) / static_cast<double>(xs.size());
}

/// Unbiased standard deviation (divisor n - 1).
inline double stdev(std::span<const double> xs) {
    detail::require(xs.size() >= 2, ErrorKind::InvalidArgument, "stdev needs at least two values");
    const double m = mean(xs);
    std::vector<double> sq(xs.size());
    std::transform(xs.begin(), xs.end(), sq.begin(), [m](double x) { return (x - m) * (x - m); });
    return std::sqrt(pairwise_sum(sq) / static_cast<double>(xs.size() - 1));
}

inline std::span<const double> as_span(const Vector& v) { return {v.data(), static_cast<std::size_t>(v.size())}; }

/// log(sum exp(z_i)) with max subtraction.
inline double log_sum_exp(std::span<const double> zs) {
    detail::require(!zs.empty(), ErrorKind::InvalidArgument, "log_sum_exp of empty range");
    const double zmax = *std::max_element(zs.begin(), zs.end());
    if (!std::isfinite(zmax)) return zmax;
    std::vector<double> e(zs.size());
    std::transform(zs.begin(), zs.end(), e.begin(), [zmax](double z) { return std::exp(z - zmax); });
    return zmax + std::log(pairwise_sum(e));
}

struct MeanCov {
    Vector mean;
    Matrix cov;
};

/// Arithmetic mean and unbiased covariance of the rows of `data`.
inline MeanCov sample_mean_cov(const Matrix& data) {
    detail::require(data.rows() >= 2, ErrorKind::InvalidArgument, "sample_mean_cov needs at least two rows");
    detail::require(data.allFinite(), ErrorKind::NonFinite, "data has non-finite entries");
    const auto m = static_cast<double>(data.rows());
    Vector mu = data.colwise().mean();
    Matrix centered = data.rowwise() - mu.transpose();
    Matrix cov = (centered.transpose() * centered) / (m - 1.0);
    cov = 0.5 * (cov + cov.transpose());
    return {std::move(mu), std::move(cov)};
}

/// Lower order-statistic quantile: element ceil(p*M)-1 of the sorted values,
/// clamped to [0, M-1]. No interpolation.
inline double empirical_quantile(std::span<const double> xs, double p) {
    detail::require(!xs.empty(), ErrorKind::InvalidArgument, "empirical_quantile of empty input");
    detail::require(p >= 0.0 && p <= 1.0, ErrorKind::InvalidArgument, "quantile level must lie in [0, 1]");
    const auto m = static_cast<long long>(xs.size());
    // the slack keeps levels such as 1 - 0.95 = 0.05000000000000004 on the intended order statistic
    long long idx = static_cast<long long>(std::ceil(p * static_cast<double>(m) - 1e-9)) - 1;
    idx = std::clamp(idx, 0LL, m - 1);
    std::vector<double> v(xs.begin(), xs.end());
    std::nth_element(v.begin(), v.begin() + idx, v.end());
    return v[static_cast<std::size_t>(idx)];
}

inline double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::numbers::sqrt2); }

/// log Phi(x) for a standard normal, accurate far into the left tail.
inline double log_normal_cdf(double x) {
    if (x > -20.0) return std::log(normal_cdf(x));
    // asymptotic series of the Mills ratio
    const double x2 = x * x;
    const double series = 1.0 - 1.0 / x2 + 3.0 / (x2 * x2) - 15.0 / (x2 * x2 * x2);
    return -0.5 * x2 - std::log(-x) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log(series);
}

/// Acklam's rational approximation refined by one Halley step.
inline double normal_quantile(double p) {
    detail::require(p > 0.0 && p < 1.0, ErrorKind::InvalidArgument, "normal_quantile needs p in (0, 1)");
    static constexpr double a[] = {-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
                                   1.383577518672690e+02,  -3.066479806614716e+01, 2.506628277459239e+00};
    static constexpr double b[] = {-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
                                   6.680131188771972e+01,  -1.328068155288572e+01};
    static constexpr double c[] = {-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
                                   -2.549732539343734e+00, 4.374664141464968e+00,  2.938163982698783e+00};
    static constexpr double d[] = {7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
                                   3.754408661907416e+00};
    const double plow = 0.02425;
    double x;
    if (p < plow) {
        const double q = std::sqrt(-2.0 * std::log(p));
        x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    } else if (p <= 1.0 - plow) {
        const double q = p - 0.5;
        const double r = q * q;
        x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
            (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
    } else {
        const double q = std::sqrt(-2.0 * std::log(1.0 - p));
        x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
            ((((d[0] * q + d[1]) * q + d[2]) * q + d[3]) * q + 1.0);
    }
    const double e = normal_cdf(x) - p;
    const double u = e * std::sqrt(2.0 * std::numbers::pi) * std::exp(0.5 * x * x);
    return x - u / (1.0 + 0.5 * x * u);
}

struct RootResult {
    double x = 0.0;
    double fx = 0.0;
    int iterations = 0;
    bool converged = false;
};

/// Brent's method on a bracket [a, b] with f(a) f(b) <= 0. Stops when the
/// bracket is narrower than xtol or |f| <= ftol.
template <class F>
RootResult brent_root(F&& f, double a, double b, double xtol, double ftol, int max_iter = 200) {
    double fa = f(a);
    double fb = f(b);
    if (fa == 0.0) return {a, fa, 0, true};
    if (fb == 0.0) return {b, fb, 0, true};
    detail::require(fa * fb < 0.0, ErrorKind::InvalidArgument, "brent_root: root is not bracketed");

    double c = a, fc = fa, d = b - a, e = d;
    for (int iter = 1; iter <= max_iter; ++iter) {
        if ((fb > 0.0) == (fc > 0.0)) {
            c = a;
            fc = fa;
            d = e = b - a;
        }
        if (std::abs(fc) < std::abs(fb)) {
            a = b; b = c; c = a;
            fa = fb; fb = fc; fc = fa;
        }
        const double tol = 2.0 * std::numeric_limits<double>::epsilon() * std::abs(b) + 0.5 * xtol;
        const double m = 0.5 * (c - b);
        if (std::abs(m) <= tol || std::abs(fb) <= ftol) return {b, fb, iter, true};

        if (std::abs(e) >= tol && std::abs(fa) > std::abs(fb)) {
            double p, q, r;
            const double s = fb / fa;
            if (a == c) {
                p = 2.0 * m * s;
                q = 1.0 - s;
            } else {
                q = fa / fc;
                r = fb / fc;
                p = s * (2.0 * m * q * (q - r) - (b - a) * (r - 1.0));
                q = (q - 1.0) * (r - 1.0) * (s - 1.0);
            }
            if (p > 0.0) q = -q; else p = -p;
            if (2.0 * p < std::min(3.0 * m * q - std::abs(tol * q), std::abs(e * q))) {
                e = d;
                d = p / q;
            } else {
                d = m;
                e = d;
            }
        } else {
            d = m;
            e = d;
        }
        a = b;
        fa = fb;
        b += std::abs(d) > tol ? d : (m > 0.0 ? tol : -tol);
        fb = f(b);
    }
    return {b, fb, max_iter, false};
}

} // namespace numerics
} // namespace robustmsd
