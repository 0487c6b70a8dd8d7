#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "skew_normal.hpp"

namespace robustmsd {

/// Neighbor rank and repeat count for the nearest-neighbor KL estimator.
struct KnnConfig {
    int k = 5;
    int repeats = 1000;

    void validate() const {
        detail::require(k >= 1, ErrorKind::InvalidArgument, "k must be at least 1");
        detail::require(repeats >= 1, ErrorKind::InvalidArgument, "repeats must be at least 1");
    }
};

/// KL divergence of the alternative N(mu_alt, sigma_alt) from the nominal N(mu_nom, sigma_nom):
/// 1/2 (tr(S^-1 Sbar) + (mu - mubar)^T S^-1 (mu - mubar) - d + log(|S| / |Sbar|)).
inline double kl_normal(const Vector& mu_nom, const Matrix& sigma_nom, const Vector& mu_alt, const Matrix& sigma_alt) {
    const auto d = mu_nom.size();
    detail::require(mu_alt.size() == d && sigma_nom.rows() == d && sigma_alt.rows() == d, ErrorKind::DimensionMismatch,
                    "normal parameter dimensions differ");
    const auto nom = numerics::cholesky(sigma_nom);
    const auto alt = numerics::cholesky(sigma_alt);
    const Vector diff = mu_nom - mu_alt;
    const double trace = nom.solve(sigma_alt).trace();
    const double quad = diff.dot(nom.solve(diff));
    const double value = 0.5 * (trace + quad - static_cast<double>(d) + nom.log_det() - alt.log_det());
    return std::max(0.0, value);
}

struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
};

namespace detail {

/// Mean and standard error of log 2 Phi(X | variance) over draws of a one-dimensional skew-normal X.
inline McEstimate mean_log_two_phi(const SkewNormal1D& law, double variance, long samples, std::uint64_t seed) {
    std::vector<double> values(static_cast<std::size_t>(samples));
    const double sd = std::sqrt(variance);
    const std::size_t blocks = (values.size() + kBlockRows - 1) / kBlockRows;
    for (std::size_t b = 0; b < blocks; ++b) {
        NormalSource normal(substream_seed(seed, b));
        const std::size_t end = std::min(values.size(), (b + 1) * kBlockRows);
        for (std::size_t i = b * kBlockRows; i < end; ++i) {
            values[i] = std::numbers::ln2 + numerics::log_normal_cdf(law.draw(normal) / sd);
        }
    }
    const double m = numerics::mean(values);
    return {m, numerics::stdev(values) / std::sqrt(static_cast<double>(samples))};
}

} // namespace detail

/// KL divergence of a skew-normal alternative from a skew-normal nominal:
///
///   KL_gauss(nominal, alt) + sqrt(2/pi) (mubar - mu)^T S^-1 Sbar^{1/2} xibar
///     - E log 2 Phi(Xi2 | 1 - xi^T xi) + E log 2 Phi(Xi1 | 1 - xibar^T xibar),
///
/// Xi1 ~ SN_1(0, xibar^T xibar, |xibar|) and Xi2 = xi^T S^{-1/2}(Ybar - mu) with Ybar drawn from the
/// alternative. Both expectations are Monte Carlo estimates; std_error combines the two.
inline McEstimate kl_skew_normal(const SkewNormalParams& nominal, const SkewNormalParams& alt, long mc_samples,
                                 std::uint64_t seed) {
    detail::require(nominal.dim() == alt.dim(), ErrorKind::DimensionMismatch, "skew-normal dimensions differ");
    detail::require(mc_samples >= 1000, ErrorKind::InvalidArgument, "need at least 1000 Monte Carlo samples");

    const auto nom_chol = numerics::cholesky(nominal.scale());
    const double gauss = kl_normal(nominal.loc(), nominal.scale(), alt.loc(), alt.scale());
    const Vector shift = alt.loc() - nominal.loc();
    const Vector alt_skew_dir = alt.scale_root() * alt.skew();
    const double cross = std::sqrt(2.0 / std::numbers::pi) * shift.dot(nom_chol.solve(alt_skew_dir));

    // Xi1: alternative's own skew term
    const double sbar2 = alt.skew().squaredNorm();
    McEstimate xi1{0.0, 0.0};
    if (sbar2 > 0.0) {
        const SkewNormal1D law{0.0, std::sqrt(sbar2), std::sqrt(sbar2)};
        xi1 = detail::mean_log_two_phi(law, 1.0 - sbar2, mc_samples, substream_seed(seed, 1));
    }

    // Xi2: nominal skew term evaluated under the alternative; Phi(0 | .) = 1/2 when xi = 0
    const double s2 = nominal.skew().squaredNorm();
    McEstimate xi2{0.0, 0.0};
    if (s2 > 0.0) {
        const Vector a = nominal.scale_inverse_root() * nominal.skew();
        const double location = a.dot(shift);
        const double omega2 = a.dot(alt.scale() * a);
        const double omega = std::sqrt(omega2);
        const double delta = omega > 0.0 ? a.dot(alt_skew_dir) / omega : 0.0;
        const SkewNormal1D law{location, omega, delta};
        xi2 = detail::mean_log_two_phi(law, 1.0 - s2, mc_samples, substream_seed(seed, 2));
    }

    return {gauss + cross - xi2.value + xi1.value, std::hypot(xi1.std_error, xi2.std_error)};
}

struct KnnEstimate {
    double value = 0.0;
    /// Set when a zero distance had to be floored.
    bool floored_distance = false;
};

inline constexpr double kDistanceFloor = 1e-12;

namespace detail {

/// Distance from `point` to its k-th nearest row of `sample`, skipping row `skip` (or none when skip < 0).
inline double kth_distance(const Matrix& sample, const Eigen::RowVectorXd& point, int k, Eigen::Index skip,
                           std::vector<double>& scratch) {
    scratch.clear();
    for (Eigen::Index j = 0; j < sample.rows(); ++j) {
        if (j == skip) continue;
        scratch.push_back((sample.row(j) - point).squaredNorm());
    }
    auto kth = scratch.begin() + (k - 1);
    std::nth_element(scratch.begin(), kth, scratch.end());
    return std::sqrt(*kth);
}

} // namespace detail

/// k-th nearest-neighbor KL estimate of the alternative (sample `alt`, K rows) from the nominal
/// (sample `nominal`, M rows):
///
///   (1/K) sum_i log( M y_k(i)^d / ((K - 1) ytilde_k(i)^d) ),
///
/// ytilde_k(i) the distance from alt_i to its k-th neighbor among the other alt rows and y_k(i)
/// the distance to its k-th neighbor among the nominal rows. Negative values are returned as is.
inline KnnEstimate kl_knn_estimate(const Matrix& nominal, const Matrix& alt, int k) {
    detail::require(k >= 1, ErrorKind::InvalidArgument, "k must be at least 1");
    detail::require(nominal.cols() == alt.cols(), ErrorKind::DimensionMismatch, "sample dimensions differ");
    detail::require(alt.rows() >= k + 1, ErrorKind::InvalidArgument, "alternative sample needs more than k rows");
    detail::require(nominal.rows() >= k, ErrorKind::InvalidArgument, "nominal sample needs at least k rows");
    const auto big_k = static_cast<double>(alt.rows());
    const auto m = static_cast<double>(nominal.rows());
    const auto d = static_cast<double>(alt.cols());

    KnnEstimate out;
    std::vector<double> scratch;
    scratch.reserve(static_cast<std::size_t>(std::max(nominal.rows(), alt.rows())));
    std::vector<double> terms(static_cast<std::size_t>(alt.rows()));
    for (Eigen::Index i = 0; i < alt.rows(); ++i) {
        const Eigen::RowVectorXd point = alt.row(i);
        double within = detail::kth_distance(alt, point, k, i, scratch);
        double across = detail::kth_distance(nominal, point, k, -1, scratch);
        if (within < kDistanceFloor) {
            within = kDistanceFloor;
            out.floored_distance = true;
        }
        if (across < kDistanceFloor) {
            across = kDistanceFloor;
            out.floored_distance = true;
        }
        terms[static_cast<std::size_t>(i)] = d * (std::log(across) - std::log(within));
    }
    out.value = numerics::mean(terms) + std::log(m / (big_k - 1.0));
    return out;
}

namespace detail {

inline void require_ratio_weights(std::span<const double> w) {
    require(!w.empty(), ErrorKind::InvalidArgument, "empty weight vector");
    for (double x : w) {
        require(std::isfinite(x), ErrorKind::NonFinite, "non-finite likelihood-ratio weight");
        require(x >= 0.0, ErrorKind::InvalidArgument, "negative likelihood-ratio weight");
    }
    const double m = numerics::mean(w);
    require(std::abs(m - 1.0) <= 1e-10, ErrorKind::InvalidArgument, "likelihood-ratio weights must have mean 1");
}

} // namespace detail

/// Sample-average KL divergence mean(w log w), with 0 log 0 = 0.
inline double kl_of_ratio_weights(std::span<const double> weights) {
    detail::require_ratio_weights(weights);
    std::vector<double> terms(weights.size());
    std::transform(weights.begin(), weights.end(), terms.begin(),
                   [](double w) { return w > 0.0 ? w * std::log(w) : 0.0; });
    return numerics::mean(terms);
}

inline double kl_of_ratio_weights(const Vector& weights) { return kl_of_ratio_weights(numerics::as_span(weights)); }

/// Sample-average alpha-divergence mean(w^a - a(w - 1) - 1) / (a(a - 1)) for a > 1.
inline double alpha_divergence_of_ratio_weights(std::span<const double> weights, double alpha) {
    detail::require(alpha > 1.0, ErrorKind::InvalidArgument, "alpha must exceed 1; use kl_of_ratio_weights at 1");
    detail::require_ratio_weights(weights);
    std::vector<double> terms(weights.size());
    std::transform(weights.begin(), weights.end(), terms.begin(),
                   [alpha](double w) { return std::pow(w, alpha) - alpha * (w - 1.0) - 1.0; });
    return numerics::mean(terms) / (alpha * (alpha - 1.0));
}

inline double alpha_divergence_of_ratio_weights(const Vector& weights, double alpha) {
    return alpha_divergence_of_ratio_weights(numerics::as_span(weights), alpha);
}

} // namespace robustmsd
