#pragma once

// Independent reference computations for the tests. Nothing here calls into the
// library's numerical code: these are direct, slow restatements of the definitions.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include <Eigen/Dense>

namespace oracle {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// The three-asset model used throughout the examples.
inline Vec example_mu() {
    Vec mu(3);
    mu << 0.0007, 0.0022, 0.0016;
    return mu;
}

inline Mat example_sigma() {
    Mat s(3, 3);
    s << 3, 1, 1, 1, 4, 1, 1, 1, 3;
    return s * 1e-4;
}

inline double naive_mean(const std::vector<double>& xs) {
    long double s = 0.0L;
    for (double x : xs) s += x;
    return static_cast<double>(s / xs.size());
}

inline void naive_mean_cov(const Mat& data, Vec& mean, Mat& cov) {
    const auto m = data.rows(), d = data.cols();
    mean = Vec::Zero(d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index j = 0; j < d; ++j) mean[j] += data(i, j);
    mean /= static_cast<double>(m);
    cov = Mat::Zero(d, d);
    for (Eigen::Index i = 0; i < m; ++i)
        for (Eigen::Index a = 0; a < d; ++a)
            for (Eigen::Index b = 0; b < d; ++b) cov(a, b) += (data(i, a) - mean[a]) * (data(i, b) - mean[b]);
    cov /= static_cast<double>(m - 1);
}

inline double sample_sd(const std::vector<double>& xs) {
    const double m = naive_mean(xs);
    long double s = 0.0L;
    for (double x : xs) s += (x - m) * (x - m);
    return std::sqrt(static_cast<double>(s / (xs.size() - 1)));
}

/// Exact quantile of the terminal-wealth difference W(b) - W(a) when every period
/// draws one of the rows of `gross` with equal probability: enumerate all rows^N paths.
inline double enumerated_diff_quantile(const Mat& a, const Mat& b, const Mat& gross, double p) {
    const auto rows = gross.rows();
    const auto horizon = a.rows();
    std::vector<std::pair<double, double>> outcomes; // (diff, probability)
    long total = 1;
    for (Eigen::Index n = 0; n < horizon; ++n) total *= rows;
    for (long path = 0; path < total; ++path) {
        double wa = 1.0, wb = 1.0;
        long code = path;
        for (Eigen::Index n = 0; n < horizon; ++n) {
            const Eigen::Index r = code % rows;
            code /= rows;
            wa *= a.row(n).dot(gross.row(r));
            wb *= b.row(n).dot(gross.row(r));
        }
        outcomes.emplace_back(wb - wa, 1.0 / static_cast<double>(total));
    }
    std::sort(outcomes.begin(), outcomes.end());
    double cdf = 0.0;
    for (const auto& [d, w] : outcomes) {
        cdf += w;
        if (cdf >= p - 1e-15) return d;
    }
    return outcomes.back().first;
}

/// Sorted-copy quantile at index ceil(p M) - 1.
inline double sorted_quantile(std::vector<double> xs, double p) {
    std::sort(xs.begin(), xs.end());
    long idx = static_cast<long>(std::ceil(p * static_cast<double>(xs.size()))) - 1;
    idx = std::clamp(idx, 0L, static_cast<long>(xs.size()) - 1);
    return xs[static_cast<std::size_t>(idx)];
}

/// Gaussian KL of alternative from nominal with explicit inverses and determinants.
inline double kl_gauss(const Vec& mu0, const Mat& s0, const Vec& mu1, const Mat& s1) {
    const Mat inv = s0.inverse();
    const Vec diff = mu0 - mu1;
    return 0.5 * ((inv * s1).trace() + diff.dot(inv * diff) - static_cast<double>(mu0.size()) +
                  std::log(s0.determinant() / s1.determinant()));
}

/// Symmetric PD square root by the Denman-Beavers iteration.
inline Mat sqrtm(const Mat& a) {
    Mat y = a, z = Mat::Identity(a.rows(), a.cols());
    for (int i = 0; i < 100; ++i) {
        const Mat yi = y.inverse(), zi = z.inverse();
        y = 0.5 * (y + zi);
        z = 0.5 * (z + yi);
    }
    return y;
}

inline double phi_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

/// Skew-normal log density 2 phi_d(y; mu, S) Phi(xi^T S^{-1/2}(y - mu) / sqrt(1 - xi^T xi)).
inline double sn_log_density(const Vec& y, const Vec& mu, const Mat& s, const Vec& xi) {
    const auto d = static_cast<double>(mu.size());
    const Mat inv_root = sqrtm(s).inverse();
    const Vec z = inv_root * (y - mu);
    const double gauss = -0.5 * z.squaredNorm() - 0.5 * d * std::log(2.0 * std::numbers::pi) - 0.5 * std::log(s.determinant());
    const double arg = xi.dot(z) / std::sqrt(1.0 - xi.squaredNorm());
    return std::log(2.0) + gauss + std::log(phi_cdf(arg));
}

/// Draws from SN_d(mu, S, xi) with the standard library's normal generator.
inline Mat sn_draws(const Vec& mu, const Mat& s, const Vec& xi, int count, unsigned seed) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> n01;
    const auto d = mu.size();
    const Mat root = sqrtm(s);
    const Mat ortho = sqrtm(Mat::Identity(d, d) - xi * xi.transpose());
    Mat out(count, d);
    for (int i = 0; i < count; ++i) {
        const double z0 = std::abs(n01(rng));
        Vec z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = n01(rng);
        out.row(i) = (mu + root * (xi * z0 + ortho * z)).transpose();
    }
    return out;
}

/// Monte Carlo KL E_alt[log f_alt - log f_nom] for skew-normal pairs.
inline double sn_kl_mc(const Vec& mu0, const Mat& s0, const Vec& xi0, const Vec& mu1, const Mat& s1, const Vec& xi1,
                       int count, unsigned seed) {
    const Mat y = sn_draws(mu1, s1, xi1, count, seed);
    long double acc = 0.0L;
    for (int i = 0; i < count; ++i) {
        const Vec yi = y.row(i).transpose();
        acc += sn_log_density(yi, mu1, s1, xi1) - sn_log_density(yi, mu0, s0, xi0);
    }
    return static_cast<double>(acc / count);
}

/// kNN estimator by full sorting of every distance list.
inline double knn_full_sort(const Mat& nominal, const Mat& alt, int k) {
    const auto big_k = alt.rows(), m = nominal.rows();
    const auto d = static_cast<double>(alt.cols());
    long double acc = 0.0L;
    for (Eigen::Index i = 0; i < big_k; ++i) {
        std::vector<double> within, across;
        for (Eigen::Index j = 0; j < big_k; ++j)
            if (j != i) within.push_back((alt.row(i) - alt.row(j)).norm());
        for (Eigen::Index j = 0; j < m; ++j) across.push_back((alt.row(i) - nominal.row(j)).norm());
        std::sort(within.begin(), within.end());
        std::sort(across.begin(), across.end());
        acc += std::log(static_cast<double>(m) * std::pow(across[k - 1], d) /
                        (static_cast<double>(big_k - 1) * std::pow(within[k - 1], d)));
    }
    return static_cast<double>(acc / big_k);
}

/// theta for a two-point sample with payoff gap delta at KL level eta < log 2:
/// invert KL = log 2 - H(pi) for the mass pi > 1/2 on the lower payoff by bisection.
inline double two_point_theta(double delta, double eta) {
    auto kl = [](double p) { return std::log(2.0) + p * std::log(p) + (1 - p) * std::log(1 - p); };
    double lo = 0.5, hi = 1.0;
    for (int i = 0; i < 200; ++i) {
        const double mid = 0.5 * (lo + hi);
        (kl(mid) < eta ? lo : hi) = mid;
    }
    const double p = 0.5 * (lo + hi);
    return delta / std::log(p / (1 - p));
}

/// Per-period closed form from explicit inverses.
inline Vec closed_form_u(const Mat& sigma, double kappa, const Vec& x) {
    const Mat inv = sigma.inverse();
    const Vec one = Vec::Ones(x.size());
    const double a = one.dot(inv * one), b = one.dot(inv * x), h = x.dot(inv * x);
    const double g = h - b * b / a;
    const double s = std::sqrt((1.0 / a) / (1.0 - g / (kappa * kappa)));
    return (s / kappa) * (inv * x - b * inv * one / a) + inv * one / a;
}

} // namespace oracle
