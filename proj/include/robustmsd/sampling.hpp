#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "skew_normal.hpp"

namespace robustmsd {

namespace detail {

/// Fills `count` rows block by block; block b draws from substream b of `seed`.
template <class RowFn>
Matrix generate_rows(Eigen::Index count, Eigen::Index dim, std::uint64_t seed, Parallelism par, RowFn&& row_fn) {
    detail::require(count >= 1, ErrorKind::InvalidArgument, "sample count must be positive");
    Matrix out(count, dim);
    const auto total = static_cast<std::size_t>(count);
    const std::size_t blocks = (total + kBlockRows - 1) / kBlockRows;
    for_each_block(blocks, par, [&](std::size_t b) {
        NormalSource normal(substream_seed(seed, b));
        Vector row(dim);
        const std::size_t end = std::min(total, (b + 1) * kBlockRows);
        for (std::size_t i = b * kBlockRows; i < end; ++i) {
            row_fn(normal, row);
            out.row(static_cast<Eigen::Index>(i)) = row.transpose();
        }
    });
    return out;
}

} // namespace detail

/// Draws mu + L z with z standard normal and L the Cholesky factor of sigma.
inline ReturnSample sample_mvn(const Vector& mu, const Matrix& sigma, Eigen::Index count, std::uint64_t seed,
                               Parallelism par = {}) {
    detail::require(mu.size() == sigma.rows(), ErrorKind::DimensionMismatch, "mean and covariance dimensions differ");
    const auto chol = numerics::cholesky(sigma);
    const Matrix& lower = chol.lower();
    const auto d = mu.size();
    Matrix draws = detail::generate_rows(count, d, seed, par, [&](NormalSource& normal, Vector& row) {
        Vector z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = normal();
        row.noalias() = mu + lower.triangularView<Eigen::Lower>() * z;
    });
    return ReturnSample(std::move(draws), seed);
}

/// Nominal gross returns 1 + r with r ~ N(mu, Sigma).
inline ReturnSample nominal_sample(const NominalModel& model, Eigen::Index count, std::uint64_t seed,
                                   Parallelism par = {}) {
    return sample_mvn(model.gross_mean(), model.sigma(), count, seed, par);
}

/// Exact draws from SN_d through the stochastic representation.
inline ReturnSample sample_skew_normal(const SkewNormalParams& params, Eigen::Index count, std::uint64_t seed,
                                       Parallelism par = {}) {
    const auto d = params.dim();
    const Matrix& root = params.scale_root();
    const Matrix ortho = params.orthogonal_root();
    const Vector& skew = params.skew();
    const Vector& loc = params.loc();
    Matrix draws = detail::generate_rows(count, d, seed, par, [&](NormalSource& normal, Vector& row) {
        const double z0 = std::abs(normal());
        Vector z(d);
        for (Eigen::Index j = 0; j < d; ++j) z[j] = normal();
        const Vector ystar = skew * z0 + ortho * z;
        row.noalias() = loc + root * ystar;
    });
    return ReturnSample(std::move(draws), seed);
}

struct WealthSimulation {
    Vector terminal;
    /// M x (N + 1) wealth paths; empty unless requested.
    Matrix paths;
};

/// Path i uses row i of every per-period block; blocks hold gross returns.
inline WealthSimulation simulate_wealth_paths(const Strategy& strategy, std::span<const Matrix> period_draws, double w0,
                                              bool keep_paths = false) {
    detail::require(static_cast<int>(period_draws.size()) == strategy.horizon(), ErrorKind::DimensionMismatch,
                    "need one return block per period");
    const Eigen::Index m = period_draws.empty() ? 0 : period_draws.front().rows();
    for (const auto& block : period_draws) {
        detail::require(block.rows() == m && block.cols() == strategy.assets(), ErrorKind::DimensionMismatch,
                        "return blocks must share the path count and asset count");
    }
    WealthSimulation out{Vector::Constant(m, w0), Matrix()};
    if (keep_paths) {
        out.paths.resize(m, strategy.horizon() + 1);
        out.paths.col(0).setConstant(w0);
    }
    for (int n = 0; n < strategy.horizon(); ++n) {
        const Vector growth = period_draws[static_cast<std::size_t>(n)] * strategy.period(n);
        out.terminal.array() *= growth.array();
        if (keep_paths) out.paths.col(n + 1) = out.terminal;
    }
    return out;
}

/// Likelihood-ratio weights of the exponentially tilted measure, normalized to mean 1.
struct TiltedMeasure {
    Vector weights;
    double theta = 0.0;
    /// log E[exp(-R^T u / theta)] under the sample measure.
    double log_moment = 0.0;
};

/// Summary of the tilt exp(-p/theta) of a payoff sample p without materializing weights.
struct TiltStats {
    double log_moment = 0.0; ///< log mean exp(-p/theta)
    double kl = 0.0;         ///< mean(w log w)
    double max_z = 0.0;      ///< max_i(-p_i/theta)
    double log_norm = 0.0;   ///< log_moment - max_z, kept separately for precision
};

namespace detail {

inline void require_tilt_finite(double theta, double value) {
    if (!std::isfinite(value)) {
        throw Error(ErrorKind::TiltOverflow, "exponential tilt overflows at theta = " + std::to_string(theta));
    }
}

} // namespace detail

inline TiltStats tilt_stats(std::span<const double> payoff, double theta) {
    detail::require(theta > 0.0, ErrorKind::InvalidArgument, "tilt parameter theta must be positive");
    detail::require(!payoff.empty(), ErrorKind::InvalidArgument, "empty payoff sample");
    const double inv = 1.0 / theta;
    double zmax = -std::numeric_limits<double>::infinity();
    for (double p : payoff) zmax = std::max(zmax, -p * inv);
    detail::require_tilt_finite(theta, zmax);
    // Neumaier-compensated sums of e^{z - zmax} and e^{z - zmax}(z - zmax)
    double s = 0.0, cs = 0.0, t = 0.0, ct = 0.0;
    auto add = [](double& sum, double& comp, double x) {
        const double tmp = sum + x;
        comp += std::abs(sum) >= std::abs(x) ? (sum - tmp) + x : (x - tmp) + sum;
        sum = tmp;
    };
    for (double p : payoff) {
        const double zc = -p * inv - zmax;
        const double e = std::exp(zc);
        add(s, cs, e);
        add(t, ct, e * zc);
    }
    s += cs;
    t += ct;
    const double log_m = std::log(static_cast<double>(payoff.size()));
    TiltStats st;
    st.max_z = zmax;
    st.log_norm = std::log(s) - log_m;
    st.log_moment = zmax + st.log_norm;
    // mean(w log w) = sum_i pi_i log(M pi_i), pi = softmax(z)
    st.kl = std::max(0.0, t / s - std::log(s) + log_m);
    detail::require_tilt_finite(theta, st.log_moment);
    return st;
}

/// weights_i proportional to exp(-R_i^T u / theta), mean 1.
inline TiltedMeasure tilt_weights(const ReturnSample& sample, const Vector& u, double theta) {
    detail::require(u.size() == sample.dim(), ErrorKind::DimensionMismatch, "weights and sample dimensions differ");
    const Vector payoff = sample.draws() * u;
    const auto st = tilt_stats(numerics::as_span(payoff), theta);
    TiltedMeasure out;
    out.theta = theta;
    out.log_moment = st.log_moment;
    // w_i = exp(z_i - log mean exp(z))
    out.weights = (((-payoff.array() * (1.0 / theta)) - st.max_z) - st.log_norm).exp();
    detail::require(out.weights.allFinite(), ErrorKind::TiltOverflow,
                    "exponential tilt overflows at theta = " + std::to_string(theta));
    return out;
}

} // namespace robustmsd
