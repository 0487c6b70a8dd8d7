#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "errors.hpp"
#include "numerics.hpp"

namespace robustmsd {

/// Asset count d, horizon N and initial wealth W0.
struct PortfolioSpec {
    int assets = 2;
    int horizon = 1;
    double initial_wealth = 1.0;

    void validate() const {
        detail::require(assets >= 2, ErrorKind::InvalidArgument, "need at least two assets");
        detail::require(horizon >= 1, ErrorKind::InvalidArgument, "horizon must be at least one period");
        detail::require(std::isfinite(initial_wealth) && initial_wealth > 0.0, ErrorKind::InvalidArgument,
                        "initial wealth must be positive");
    }
};

/// Mean and covariance of one-period net returns under the nominal measure.
/// Time-homogeneous; the Cholesky factor is computed once at construction.
class NominalModel {
public:
    NominalModel(Vector mu, Matrix sigma) : mu_(std::move(mu)), sigma_(std::move(sigma)) {
        detail::require(mu_.size() == sigma_.rows() && sigma_.rows() == sigma_.cols(), ErrorKind::DimensionMismatch,
                        "mean and covariance dimensions differ");
        detail::require(mu_.allFinite(), ErrorKind::NonFinite, "mean has non-finite entries");
        chol_ = numerics::cholesky(sigma_);
    }

    const Vector& mu() const noexcept { return mu_; }
    const Matrix& sigma() const noexcept { return sigma_; }
    const numerics::CholeskyFactor& chol() const noexcept { return chol_; }
    Eigen::Index dim() const noexcept { return mu_.size(); }

    /// Mean gross return 1 + mu.
    Vector gross_mean() const { return mu_.array() + 1.0; }

private:
    Vector mu_;
    Matrix sigma_;
    numerics::CholeskyFactor chol_;
};

/// Per-period risk aversions, KL radii and the products c_{n+1} eta_{n+1} kappa_{n+1}.
///
/// penalty[n] discounts G_{n+1} while period n is solved. A product with a zero
/// radius is zero, so penalty[n] is forced to 0 whenever eta[n+1] == 0.
class RiskProfile {
public:
    RiskProfile(Vector kappa, Vector eta, Vector penalty)
        : kappa_(std::move(kappa)), eta_(std::move(eta)), penalty_(std::move(penalty)) {
        const auto n = kappa_.size();
        detail::require(n >= 1, ErrorKind::InvalidArgument, "risk profile needs at least one period");
        detail::require(eta_.size() == n, ErrorKind::DimensionMismatch, "eta length differs from kappa length");
        detail::require(penalty_.size() == n - 1, ErrorKind::DimensionMismatch, "penalty length must be N - 1");
        detail::require(kappa_.allFinite() && (kappa_.array() > 0.0).all(), ErrorKind::InvalidArgument,
                        "risk aversions must be positive");
        detail::require(eta_.allFinite() && (eta_.array() >= 0.0).all(), ErrorKind::InvalidArgument,
                        "KL radii must be nonnegative");
        detail::require(penalty_.allFinite() && (penalty_.array() >= 0.0).all(), ErrorKind::InvalidArgument,
                        "penalty products must be nonnegative");
        for (Eigen::Index i = 0; i + 1 < n; ++i) {
            if (eta_[i + 1] == 0.0) penalty_[i] = 0.0;
        }
    }

    /// Constant kappa and eta over N periods with explicit penalty products.
    static RiskProfile constant(int horizon, double kappa, double eta, std::vector<double> penalty) {
        detail::require(horizon >= 1, ErrorKind::InvalidArgument, "horizon must be at least one period");
        detail::require(static_cast<int>(penalty.size()) == horizon - 1, ErrorKind::DimensionMismatch,
                        "need N - 1 penalty products");
        return RiskProfile(Vector::Constant(horizon, kappa), Vector::Constant(horizon, eta),
                           Eigen::Map<const Vector>(penalty.data(), static_cast<Eigen::Index>(penalty.size())));
    }

    /// Penalty products built from scaling constants: penalty[n] = c[n] eta[n+1] kappa[n+1].
    static RiskProfile from_scaling(Vector kappa, Vector eta, const Vector& scaling) {
        detail::require(kappa.size() >= 1 && scaling.size() == kappa.size() - 1, ErrorKind::DimensionMismatch,
                        "need N - 1 scaling constants");
        detail::require(eta.size() == kappa.size(), ErrorKind::DimensionMismatch, "eta length differs from kappa length");
        Vector pen(scaling.size());
        for (Eigen::Index i = 0; i < scaling.size(); ++i) pen[i] = scaling[i] * eta[i + 1] * kappa[i + 1];
        return RiskProfile(std::move(kappa), std::move(eta), std::move(pen));
    }

    int horizon() const noexcept { return static_cast<int>(kappa_.size()); }
    const Vector& kappa() const noexcept { return kappa_; }
    const Vector& eta() const noexcept { return eta_; }
    const Vector& penalty() const noexcept { return penalty_; }

    /// Factor exp(-penalty[n]) applied to G_{n+1} when period n is solved; 1 for the last period.
    double discount(int n) const {
        if (n + 1 >= horizon()) return 1.0;
        return std::exp(-penalty_[n]);
    }

private:
    Vector kappa_;
    Vector eta_;
    Vector penalty_;
};

inline constexpr double kBudgetTolerance = 1e-12;

/// Removes the budget residual 1 - 1^T u from the largest-magnitude weight.
inline void enforce_budget(Vector& u) {
    Eigen::Index idx = 0;
    u.cwiseAbs().maxCoeff(&idx);
    u[idx] += 1.0 - u.sum();
}

inline bool in_budget_set(const Vector& u, double tol = kBudgetTolerance) { return std::abs(u.sum() - 1.0) <= tol; }

/// N x d matrix of wealth fractions; row n is u_n.
class Strategy {
public:
    explicit Strategy(Matrix weights) : weights_(std::move(weights)) {
        detail::require(weights_.rows() >= 1 && weights_.cols() >= 2, ErrorKind::DimensionMismatch,
                        "strategy needs at least one period and two assets");
        detail::require(weights_.allFinite(), ErrorKind::NonFinite, "strategy has non-finite weights");
        for (Eigen::Index n = 0; n < weights_.rows(); ++n) {
            detail::require(in_budget_set(weights_.row(n).transpose()), ErrorKind::InvalidArgument,
                            "strategy row " + std::to_string(n) + " does not sum to one");
        }
    }

    const Matrix& weights() const noexcept { return weights_; }
    Vector period(int n) const { return weights_.row(n).transpose(); }
    int horizon() const noexcept { return static_cast<int>(weights_.rows()); }
    Eigen::Index assets() const noexcept { return weights_.cols(); }

private:
    Matrix weights_;
};

/// M x d gross returns R = 1 + r and the seed that produced them.
class ReturnSample {
public:
    ReturnSample(Matrix draws, std::uint64_t seed) : draws_(std::move(draws)), seed_(seed) {
        detail::require(draws_.rows() >= 2, ErrorKind::InvalidArgument, "return sample needs at least two draws");
        detail::require(draws_.allFinite(), ErrorKind::NonFinite, "return sample has non-finite entries");
    }

    /// Wraps net returns r as gross returns 1 + r.
    static ReturnSample from_net(const Matrix& net, std::uint64_t seed = 0) {
        return ReturnSample(net.array() + 1.0, seed);
    }

    const Matrix& draws() const noexcept { return draws_; }
    std::uint64_t seed() const noexcept { return seed_; }
    Eigen::Index size() const noexcept { return draws_.rows(); }
    Eigen::Index dim() const noexcept { return draws_.cols(); }

    Vector mean() const { return draws_.colwise().mean(); }

private:
    Matrix draws_;
    std::uint64_t seed_;
};

/// W_0 .. W_N along one return path.
struct WealthPath {
    Vector values;
};

/// Wealth along a single path; row n of `gross` is R_{n+1}.
inline WealthPath wealth_path(double w0, const Strategy& strategy, const Matrix& gross) {
    detail::require(gross.rows() == strategy.horizon() && gross.cols() == strategy.assets(),
                    ErrorKind::DimensionMismatch, "path returns do not match the strategy shape");
    WealthPath path{Vector(strategy.horizon() + 1)};
    path.values[0] = w0;
    for (int n = 0; n < strategy.horizon(); ++n) {
        double growth = 0.0;
        for (Eigen::Index j = 0; j < gross.cols(); ++j) growth += gross(n, j) * strategy.weights()(n, j);
        path.values[n + 1] = path.values[n] * growth;
    }
    return path;
}

/// Sample-average estimate of J_{0,W0}(u) under the nominal measure:
/// sum_n E[W_{n+1}] - kappa_n E[W_n] sqrt(u_n^T Sigma u_n), with E[W_n]
/// propagated multiplicatively through the sample mean growth.
inline double evaluate_objective(const PortfolioSpec& spec, const NominalModel& model, const RiskProfile& profile,
                                 const Strategy& strategy, const ReturnSample& sample) {
    spec.validate();
    detail::require(model.dim() == spec.assets && strategy.assets() == spec.assets && sample.dim() == spec.assets,
                    ErrorKind::DimensionMismatch, "asset counts differ");
    detail::require(strategy.horizon() == spec.horizon && profile.horizon() == spec.horizon,
                    ErrorKind::DimensionMismatch, "horizons differ");

    double wealth = spec.initial_wealth;
    double total = 0.0;
    for (int n = 0; n < spec.horizon; ++n) {
        const Vector u = strategy.period(n);
        const Vector payoff = sample.draws() * u;
        const double growth = numerics::mean(numerics::as_span(payoff));
        const double sd = std::sqrt(u.dot(model.sigma() * u));
        const double next = wealth * growth;
        total += next - profile.kappa()[n] * wealth * sd;
        wealth = next;
        detail::require(std::isfinite(total), ErrorKind::NonFinite,
                        "objective became non-finite in period " + std::to_string(n));
    }
    return total;
}

} // namespace robustmsd
