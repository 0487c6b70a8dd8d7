#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "core.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "sampling.hpp"

namespace robustmsd {

/// Optimal period-n decision and the scalars of the closed-form system.
struct PeriodSolution {
    Vector u;
    double theta = 0.0; ///< 0 for non-robust solves
    Vector X;           ///< tilted mean of R plus the discounted continuation term
    double a = 0.0;
    double b = 0.0;
    double h = 0.0;
    double g = 0.0;
    double S = 0.0;
    double G = 0.0;
    double kl_achieved = 0.0;
    int iterations = 0;
    bool multiple_solutions = false;
};

struct HorizonSolution {
    std::vector<PeriodSolution> periods;
    double value_at_w0 = 0.0;
    bool accepted = false;
    Vector positivity_probs;

    Strategy strategy() const {
        detail::require(!periods.empty(), ErrorKind::InvalidArgument, "empty horizon solution");
        Matrix w(static_cast<Eigen::Index>(periods.size()), periods.front().u.size());
        for (std::size_t n = 0; n < periods.size(); ++n) w.row(static_cast<Eigen::Index>(n)) = periods[n].u.transpose();
        return Strategy(std::move(w));
    }
};

enum class SolveMode { Robust, NonRobust };

struct PeriodOptions {
    double damping = 0.5;
    double weight_tol = 1e-9;
    double kl_tol = 1e-8;
    int max_iter = 500;
    /// Also iterate from equal weights and flag disagreement.
    bool check_uniqueness = false;
};

/// Result of the inner minimization over the KL ball for fixed u.
struct InnerSolution {
    TiltedMeasure measure;
    double kl = 0.0;
    /// -theta log E[exp(-R^T u / theta)] - eta theta
    double dual_value = 0.0;
};

namespace detail {

/// Largest KL reachable by tilting a finite sample: all mass on the minimum payoff.
inline double max_tilt_kl(std::span<const double> payoff) {
    const double pmin = *std::min_element(payoff.begin(), payoff.end());
    const auto ties = std::count(payoff.begin(), payoff.end(), pmin);
    return std::log(static_cast<double>(payoff.size()) / static_cast<double>(ties));
}

/// theta with KL(theta) = eta; KL is nonincreasing in theta, so a bracket
/// found by doubling/halving followed by Brent on log theta suffices.
inline double solve_theta(std::span<const double> payoff, double eta, double kl_tol, double theta_hint) {
    const double limit = max_tilt_kl(payoff);
    if (!(eta < limit)) {
        throw Error(ErrorKind::EtaTooLargeForSample,
                    "eta = " + std::to_string(eta) + " is not below the sample's reachable KL " + std::to_string(limit) +
                        "; use a larger Monte Carlo sample");
    }
    auto excess = [&](double log_theta) { return tilt_stats(payoff, std::exp(log_theta)).kl - eta; };

    double start = theta_hint;
    if (!(start > 0.0) || !std::isfinite(start)) start = numerics::stdev(payoff);
    double hi = std::log(start);
    double lo = hi;
    double f_hi = excess(hi);
    double f_lo = f_hi;
    for (int i = 0; f_hi > 0.0; ++i) {
        require(i < 2000, ErrorKind::NoConvergence, "could not bracket theta from above");
        lo = hi;
        f_lo = f_hi;
        hi += std::numbers::ln2;
        f_hi = excess(hi);
    }
    for (int i = 0; f_lo < 0.0; ++i) {
        require(i < 2000, ErrorKind::NoConvergence, "could not bracket theta from below");
        hi = lo;
        f_hi = f_lo;
        lo -= std::numbers::ln2;
        try {
            f_lo = excess(lo);
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::TiltOverflow) throw;
            throw Error(ErrorKind::EtaTooLargeForSample, "tilt overflows before reaching eta; " + e.detail());
        }
    }
    if (f_lo == 0.0) return std::exp(lo);
    if (f_hi == 0.0) return std::exp(hi);
    const auto root = numerics::brent_root(excess, lo, hi, 1e-14, 0.1 * kl_tol, 300);
    require(std::abs(root.fx) <= kl_tol, ErrorKind::NoConvergence,
            "KL binding residual " + std::to_string(root.fx) + " above tolerance");
    return std::exp(root.x);
}

/// The per-period closed form: u from X through a, b, h, g and S.
struct ClosedForm {
    Vector u;
    double a, b, h, g, S;
};

inline ClosedForm closed_form(const numerics::CholeskyFactor& chol, const Vector& ones_solved, double kappa,
                              const Vector& X) {
    const Vector sx = chol.solve(X);
    ClosedForm cf;
    cf.a = ones_solved.sum();
    cf.b = sx.sum();
    cf.h = X.dot(sx);
    cf.g = cf.h - cf.b * cf.b / cf.a;
    const double slack = 1.0 - cf.g / (kappa * kappa);
    if (!(slack > 0.0)) {
        throw Error(ErrorKind::KappaTooSmall, "1 - g/kappa^2 = " + std::to_string(slack) +
                                                  " is not positive; raise kappa above sqrt(g) = " +
                                                  std::to_string(std::sqrt(std::max(0.0, cf.g))));
    }
    cf.S = std::sqrt((1.0 / cf.a) / slack);
    cf.u = (cf.S / kappa) * (sx - (cf.b / cf.a) * ones_solved) + ones_solved / cf.a;
    // 1^T u = 1 holds algebraically; a visible residual means a bug upstream
    require(std::abs(cf.u.sum() - 1.0) <= 1e-9, ErrorKind::NonFinite, "budget identity violated in closed form");
    enforce_budget(cf.u);
    return cf;
}

inline Vector weighted_mean(const Matrix& draws, const Vector& weights) {
    return (draws.transpose() * weights) / static_cast<double>(draws.rows());
}

} // namespace detail

/// Minimizes E_Q[R^T u] over the KL ball of radius eta for fixed u by the
/// exponential tilt, with theta pinned by the binding constraint.
inline InnerSolution solve_inner(const ReturnSample& sample, const Vector& u, double eta, double kl_tol = 1e-8,
                                 double theta_hint = 0.0) {
    detail::require(eta > 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "solve_inner needs eta > 0");
    detail::require(u.size() == sample.dim(), ErrorKind::DimensionMismatch, "weights and sample dimensions differ");
    const Vector payoff = sample.draws() * u;
    const auto span = numerics::as_span(payoff);
    const double theta = detail::solve_theta(span, eta, kl_tol, theta_hint);
    const auto st = tilt_stats(span, theta);
    InnerSolution out;
    out.measure.theta = theta;
    out.measure.log_moment = st.log_moment;
    out.measure.weights = (((-payoff.array() * (1.0 / theta)) - st.max_z) - st.log_norm).exp();
    out.kl = st.kl;
    out.dual_value = -theta * st.log_moment - eta * theta;
    // finite-sample stand-in for E[exp(-2 R^T u / theta)] < infinity
    detail::require_tilt_finite(theta / 2.0, tilt_stats(span, theta / 2.0).log_moment);
    return out;
}

/// Period objective for fixed theta:
/// -theta log E[exp(-R^T u/theta)] + dG E[R]^T u - kappa sqrt(u^T Sigma u) - eta theta.
inline double dual_objective(const ReturnSample& sample, const Matrix& sigma, const Vector& u, double theta,
                             double kappa, double eta = 0.0, double discounted_g_next = 0.0) {
    const Vector payoff = sample.draws() * u;
    const auto st = tilt_stats(numerics::as_span(payoff), theta);
    const double mean_payoff = numerics::mean(numerics::as_span(payoff));
    return -theta * st.log_moment + discounted_g_next * mean_payoff - kappa * std::sqrt(u.dot(sigma * u)) - eta * theta;
}

/// Non-robust closed form: X is (1 + G_{n+1}) E[R] and G = X^T u - kappa S.
inline PeriodSolution solve_period_nonrobust(const Matrix& sigma, double kappa, const Vector& X) {
    detail::require(kappa > 0.0, ErrorKind::InvalidArgument, "kappa must be positive");
    detail::require(X.size() == sigma.rows(), ErrorKind::DimensionMismatch, "X and sigma dimensions differ");
    const auto chol = numerics::cholesky(sigma);
    const Vector ones_solved = chol.solve(Vector::Ones(X.size()).eval());
    const auto cf = detail::closed_form(chol, ones_solved, kappa, X);
    PeriodSolution sol;
    sol.u = cf.u;
    sol.X = X;
    sol.a = cf.a;
    sol.b = cf.b;
    sol.h = cf.h;
    sol.g = cf.g;
    sol.S = cf.S;
    sol.G = X.dot(cf.u) - kappa * cf.S;
    return sol;
}

namespace detail {

struct FixedPoint {
    Vector u;
    int iterations = 0;
    double theta = 0.0;
};

inline FixedPoint iterate_robust(const ReturnSample& sample, const numerics::CholeskyFactor& chol,
                                 const Vector& ones_solved, double kappa, double eta, double dg, const Vector& mean_r,
                                 Vector u, const PeriodOptions& opt) {
    double theta = 0.0;
    double resid = std::numeric_limits<double>::infinity();
    for (int it = 1; it <= opt.max_iter; ++it) {
        const auto inner = solve_inner(sample, u, eta, opt.kl_tol, theta);
        theta = inner.measure.theta;
        const Vector X = weighted_mean(sample.draws(), inner.measure.weights) + dg * mean_r;
        const auto cf = closed_form(chol, ones_solved, kappa, X);
        Vector next = (1.0 - opt.damping) * u + opt.damping * cf.u;
        enforce_budget(next);
        resid = (next - u).cwiseAbs().maxCoeff();
        u = std::move(next);
        if (resid < opt.weight_tol) return {std::move(u), it, theta};
    }
    throw Error(ErrorKind::NoConvergence, "fixed-point iteration stopped after " + std::to_string(opt.max_iter) +
                                              " iterations with residual " + std::to_string(resid));
}

} // namespace detail

/// Robust period solve: damped fixed point over (u, theta) starting from the
/// non-robust solution. eta = 0 dispatches to the closed form.
inline PeriodSolution solve_period(const ReturnSample& sample, const Matrix& sigma, double kappa, double eta,
                                   double discounted_g_next, const Vector& mean_r, const PeriodOptions& opt = {}) {
    detail::require(kappa > 0.0, ErrorKind::InvalidArgument, "kappa must be positive");
    detail::require(eta >= 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "eta must be nonnegative");
    detail::require(sample.dim() == sigma.rows() && mean_r.size() == sigma.rows(), ErrorKind::DimensionMismatch,
                    "sample, sigma and mean dimensions differ");
    detail::require(sample.size() >= sample.dim() + 1, ErrorKind::InvalidArgument, "sample needs at least d + 1 draws");
    detail::require(opt.damping > 0.0 && opt.damping <= 1.0, ErrorKind::InvalidArgument, "damping must lie in (0, 1]");

    const Vector x_plain = (1.0 + discounted_g_next) * mean_r;
    auto warm = solve_period_nonrobust(sigma, kappa, x_plain);
    if (eta == 0.0) return warm;

    const auto chol = numerics::cholesky(sigma);
    const Vector ones_solved = chol.solve(Vector::Ones(sigma.rows()).eval());
    auto fp = detail::iterate_robust(sample, chol, ones_solved, kappa, eta, discounted_g_next, mean_r, warm.u, opt);

    PeriodSolution sol;
    if (opt.check_uniqueness) {
        const auto d = sigma.rows();
        const auto alt = detail::iterate_robust(sample, chol, ones_solved, kappa, eta, discounted_g_next, mean_r,
                                                Vector::Constant(d, 1.0 / static_cast<double>(d)), opt);
        sol.multiple_solutions = (alt.u - fp.u).cwiseAbs().maxCoeff() > 1e-6;
    }

    const auto inner = solve_inner(sample, fp.u, eta, opt.kl_tol, fp.theta);
    const Vector X = detail::weighted_mean(sample.draws(), inner.measure.weights) + discounted_g_next * mean_r;
    const auto cf = detail::closed_form(chol, ones_solved, kappa, X);
    sol.u = fp.u;
    sol.theta = inner.measure.theta;
    sol.X = X;
    sol.a = cf.a;
    sol.b = cf.b;
    sol.h = cf.h;
    sol.g = cf.g;
    sol.S = cf.S;
    sol.kl_achieved = inner.kl;
    sol.iterations = fp.iterations;
    sol.G = inner.dual_value + discounted_g_next * mean_r.dot(fp.u) - kappa * cf.S;
    return sol;
}

struct PositivityCheck {
    bool accepted = false;
    Vector probs;
};

/// Positivity gate with W_n = 1: p_n = P(R^T u_n > 0) must exceed 1 - exp(-kappa_n) in every period.
inline PositivityCheck check_positivity(const Strategy& strategy, std::span<const ReturnSample> samples,
                                        const RiskProfile& profile) {
    const int horizon = strategy.horizon();
    detail::require(profile.horizon() == horizon, ErrorKind::DimensionMismatch, "profile and strategy horizons differ");
    detail::require(samples.size() == 1 || static_cast<int>(samples.size()) == horizon, ErrorKind::DimensionMismatch,
                    "need one sample or one per period");
    PositivityCheck out{true, Vector(horizon)};
    for (int n = 0; n < horizon; ++n) {
        const auto& sample = samples[samples.size() == 1 ? 0 : static_cast<std::size_t>(n)];
        const Vector payoff = sample.draws() * strategy.period(n);
        const auto positive = (payoff.array() > 0.0).count();
        out.probs[n] = static_cast<double>(positive) / static_cast<double>(payoff.size());
        if (!(out.probs[n] > 1.0 - std::exp(-profile.kappa()[n]))) out.accepted = false;
    }
    return out;
}

inline PositivityCheck check_positivity(const HorizonSolution& solution, std::span<const ReturnSample> samples,
                                        const RiskProfile& profile) {
    return check_positivity(solution.strategy(), samples, profile);
}

/// Backward induction n = N-1 .. 0. `samples` holds one sample shared by all
/// periods or one per period. Robust mode discounts G_{n+1} by exp(-penalty[n]);
/// non-robust mode uses discount 1.
inline HorizonSolution solve_horizon(const PortfolioSpec& spec, const NominalModel& model, const RiskProfile& profile,
                                     std::span<const ReturnSample> samples, SolveMode mode,
                                     const PeriodOptions& opt = {}) {
    spec.validate();
    detail::require(model.dim() == spec.assets, ErrorKind::DimensionMismatch, "model and spec asset counts differ");
    detail::require(profile.horizon() == spec.horizon, ErrorKind::DimensionMismatch, "profile and spec horizons differ");
    detail::require(samples.size() == 1 || static_cast<int>(samples.size()) == spec.horizon,
                    ErrorKind::DimensionMismatch, "need one sample or one per period");
    for (const auto& s : samples) {
        detail::require(s.dim() == spec.assets, ErrorKind::DimensionMismatch, "sample and spec asset counts differ");
    }

    HorizonSolution out;
    out.periods.resize(static_cast<std::size_t>(spec.horizon));
    double g_next = 0.0;
    for (int n = spec.horizon - 1; n >= 0; --n) {
        const auto& sample = samples[samples.size() == 1 ? 0 : static_cast<std::size_t>(n)];
        const double discount = mode == SolveMode::Robust ? profile.discount(n) : 1.0;
        const double dg = n + 1 < spec.horizon ? discount * g_next : 0.0;
        try {
            const Vector mean_r = sample.mean();
            auto& period = out.periods[static_cast<std::size_t>(n)];
            if (mode == SolveMode::Robust) {
                period = solve_period(sample, model.sigma(), profile.kappa()[n], profile.eta()[n], dg, mean_r, opt);
            } else {
                period = solve_period_nonrobust(model.sigma(), profile.kappa()[n], (1.0 + dg) * mean_r);
            }
            g_next = period.G;
        } catch (const Error& e) {
            throw Error(e.kind(), "period " + std::to_string(n) + ": " + e.detail());
        }
    }
    out.value_at_w0 = spec.initial_wealth * out.periods.front().G;
    const auto gate = check_positivity(out, samples, profile);
    out.accepted = gate.accepted;
    out.positivity_probs = gate.probs;
    return out;
}

inline HorizonSolution solve_horizon(const PortfolioSpec& spec, const NominalModel& model, const RiskProfile& profile,
                                     const ReturnSample& sample, SolveMode mode, const PeriodOptions& opt = {}) {
    return solve_horizon(spec, model, profile, std::span<const ReturnSample>(&sample, 1), mode, opt);
}

} // namespace robustmsd
