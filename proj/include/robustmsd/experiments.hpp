#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "core.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "skew_normal.hpp"
#include "solver.hpp"

namespace robustmsd {

enum class ScenarioKind { GaussianScaledMean, SkewNormal };

inline std::string_view to_string(ScenarioKind kind) noexcept {
    return kind == ScenarioKind::GaussianScaledMean ? "gaussian" : "skew-normal";
}

/// Worst-case alternative for the comparison studies. Gaussian: N(gamma mu, Sigma).
/// Skew-normal: SN(mu, Sigma, xi_bar) with xi_bar derived from beta.
struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::GaussianScaledMean;
    double eta = 0.0;
    double gamma = std::numeric_limits<double>::quiet_NaN();
    double beta = std::numeric_limits<double>::quiet_NaN();
    Vector xi_bar;

    static ScenarioSpec gaussian(double eta, double gamma) {
        ScenarioSpec s;
        s.kind = ScenarioKind::GaussianScaledMean;
        s.eta = eta;
        s.gamma = gamma;
        s.validate();
        return s;
    }

    static ScenarioSpec skew_normal(double eta, double beta, Vector xi_bar) {
        ScenarioSpec s;
        s.kind = ScenarioKind::SkewNormal;
        s.eta = eta;
        s.beta = beta;
        s.xi_bar = std::move(xi_bar);
        s.validate();
        return s;
    }

    void validate() const {
        detail::require(eta >= 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "scenario eta must be nonnegative");
        if (kind == ScenarioKind::GaussianScaledMean) {
            detail::require(std::isfinite(gamma) && std::isnan(beta) && xi_bar.size() == 0, ErrorKind::InvalidArgument,
                            "gaussian scenario takes gamma only");
        } else {
            detail::require(std::isnan(gamma) && std::isfinite(beta) && xi_bar.size() > 0, ErrorKind::InvalidArgument,
                            "skew-normal scenario takes beta and xi_bar only");
        }
    }
};

/// q = mu^T Sigma^-1 mu, the only model quantity the gaussian scenario depends on.
inline double mean_precision(const Vector& mu, const Matrix& sigma) {
    detail::require(mu.size() == sigma.rows(), ErrorKind::DimensionMismatch, "mean and covariance dimensions differ");
    return mu.dot(numerics::cholesky(sigma).solve(mu));
}

/// gamma = 1 - sqrt(2 eta / q), the branch with gamma <= 1.
inline double gamma_for_eta(double q, double eta) {
    detail::require(eta >= 0.0 && std::isfinite(eta), ErrorKind::InvalidArgument, "eta must be nonnegative");
    if (eta == 0.0) return 1.0;
    if (!(q > 0.0)) throw Error(ErrorKind::UnreachableRadius, "a zero mean cannot be shifted to a positive KL radius");
    return 1.0 - std::sqrt(2.0 * eta / q);
}

inline double gamma_for_eta(const Vector& mu, const Matrix& sigma, double eta) {
    return gamma_for_eta(mean_precision(mu, sigma), eta);
}

/// eta = (1 - gamma)^2 q / 2
inline double eta_for_gamma(double q, double gamma) { return 0.5 * (1.0 - gamma) * (1.0 - gamma) * q; }

/// q implied by one (eta, gamma) pair.
inline double calibrate_mean_precision(double eta, double gamma) {
    detail::require(gamma != 1.0, ErrorKind::InvalidArgument, "gamma = 1 carries no information about q");
    return 2.0 * eta / ((1.0 - gamma) * (1.0 - gamma));
}

/// Net-return alternative SN(mu, Sigma, xi_bar) with xi_bar = sqrt(pi/2) Sigma^{-1/2} mu beta/100,
/// so its mean is (1 + beta/100) mu.
inline SkewNormalParams xi_for_beta(const Vector& mu, const Matrix& sigma, double beta_pct) {
    detail::require(std::isfinite(beta_pct), ErrorKind::InvalidArgument, "beta must be finite");
    const auto root = numerics::symmetric_sqrt(sigma);
    const Vector xi = std::sqrt(std::numbers::pi / 2.0) * (root.inverse_root * mu) * (beta_pct / 100.0);
    if (!(xi.squaredNorm() < 1.0)) {
        throw Error(ErrorKind::BetaOutOfRange,
                    "beta = " + std::to_string(beta_pct) + "% needs xi^T xi = " + std::to_string(xi.squaredNorm()) +
                        " >= 1");
    }
    return SkewNormalParams(mu, sigma, xi);
}

/// Gross-return law of the scenario.
inline SkewNormalParams worst_case_law(const NominalModel& model, const ScenarioSpec& scenario) {
    scenario.validate();
    if (scenario.kind == ScenarioKind::GaussianScaledMean) {
        return SkewNormalParams::gaussian((scenario.gamma * model.mu()).array() + 1.0, model.sigma());
    }
    detail::require(scenario.xi_bar.size() == model.dim(), ErrorKind::DimensionMismatch, "xi_bar has the wrong length");
    return SkewNormalParams(model.gross_mean(), model.sigma(), scenario.xi_bar);
}

/// Gross-return draws from the scenario. Gaussian scenarios use the Cholesky sampler.
inline ReturnSample sample_scenario(const NominalModel& model, const ScenarioSpec& scenario, Eigen::Index count,
                                    std::uint64_t seed, Parallelism par = {}) {
    const auto law = worst_case_law(model, scenario);
    if (scenario.kind == ScenarioKind::GaussianScaledMean) return sample_mvn(law.loc(), law.scale(), count, seed, par);
    return sample_skew_normal(law, count, seed, par);
}

struct ComparisonReport {
    long outperform_count = 0;
    double outperform_pct = 0.0;
    double mean_wealth_robust = 0.0;
    double mean_wealth_nonrobust = 0.0;
    double sd_wealth_robust = 0.0;
    double sd_wealth_nonrobust = 0.0;
    double ratio_robust = 0.0;
    double ratio_nonrobust = 0.0;
    long path_count = 0;
    std::uint64_t seed = 0;

    double mean_difference() const { return mean_wealth_robust - mean_wealth_nonrobust; }
    double ratio_difference() const { return ratio_robust - ratio_nonrobust; }
};

/// Summary of paired terminal wealths; ties do not count as outperformance.
inline ComparisonReport summarize_paired(const Vector& robust, const Vector& nonrobust, double w0) {
    detail::require(robust.size() == nonrobust.size() && robust.size() >= 2, ErrorKind::DimensionMismatch,
                    "need at least two paired wealth values");
    ComparisonReport r;
    r.path_count = static_cast<long>(robust.size());
    r.outperform_count = static_cast<long>((robust.array() > nonrobust.array()).count());
    r.outperform_pct = 100.0 * static_cast<double>(r.outperform_count) / static_cast<double>(r.path_count);
    r.mean_wealth_robust = numerics::mean(numerics::as_span(robust));
    r.mean_wealth_nonrobust = numerics::mean(numerics::as_span(nonrobust));
    r.sd_wealth_robust = numerics::stdev(numerics::as_span(robust));
    r.sd_wealth_nonrobust = numerics::stdev(numerics::as_span(nonrobust));
    r.ratio_robust = (r.mean_wealth_robust - w0) / r.sd_wealth_robust;
    r.ratio_nonrobust = (r.mean_wealth_nonrobust - w0) / r.sd_wealth_nonrobust;
    return r;
}

/// Paired comparison on common random numbers: period n draws from substream n of `seed`.
inline ComparisonReport compare_strategies(const Strategy& robust, const Strategy& nonrobust, const NominalModel& model,
                                           const ScenarioSpec& scenario, long path_count, std::uint64_t seed,
                                           double w0 = 1.0, Parallelism par = {}) {
    detail::require(robust.horizon() == nonrobust.horizon() && robust.assets() == nonrobust.assets(),
                    ErrorKind::DimensionMismatch, "strategies differ in shape");
    detail::require(robust.assets() == model.dim(), ErrorKind::DimensionMismatch, "strategy and model asset counts differ");
    detail::require(path_count >= 2, ErrorKind::InvalidArgument, "need at least two paths");
    std::vector<Matrix> blocks;
    blocks.reserve(static_cast<std::size_t>(robust.horizon()));
    for (int n = 0; n < robust.horizon(); ++n) {
        blocks.push_back(sample_scenario(model, scenario, path_count, substream_seed(seed, static_cast<std::uint64_t>(n)), par)
                             .draws());
    }
    const auto wr = simulate_wealth_paths(robust, blocks, w0);
    const auto wn = simulate_wealth_paths(nonrobust, blocks, w0);
    auto report = summarize_paired(wr.terminal, wn.terminal, w0);
    report.seed = seed;
    return report;
}

/// Gaussian scenarios for a list of radii given the mean precision q.
inline std::vector<ScenarioSpec> gaussian_scenarios(double q, std::span<const double> etas) {
    std::vector<ScenarioSpec> out;
    for (double eta : etas) out.push_back(ScenarioSpec::gaussian(eta, gamma_for_eta(q, eta)));
    return out;
}

/// Skew-normal scenarios for a list of beta values; eta is the Monte Carlo KL from the nominal Gaussian.
inline std::vector<ScenarioSpec> skew_scenarios(const NominalModel& model, std::span<const double> betas,
                                                long kl_samples, std::uint64_t seed) {
    const auto nominal = SkewNormalParams::gaussian(model.mu(), model.sigma());
    std::vector<ScenarioSpec> out;
    for (std::size_t i = 0; i < betas.size(); ++i) {
        const auto alt = xi_for_beta(model.mu(), model.sigma(), betas[i]);
        const auto kl = kl_skew_normal(nominal, alt, kl_samples, substream_seed(seed, i));
        out.push_back(ScenarioSpec::skew_normal(kl.value, betas[i], alt.skew()));
    }
    return out;
}

struct SweepConfig {
    PortfolioSpec spec;
    double kappa = 3.0;
    /// Penalty products c eta kappa, held fixed across the sweep.
    std::vector<double> penalty;
    long mc_samples = 200000;
    long path_count = 100000;
    std::uint64_t seed = 0;
    Parallelism par;
    PeriodOptions solver;
};

struct SweepRow {
    ScenarioSpec scenario;
    ComparisonReport report;
    HorizonSolution robust;
};

struct SweepResult {
    HorizonSolution nonrobust;
    std::vector<SweepRow> rows;
};

/// One non-robust solve and one robust solve per scenario on a shared nominal
/// sample (substream 0), all compared on the same path seed (substream 1).
inline SweepResult run_sweep(const NominalModel& model, const SweepConfig& cfg, std::span<const ScenarioSpec> scenarios) {
    cfg.spec.validate();
    const auto sample = nominal_sample(model, cfg.mc_samples, substream_seed(cfg.seed, 0), cfg.par);
    const auto base = RiskProfile::constant(cfg.spec.horizon, cfg.kappa, 0.0, cfg.penalty);
    SweepResult out;
    out.nonrobust = solve_horizon(cfg.spec, model, base, sample, SolveMode::NonRobust, cfg.solver);
    const Strategy nonrobust = out.nonrobust.strategy();
    const std::uint64_t path_seed = substream_seed(cfg.seed, 1);
    for (const auto& sc : scenarios) {
        const auto profile = RiskProfile::constant(cfg.spec.horizon, cfg.kappa, sc.eta, cfg.penalty);
        SweepRow row{sc, {}, solve_horizon(cfg.spec, model, profile, sample, SolveMode::Robust, cfg.solver)};
        row.report = compare_strategies(row.robust.strategy(), nonrobust, model, sc, cfg.path_count, path_seed,
                                        cfg.spec.initial_wealth, cfg.par);
        out.rows.push_back(std::move(row));
    }
    return out;
}

} // namespace robustmsd
