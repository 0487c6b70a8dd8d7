#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "core.hpp"
#include "divergence.hpp"
#include "errors.hpp"
#include "numerics.hpp"
#include "random.hpp"
#include "sampling.hpp"
#include "solver.hpp"

namespace robustmsd {

struct DivergenceEstimate {
    double eta = 0.0;     ///< mean of the positive repeats
    int kept = 0;         ///< repeats with a positive estimate
    int repeats = 0;
    bool floored_distance = false;
    std::vector<double> estimates; ///< every repeat, in repeat order
};

/// Repeated kNN estimate of the divergence of `observed` (K x d) from N(mu, sigma):
/// repeat r draws K nominal points from substream r of `seed`. Nonpositive
/// estimates are discarded before averaging.
inline DivergenceEstimate estimate_divergence_repeated(const Vector& mu, const Matrix& sigma, const Matrix& observed,
                                                       const KnnConfig& cfg, std::uint64_t seed, Parallelism par = {}) {
    cfg.validate();
    detail::require(observed.cols() == mu.size(), ErrorKind::DimensionMismatch, "observed data and mean dimensions differ");
    detail::require(observed.rows() >= cfg.k + 1, ErrorKind::InvalidArgument, "observed data needs more than k rows");
    const auto reps = static_cast<std::size_t>(cfg.repeats);
    std::vector<KnnEstimate> raw(reps);
    for_each_block(reps, par, [&](std::size_t r) {
        const auto nominal = sample_mvn(mu, sigma, observed.rows(), substream_seed(seed, r));
        raw[r] = kl_knn_estimate(nominal.draws(), observed, cfg.k);
    });

    DivergenceEstimate out;
    out.repeats = cfg.repeats;
    std::vector<double> positive;
    for (const auto& e : raw) {
        out.estimates.push_back(e.value);
        out.floored_distance = out.floored_distance || e.floored_distance;
        if (e.value > 0.0) positive.push_back(e.value);
    }
    if (positive.empty()) {
        throw Error(ErrorKind::AllEstimatesRejected,
                    "all " + std::to_string(cfg.repeats) + " kNN estimates were nonpositive; the samples are "
                    "indistinguishable at this size");
    }
    out.kept = static_cast<int>(positive.size());
    out.eta = numerics::mean(positive);
    return out;
}

struct ModelRiskResult {
    double estimated_eta = 0.0;
    double model_risk = 0.0;
    double confidence = 0.0;
    /// W_N(non-robust) - W_N(robust) per bootstrap path
    Vector diffs;
};

/// Bootstrap N-period paths from the rows of `observed` (gross returns) and report
/// model risk = -quantile_{1-q}(W_N(non-robust) - W_N(robust)). Period n draws
/// row indices from substream n of `seed`.
inline ModelRiskResult model_risk_quantile(const Strategy& robust, const Strategy& nonrobust, const Matrix& observed,
                                           long boot_count, double q, std::uint64_t seed, double w0 = 1.0,
                                           Parallelism par = {}) {
    detail::require(robust.horizon() == nonrobust.horizon() && robust.assets() == nonrobust.assets(),
                    ErrorKind::DimensionMismatch, "strategies differ in shape");
    detail::require(observed.cols() == robust.assets(), ErrorKind::DimensionMismatch, "data and strategy asset counts differ");
    detail::require(observed.rows() >= 1 && observed.allFinite(), ErrorKind::InvalidArgument, "observed data must be finite and nonempty");
    detail::require(boot_count >= 1000, ErrorKind::InvalidArgument, "bootstrap count must be at least 1000");
    detail::require(q > 0.0 && q < 1.0, ErrorKind::InvalidArgument, "confidence q must lie in (0, 1)");

    const auto rows = static_cast<std::size_t>(observed.rows());
    const auto total = static_cast<std::size_t>(boot_count);
    std::vector<Matrix> blocks;
    for (int n = 0; n < robust.horizon(); ++n) {
        Matrix block(boot_count, observed.cols());
        const std::uint64_t period_seed = substream_seed(seed, static_cast<std::uint64_t>(n));
        const std::size_t nblocks = (total + kBlockRows - 1) / kBlockRows;
        for_each_block(nblocks, par, [&](std::size_t b) {
            NormalSource rng(substream_seed(period_seed, b));
            const std::size_t end = std::min(total, (b + 1) * kBlockRows);
            for (std::size_t i = b * kBlockRows; i < end; ++i) {
                block.row(static_cast<Eigen::Index>(i)) = observed.row(static_cast<Eigen::Index>(rng.index(rows)));
            }
        });
        blocks.push_back(std::move(block));
    }
    const auto wr = simulate_wealth_paths(robust, blocks, w0);
    const auto wn = simulate_wealth_paths(nonrobust, blocks, w0);
    ModelRiskResult out;
    out.confidence = q;
    out.diffs = wn.terminal - wr.terminal;
    out.model_risk = -numerics::empirical_quantile(numerics::as_span(out.diffs), 1.0 - q);
    return out;
}

struct Histogram {
    Vector edges;  ///< bins + 1 increasing edges
    Eigen::VectorXi counts;
};

/// Equal-width histogram over [min, max]; the last bin is closed.
inline Histogram histogram(std::span<const double> xs, int bins) {
    detail::require(!xs.empty(), ErrorKind::InvalidArgument, "histogram of empty input");
    detail::require(bins >= 1, ErrorKind::InvalidArgument, "need at least one bin");
    const auto [lo_it, hi_it] = std::minmax_element(xs.begin(), xs.end());
    double lo = *lo_it, hi = *hi_it;
    if (hi == lo) {
        lo -= 0.5;
        hi += 0.5;
    }
    Histogram h{Vector::LinSpaced(bins + 1, lo, hi), Eigen::VectorXi::Zero(bins)};
    const double width = (hi - lo) / bins;
    for (double x : xs) {
        int idx = static_cast<int>((x - lo) / width);
        h.counts[std::clamp(idx, 0, bins - 1)] += 1;
    }
    return h;
}

struct ModelRiskConfig {
    PortfolioSpec spec;
    double kappa = 3.0;
    std::vector<double> penalty;
    KnnConfig knn;
    long mc_samples = 200000;
    long boot_count = 20000;
    double q = 0.95;
    std::uint64_t seed = 0;
    Parallelism par;
    PeriodOptions solver;
};

struct ModelRiskReport {
    DivergenceEstimate divergence;
    HorizonSolution robust;
    HorizonSolution nonrobust;
    ModelRiskResult risk;
};

/// Nominal N(mu~, Sigma~) fitted to `fit_net`; divergence of `observed_net` from it;
/// both strategies solved on one nominal sample; bootstrap model risk on `observed_net`.
inline ModelRiskReport quantify_model_risk(const Matrix& fit_net, const Matrix& observed_net, const ModelRiskConfig& cfg) {
    cfg.spec.validate();
    const auto stats = numerics::sample_mean_cov(fit_net);
    const NominalModel model(stats.mean, stats.cov);
    ModelRiskReport out;
    out.divergence = estimate_divergence_repeated(stats.mean, stats.cov, observed_net, cfg.knn, substream_seed(cfg.seed, 0), cfg.par);
    const auto sample = nominal_sample(model, cfg.mc_samples, substream_seed(cfg.seed, 1), cfg.par);
    const auto robust_profile = RiskProfile::constant(cfg.spec.horizon, cfg.kappa, out.divergence.eta, cfg.penalty);
    const auto nonrobust_profile = RiskProfile::constant(cfg.spec.horizon, cfg.kappa, 0.0, cfg.penalty);
    out.robust = solve_horizon(cfg.spec, model, robust_profile, sample, SolveMode::Robust, cfg.solver);
    out.nonrobust = solve_horizon(cfg.spec, model, nonrobust_profile, sample, SolveMode::NonRobust, cfg.solver);
    const Matrix gross = observed_net.array() + 1.0;
    out.risk = model_risk_quantile(out.robust.strategy(), out.nonrobust.strategy(), gross, cfg.boot_count, cfg.q,
                                   substream_seed(cfg.seed, 2), cfg.spec.initial_wealth, cfg.par);
    out.risk.estimated_eta = out.divergence.eta;
    return out;
}

} // namespace robustmsd
