#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "experiments.hpp"
#include "io.hpp"
#include "modelrisk.hpp"
#include "solver.hpp"

namespace robustmsd::cli {

inline constexpr const char* kVersion = "0.1.0";

/// Exit status of a run.
enum ExitCode : int { Success = 0, Failure = 1, Abandon = 2 };

/// Everything a run depends on. Thread count is deliberately absent: it never changes results.
struct RunConfig {
    std::string command = "solve";
    std::string prices;          ///< optional price CSV; when set, mu/sigma come from its first fit_rows returns
    int fit_rows = 0;            ///< returns used to fit the nominal model; 0 = all (model-risk: all but the last 60)
    std::vector<double> mu = {0.0007, 0.0022, 0.0016};
    std::vector<std::vector<double>> sigma = {{3e-4, 1e-4, 1e-4}, {1e-4, 4e-4, 1e-4}, {1e-4, 1e-4, 3e-4}};
    int horizon = 5;
    double initial_wealth = 1.0;
    double kappa = 3.0;
    double eta = 0.05;
    std::vector<double> penalties = {7.5, 8.0, 8.5, 9.0};
    std::string scenario = "gaussian"; ///< gaussian | skew-normal
    std::vector<double> etas = {0.005, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5};
    std::vector<double> betas = {-78.30, -242.54, -334.61, -449.99, -523.30, -572.42, -604.20};
    double beta = -242.54;
    double mean_precision = 0.0; ///< q = mu^T Sigma^-1 mu; 0 = computed from the model
    long mc_samples = 200000;
    long path_count = 100000;
    long kl_samples = 200000;
    int repeats = 1000;
    int k = 5;
    long boot_count = 20000;
    double q = 0.95;
    int histogram_bins = 50;
    std::uint64_t seed = 0;
    std::string out = "out";

    void validate() const {
        static const std::vector<std::string> commands = {"solve", "compare", "sweep", "estimate-kl", "model-risk"};
        detail::require(std::find(commands.begin(), commands.end(), command) != commands.end(), ErrorKind::InvalidArgument,
                        "unknown command '" + command + "'");
        detail::require(scenario == "gaussian" || scenario == "skew-normal", ErrorKind::InvalidArgument,
                        "scenario must be gaussian or skew-normal");
        detail::require(mc_samples >= 2 && path_count >= 2 && kl_samples >= 1000 && repeats >= 1 && boot_count >= 1000 &&
                            histogram_bins >= 1,
                        ErrorKind::InvalidArgument, "counts must be positive (kl_samples and boot_count at least 1000)");
        detail::require(fit_rows >= 0, ErrorKind::InvalidArgument, "fit_rows must be nonnegative");
        detail::require(static_cast<int>(penalties.size()) == horizon - 1, ErrorKind::DimensionMismatch,
                        "need horizon - 1 penalty products");
        if (!prices.empty()) {
            detail::require(std::filesystem::exists(prices), ErrorKind::Io, "price file does not exist: " + prices);
        }
        PortfolioSpec{static_cast<int>(mu.size()), horizon, initial_wealth}.validate();
    }
};

inline void to_json(nlohmann::json& j, const RunConfig& c) {
    j = nlohmann::json{{"command", c.command},       {"prices", c.prices},       {"fit_rows", c.fit_rows},
                       {"mu", c.mu},                 {"sigma", c.sigma},         {"horizon", c.horizon},
                       {"initial_wealth", c.initial_wealth}, {"kappa", c.kappa}, {"eta", c.eta},
                       {"penalties", c.penalties},   {"scenario", c.scenario},   {"etas", c.etas},
                       {"betas", c.betas},           {"beta", c.beta},           {"mean_precision", c.mean_precision},
                       {"mc_samples", c.mc_samples}, {"path_count", c.path_count}, {"kl_samples", c.kl_samples},
                       {"repeats", c.repeats},       {"k", c.k},                 {"boot_count", c.boot_count},
                       {"q", c.q},                   {"histogram_bins", c.histogram_bins}, {"seed", c.seed},
                       {"out", c.out}};
}

inline void from_json(const nlohmann::json& j, RunConfig& c) {
    // absent keys keep their defaults
    auto get = [&j](const char* key, auto& field) {
        if (j.contains(key)) j.at(key).get_to(field);
    };
    get("command", c.command);
    get("prices", c.prices);
    get("fit_rows", c.fit_rows);
    get("mu", c.mu);
    get("sigma", c.sigma);
    get("horizon", c.horizon);
    get("initial_wealth", c.initial_wealth);
    get("kappa", c.kappa);
    get("eta", c.eta);
    get("penalties", c.penalties);
    get("scenario", c.scenario);
    get("etas", c.etas);
    get("betas", c.betas);
    get("beta", c.beta);
    get("mean_precision", c.mean_precision);
    get("mc_samples", c.mc_samples);
    get("path_count", c.path_count);
    get("kl_samples", c.kl_samples);
    get("repeats", c.repeats);
    get("k", c.k);
    get("boot_count", c.boot_count);
    get("q", c.q);
    get("histogram_bins", c.histogram_bins);
    get("seed", c.seed);
    get("out", c.out);
}

/// Loads a config file or a run manifest (whose "config" member is used).
inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path);
    detail::require(in.good(), ErrorKind::Io, "cannot open config " + path);
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "config " + path + ": " + e.what());
    }
    RunConfig c;
    try {
        from_json(j.contains("config") ? j.at("config") : j, c);
    } catch (const nlohmann::json::exception& e) {
        throw Error(ErrorKind::Parse, "config " + path + ": " + e.what());
    }
    return c;
}

namespace detail {

struct Inputs {
    NominalModel model;
    Matrix observed; ///< held-out net returns (model-risk and estimate-kl only)
};

inline NominalModel model_from_config(const RunConfig& c) {
    const auto d = static_cast<Eigen::Index>(c.mu.size());
    robustmsd::detail::require(static_cast<Eigen::Index>(c.sigma.size()) == d, ErrorKind::DimensionMismatch,
                               "sigma must be d x d");
    Vector mu(d);
    Matrix sigma(d, d);
    for (Eigen::Index i = 0; i < d; ++i) {
        mu[i] = c.mu[static_cast<std::size_t>(i)];
        robustmsd::detail::require(static_cast<Eigen::Index>(c.sigma[static_cast<std::size_t>(i)].size()) == d,
                                   ErrorKind::DimensionMismatch, "sigma must be d x d");
        for (Eigen::Index j = 0; j < d; ++j) sigma(i, j) = c.sigma[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    }
    return NominalModel(mu, sigma);
}

inline Inputs load_inputs(const RunConfig& c) {
    if (c.prices.empty()) {
        robustmsd::detail::require(c.command != "estimate-kl" && c.command != "model-risk", ErrorKind::InvalidArgument,
                                   c.command + " needs --prices");
        return {model_from_config(c), Matrix()};
    }
    const auto data = io::ingest_prices(c.prices);
    const auto m = data.returns.rows();
    const bool split = c.command == "estimate-kl" || c.command == "model-risk";
    Eigen::Index fit = c.fit_rows > 0 ? c.fit_rows : (split ? m - 60 : m);
    robustmsd::detail::require(fit >= 2 && fit <= m, ErrorKind::InvalidArgument,
                               "fit_rows must leave at least two fitting rows within the " + std::to_string(m) + " returns");
    const auto stats = numerics::sample_mean_cov(data.returns.topRows(fit));
    Matrix observed;
    if (split) {
        robustmsd::detail::require(fit < m, ErrorKind::InvalidArgument, "no held-out rows after fit_rows");
        observed = data.returns.bottomRows(m - fit);
    }
    return {NominalModel(stats.mean, stats.cov), observed};
}

inline PortfolioSpec spec_of(const RunConfig& c, const NominalModel& model) {
    return {static_cast<int>(model.dim()), c.horizon, c.initial_wealth};
}

inline io::Table solution_table(const HorizonSolution& sol) {
    io::Table t;
    const auto d = sol.periods.front().u.size();
    t.header = {"period"};
    for (Eigen::Index j = 0; j < d; ++j) t.header.push_back("u_" + std::to_string(j + 1));
    for (const char* h : {"theta", "G", "S", "a", "b", "h", "g", "kl_achieved", "p_positive", "accepted"}) t.header.push_back(h);
    for (std::size_t n = 0; n < sol.periods.size(); ++n) {
        const auto& p = sol.periods[n];
        std::vector<std::string> row = {std::to_string(n)};
        for (Eigen::Index j = 0; j < d; ++j) row.push_back(io::fmt_exact(p.u[j]));
        for (double v : {p.theta, p.G, p.S, p.a, p.b, p.h, p.g, p.kl_achieved}) row.push_back(io::fmt_exact(v));
        row.push_back(io::fmt_exact(sol.positivity_probs[static_cast<Eigen::Index>(n)]));
        row.push_back(sol.accepted ? "1" : "0");
        t.add(std::move(row));
    }
    return t;
}

/// Leading scenario columns: gamma,eta for gaussian rows; beta,xi_1..xi_d,eta for skew rows.
inline std::vector<std::string> scenario_header(const ScenarioSpec& s, Eigen::Index d) {
    if (s.kind == ScenarioKind::GaussianScaledMean) return {"gamma", "eta"};
    std::vector<std::string> h = {"beta_pct"};
    for (Eigen::Index j = 0; j < d; ++j) h.push_back("xi_" + std::to_string(j + 1));
    h.push_back("eta");
    return h;
}

inline std::vector<std::string> scenario_cells(const ScenarioSpec& s) {
    if (s.kind == ScenarioKind::GaussianScaledMean) return {io::fmt(s.gamma, 4), io::fmt(s.eta, 4)};
    std::vector<std::string> c = {io::fmt(s.beta, 2)};
    for (Eigen::Index j = 0; j < s.xi_bar.size(); ++j) c.push_back(io::fmt(s.xi_bar[j], 4));
    c.push_back(io::fmt(s.eta, 4));
    return c;
}

/// Outperformance table (count, percent) and wealth table (means, ratios, differences).
inline std::pair<io::Table, io::Table> comparison_tables(const std::vector<ScenarioSpec>& scenarios,
                                                         const std::vector<ComparisonReport>& reports, Eigen::Index d) {
    io::Table outperf, wealth;
    outperf.header = scenario_header(scenarios.front(), d);
    wealth.header = outperf.header;
    for (const char* h : {"outperform_count", "outperform_pct"}) outperf.header.push_back(h);
    for (const char* h : {"mean_robust", "mean_nonrobust", "mean_difference", "ratio_robust", "ratio_nonrobust",
                          "ratio_difference"}) {
        wealth.header.push_back(h);
    }
    for (std::size_t i = 0; i < scenarios.size(); ++i) {
        const auto& r = reports[i];
        auto a = scenario_cells(scenarios[i]);
        a.push_back(std::to_string(r.outperform_count));
        a.push_back(io::fmt(r.outperform_pct, 4));
        outperf.add(std::move(a));
        auto b = scenario_cells(scenarios[i]);
        for (double v : {r.mean_wealth_robust, r.mean_wealth_nonrobust, r.mean_difference(), r.ratio_robust,
                         r.ratio_nonrobust, r.ratio_difference()}) {
            b.push_back(io::fmt(v, 6));
        }
        wealth.add(std::move(b));
    }
    return {outperf, wealth};
}

inline ScenarioSpec single_scenario(const RunConfig& c, const NominalModel& model) {
    if (c.scenario == "gaussian") {
        const double q = c.mean_precision > 0.0 ? c.mean_precision : mean_precision(model.mu(), model.sigma());
        return ScenarioSpec::gaussian(c.eta, gamma_for_eta(q, c.eta));
    }
    const std::vector<double> betas = {c.beta};
    return skew_scenarios(model, betas, c.kl_samples, substream_seed(c.seed, 3)).front();
}

class Writer {
public:
    explicit Writer(std::string dir) : dir_(std::move(dir)) { std::filesystem::create_directories(dir_); }

    void write(const std::string& name, const std::string& text) {
        io::write_text((std::filesystem::path(dir_) / name).string(), text);
        files_.push_back(name);
    }
    void write(const std::string& name, const io::Table& t) { write(name, t.str()); }

    const std::vector<std::string>& files() const { return files_; }
    const std::string& dir() const { return dir_; }

private:
    std::string dir_;
    std::vector<std::string> files_;
};

} // namespace detail

/// Executes one command and writes its artifacts plus manifest.json into config.out.
/// Returns Abandon when the positivity gate rejects the robust strategy.
inline int run(const RunConfig& config, Parallelism par = {}) {
    config.validate();
    const auto inputs = detail::load_inputs(config);
    const auto& model = inputs.model;
    const auto spec = detail::spec_of(config, model);
    detail::Writer out(config.out);
    int status = Success;
    nlohmann::json summary;

    PeriodOptions solver_opt;
    solver_opt.check_uniqueness = true;

    if (config.command == "solve" || config.command == "compare") {
        const auto sample = nominal_sample(model, config.mc_samples, substream_seed(config.seed, 0), par);
        const auto robust_profile = RiskProfile::constant(config.horizon, config.kappa, config.eta, config.penalties);
        const auto plain_profile = RiskProfile::constant(config.horizon, config.kappa, 0.0, config.penalties);
        const auto robust = solve_horizon(spec, model, robust_profile, sample, SolveMode::Robust, solver_opt);
        const auto nonrobust = solve_horizon(spec, model, plain_profile, sample, SolveMode::NonRobust, solver_opt);
        out.write("solution_robust.csv", detail::solution_table(robust));
        out.write("solution_nonrobust.csv", detail::solution_table(nonrobust));
        bool multiple = false;
        for (const auto& p : robust.periods) multiple = multiple || p.multiple_solutions;
        summary["value_robust"] = robust.value_at_w0;
        summary["value_nonrobust"] = nonrobust.value_at_w0;
        summary["accepted"] = robust.accepted;
        summary["multiple_solutions_warning"] = multiple;
        if (!robust.accepted) status = Abandon;
        if (config.command == "compare") {
            const auto sc = detail::single_scenario(config, model);
            const auto report = compare_strategies(robust.strategy(), nonrobust.strategy(), model, sc, config.path_count,
                                                   substream_seed(config.seed, 1), config.initial_wealth, par);
            const auto [t1, t2] = detail::comparison_tables({sc}, {report}, model.dim());
            out.write("comparison_outperformance.csv", t1);
            out.write("comparison_wealth.csv", t2);
        }
    } else if (config.command == "sweep") {
        SweepConfig cfg;
        cfg.spec = spec;
        cfg.kappa = config.kappa;
        cfg.penalty = config.penalties;
        cfg.mc_samples = config.mc_samples;
        cfg.path_count = config.path_count;
        cfg.seed = config.seed;
        cfg.par = par;
        std::vector<ScenarioSpec> scenarios;
        if (config.scenario == "gaussian") {
            const double q = config.mean_precision > 0.0 ? config.mean_precision : mean_precision(model.mu(), model.sigma());
            scenarios = gaussian_scenarios(q, config.etas);
        } else {
            scenarios = skew_scenarios(model, config.betas, config.kl_samples, substream_seed(config.seed, 3));
        }
        const auto res = run_sweep(model, cfg, scenarios);
        std::vector<ComparisonReport> reports;
        for (const auto& r : res.rows) reports.push_back(r.report);
        const auto [t1, t2] = detail::comparison_tables(scenarios, reports, model.dim());
        out.write("table_outperformance.csv", t1);
        out.write("table_wealth.csv", t2);
        io::Table f1, f2, f3;
        f1.header = {"eta", "outperform_pct"};
        f2.header = {"eta", "mean_robust", "mean_nonrobust"};
        f3.header = {"eta", "ratio_robust", "ratio_nonrobust"};
        for (std::size_t i = 0; i < scenarios.size(); ++i) {
            const auto& r = reports[i];
            const auto eta = io::fmt(scenarios[i].eta, 4);
            f1.add({eta, io::fmt(r.outperform_pct, 4)});
            f2.add({eta, io::fmt(r.mean_wealth_robust, 6), io::fmt(r.mean_wealth_nonrobust, 6)});
            f3.add({eta, io::fmt(r.ratio_robust, 6), io::fmt(r.ratio_nonrobust, 6)});
        }
        out.write("figure_outperformance.csv", f1);
        out.write("figure_mean_wealth.csv", f2);
        out.write("figure_ratio.csv", f3);
        bool all_accepted = true;
        for (const auto& r : res.rows) all_accepted = all_accepted && r.robust.accepted;
        summary["accepted"] = all_accepted;
    } else if (config.command == "estimate-kl") {
        const KnnConfig knn{config.k, config.repeats};
        const auto est = estimate_divergence_repeated(model.mu(), model.sigma(), inputs.observed, knn,
                                                      substream_seed(config.seed, 0), par);
        io::Table t;
        t.header = {"repeat", "estimate", "kept"};
        for (std::size_t r = 0; r < est.estimates.size(); ++r) {
            t.add({std::to_string(r), io::fmt_exact(est.estimates[r]), est.estimates[r] > 0.0 ? "1" : "0"});
        }
        out.write("divergence_repeats.csv", t);
        summary["estimated_eta"] = est.eta;
        summary["kept"] = est.kept;
        summary["repeats"] = est.repeats;
        summary["floored_distance_warning"] = est.floored_distance;
    } else {
        ModelRiskConfig cfg;
        cfg.spec = spec;
        cfg.kappa = config.kappa;
        cfg.penalty = config.penalties;
        cfg.knn = {config.k, config.repeats};
        cfg.mc_samples = config.mc_samples;
        cfg.boot_count = config.boot_count;
        cfg.q = config.q;
        cfg.seed = config.seed;
        cfg.par = par;
        cfg.solver = solver_opt;
        // quantify_model_risk refits on the same rows load_inputs used
        const auto data = io::ingest_prices(config.prices);
        const auto fit = data.returns.rows() - inputs.observed.rows();
        const auto res = quantify_model_risk(data.returns.topRows(fit), inputs.observed, cfg);
        out.write("solution_robust.csv", detail::solution_table(res.robust));
        out.write("solution_nonrobust.csv", detail::solution_table(res.nonrobust));
        io::Table t;
        t.header = {"estimated_eta", "model_risk", "q", "boot_count"};
        t.add({io::fmt_exact(res.risk.estimated_eta), io::fmt(res.risk.model_risk, 6), io::fmt(res.risk.confidence, 4),
               std::to_string(res.risk.diffs.size())});
        out.write("model_risk.csv", t);
        const auto hist = histogram(numerics::as_span(res.risk.diffs), config.histogram_bins);
        io::Table h;
        h.header = {"bin_lo", "bin_hi", "count"};
        for (int b = 0; b < config.histogram_bins; ++b) {
            h.add({io::fmt(hist.edges[b], 6), io::fmt(hist.edges[b + 1], 6), std::to_string(hist.counts[b])});
        }
        out.write("figure_diff_histogram.csv", h);
        summary["estimated_eta"] = res.risk.estimated_eta;
        summary["model_risk"] = res.risk.model_risk;
        summary["accepted"] = res.robust.accepted;
        if (!res.robust.accepted) status = Abandon;
    }

    summary["status"] = status;
    out.write("summary.json", summary.dump(2) + "\n");
    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["config"] = config;
    manifest["seeds"] = {{"master", config.seed},
                         {"solver_sample", substream_seed(config.seed, 0)},
                         {"paths", substream_seed(config.seed, 1)}};
    manifest["outputs"] = out.files();
    io::write_text((std::filesystem::path(out.dir()) / "manifest.json").string(), manifest.dump(2) + "\n");
    return status;
}

/// Structured error record for a failed run.
inline nlohmann::json error_record(const std::exception& e) {
    nlohmann::json j;
    if (const auto* err = dynamic_cast<const Error*>(&e)) {
        j["kind"] = std::string(to_string(err->kind()));
        j["message"] = err->detail();
    } else {
        j["kind"] = "Internal";
        j["message"] = e.what();
    }
    return j;
}

} // namespace robustmsd::cli
