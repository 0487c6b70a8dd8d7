#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "robustmsd/cli.hpp"

namespace {

struct Overrides {
    std::string config;
    std::optional<std::string> prices;
    std::optional<double> eta;
    std::optional<double> kappa;
    std::optional<std::vector<double>> penalties;
    std::optional<int> horizon;
    std::optional<long> mc_samples;
    std::optional<long> paths;
    std::optional<std::uint64_t> seed;
    std::optional<std::string> out;
    std::optional<double> q;
    std::optional<std::string> scenario;
    std::optional<double> beta;
    unsigned threads = 1;
};

void add_flags(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--config", o.config, "JSON config or a previous run's manifest.json");
    cmd->add_option("--prices", o.prices, "price CSV: date,asset1,asset2,...");
    cmd->add_option("--eta", o.eta, "KL radius");
    cmd->add_option("--kappa", o.kappa, "risk aversion");
    cmd->add_option("--penalties", o.penalties, "comma list of the N-1 penalty products c*eta*kappa")->delimiter(',');
    cmd->add_option("--horizon", o.horizon, "number of periods N");
    cmd->add_option("--mc-samples", o.mc_samples, "Monte Carlo sample size for the solver");
    cmd->add_option("--paths", o.paths, "simulated paths for comparisons");
    cmd->add_option("--seed", o.seed, "master seed (falls back to ROBUSTMSD_SEED)");
    cmd->add_option("--threads", o.threads, "worker threads; results do not depend on it")->check(CLI::PositiveNumber);
    cmd->add_option("--out", o.out, "output directory");
    cmd->add_option("--q", o.q, "confidence level for model risk");
    cmd->add_option("--scenario", o.scenario, "gaussian or skew-normal");
    cmd->add_option("--beta", o.beta, "mean shift in percent for the skew-normal scenario");
}

robustmsd::cli::RunConfig resolve(const std::string& command, const Overrides& o) {
    robustmsd::cli::RunConfig c = o.config.empty() ? robustmsd::cli::RunConfig{} : robustmsd::cli::load_config(o.config);
    c.command = command;
    if (o.prices) c.prices = *o.prices;
    if (o.eta) c.eta = *o.eta;
    if (o.kappa) c.kappa = *o.kappa;
    if (o.penalties) c.penalties = *o.penalties;
    if (o.horizon) c.horizon = *o.horizon;
    if (o.mc_samples) c.mc_samples = *o.mc_samples;
    if (o.paths) c.path_count = *o.paths;
    if (o.out) c.out = *o.out;
    if (o.q) c.q = *o.q;
    if (o.scenario) c.scenario = *o.scenario;
    if (o.beta) c.beta = *o.beta;
    if (o.seed) {
        c.seed = *o.seed;
    } else if (o.config.empty()) {
        if (const char* env = std::getenv("ROBUSTMSD_SEED")) c.seed = std::stoull(env);
    }
    return c;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Robust multi-period mean-standard-deviation portfolios under KL uncertainty"};
    app.require_subcommand(1);
    Overrides o;
    const std::vector<std::pair<std::string, std::string>> commands = {
        {"solve", "solve robust and non-robust strategies and run the positivity gate"},
        {"compare", "solve both strategies and compare them on worst-case paths"},
        {"sweep", "comparison tables over a list of radii or mean shifts"},
        {"estimate-kl", "repeated kNN divergence of held-out returns from the fitted normal"},
        {"model-risk", "bootstrap model-risk quantile on held-out returns"},
    };
    for (const auto& [name, help] : commands) add_flags(app.add_subcommand(name, help), o);
    CLI11_PARSE(app, argc, argv);

    const std::string command = app.get_subcommands().front()->get_name();
    robustmsd::cli::RunConfig config;
    try {
        config = resolve(command, o);
        const int status = robustmsd::cli::run(config, robustmsd::Parallelism{o.threads});
        if (status == robustmsd::cli::Abandon) {
            std::cerr << "positivity gate failed: abandon the investment\n";
        }
        return status;
    } catch (const std::exception& e) {
        const auto record = robustmsd::cli::error_record(e);
        std::cerr << record.dump() << "\n";
        try {
            std::filesystem::create_directories(config.out);
            robustmsd::io::write_text((std::filesystem::path(config.out) / "error.json").string(), record.dump(2) + "\n");
        } catch (const std::exception&) {
        }
        return robustmsd::cli::Failure;
    }
}
