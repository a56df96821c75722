// qlsarma-cli: fit, forecast, simulate, montecarlo and residuals from the command line.

#include <cstdint>
#include <iostream>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"
#include "qlsarma/errors.hpp"
#include "qlsarma/io.hpp"

namespace {

std::string json_string(const std::string& s) {
    std::string out = "\"";
    for (char ch : s) {
        if (ch == '"' || ch == '\\') out += '\\';
        out += ch;
    }
    return out + "\"";
}

struct Common {
    std::optional<std::string> config;
    std::vector<std::string> sets;
    std::optional<std::string> kernel;
    std::vector<double> extras;
    std::optional<int> p, q, horizon, n, replications, threads, multistart;
    std::optional<double> tau_level;
    std::optional<std::uint64_t> seed, fit_seed;
    std::optional<std::string> output_dir;
};

void add_common(CLI::App* app, Common& c) {
    app->add_option("-c,--config", c.config, "JSON run configuration")->check(CLI::ExistingFile);
    app->add_option("--set", c.sets, "override a config key: key=value (dotted keys reach into objects)");
    app->add_option("--kernel", c.kernel, "kernel name, e.g. normal, t, pe, hp, slash, cn, ebs, ebs-t");
    app->add_option("--extras", c.extras, "kernel extras");
    app->add_option("-p,--p", c.p, "AR order");
    app->add_option("-q,--q", c.q, "MA order");
    app->add_option("--tau-level", c.tau_level, "quantile level");
    app->add_option("--horizon", c.horizon, "forecast horizon");
    app->add_option("--n", c.n, "simulated series length");
    app->add_option("--replications", c.replications, "Monte Carlo replications");
    app->add_option("--threads", c.threads, "Monte Carlo worker threads (0 = all cores)");
    app->add_option("--multistart", c.multistart, "optimizer starts per fit");
    app->add_option("--seed", c.seed, "simulation seed");
    app->add_option("--fit-seed", c.fit_seed, "multistart perturbation seed");
    app->add_option("-o,--output-dir", c.output_dir, "output directory (default: $QLSARMA_OUTPUT_DIR or .)");
}

std::vector<std::pair<std::string, std::string>> overrides(const Common& c) {
    std::vector<std::pair<std::string, std::string>> out;
    for (const auto& s : c.sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos || eq == 0) throw qlsarma::InputError("--set expects key=value, got '" + s + "'");
        out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    auto put = [&](const char* key, const auto& v) {
        if (v) out.emplace_back(key, std::to_string(*v));
    };
    if (c.kernel) out.emplace_back("kernel", json_string(*c.kernel));
    if (!c.extras.empty()) {
        std::string arr = "[";
        for (std::size_t i = 0; i < c.extras.size(); ++i) arr += (i ? "," : "") + qlsarma::io::format_number(c.extras[i]);
        out.emplace_back("extras", arr + "]");
    }
    put("p", c.p);
    put("q", c.q);
    if (c.tau_level) out.emplace_back("tau_level", qlsarma::io::format_number(*c.tau_level));
    put("horizon", c.horizon);
    put("n", c.n);
    put("replications", c.replications);
    put("threads", c.threads);
    put("fit.multistart", c.multistart);
    put("seed", c.seed);
    put("fit.seed", c.fit_seed);
    if (c.output_dir) out.emplace_back("output_dir", json_string(*c.output_dir));
    return out;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Quantile log-symmetric ARMAX models"};
    app.require_subcommand(1);
    Common common;
    std::string data, future;
    std::optional<std::string> actuals;

    auto* fit = app.add_subcommand("fit", "fit the model to a series file");
    add_common(fit, common);
    fit->add_option("-d,--data", data, "series file")->required();

    auto* fc = app.add_subcommand("forecast", "fit, then forecast with optional quantile band");
    add_common(fc, common);
    fc->add_option("-d,--data", data, "series file")->required();
    fc->add_option("-f,--future", future, "future covariates file")->required();
    fc->add_option("--actuals", actuals, "realized responses for the forecast metrics");

    auto* sim = app.add_subcommand("simulate", "draw a series from the configured truth");
    add_common(sim, common);

    auto* mc = app.add_subcommand("montecarlo", "bias, MSE and residual statistics over a design grid");
    add_common(mc, common);

    auto* res = app.add_subcommand("residuals", "generalized Cox-Snell and quantile residual diagnostics");
    add_common(res, common);
    res->add_option("-d,--data", data, "series file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 2;
    }

    try {
        const qlsarma::io::RunConfig cfg = qlsarma::io::load_config(common.config, overrides(common));
        qlsarma::io::Written written;
        if (fit->parsed())
            written = qlsarma::io::cmd_fit(cfg, data);
        else if (fc->parsed())
            written = qlsarma::io::cmd_forecast(cfg, data, future, actuals);
        else if (sim->parsed())
            written = qlsarma::io::cmd_simulate(cfg);
        else if (mc->parsed())
            written = qlsarma::io::cmd_montecarlo(cfg);
        else
            written = qlsarma::io::cmd_residuals(cfg, data);
        for (const auto& w : written) std::cout << w << '\n';
        return 0;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return qlsarma::io::exit_code_for(e);
    }
}
