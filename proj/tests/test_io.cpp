#include <chrono>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "doctest.h"
#include "qlsarma/errors.hpp"
#include "qlsarma/forecasting.hpp"
#include "qlsarma/io.hpp"
#include "qlsarma/simulation.hpp"
#include "test_support.hpp"

using namespace qlsarma;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("qlsarma_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

std::string message_of(const std::function<void()>& f) {
    try {
        f();
    } catch (const std::exception& e) {
        return e.what();
    }
    return "";
}

io::RunConfig sim_config(const fs::path& out) {
    return io::parse_config_text(R"({"kernel": "t", "extras": [4], "p": 1, "q": 1, "n": 150, "seed": 11,
        "truth": {"beta": [1.0, 0.7], "tau": [-1.5, 0.5], "phi": [0.6], "theta": [0.3]},
        "output_dir": ")" + out.string() + "\"}");
}

}  // namespace

TEST_CASE("number formatting round-trips") {
    Rng rng(3);
    for (int i = 0; i < 2000; ++i) {
        const double x = (rng.uniform() - 0.5) * std::pow(10.0, 40.0 * rng.uniform() - 20.0);
        const std::string s = io::format_number(x);
        CHECK(std::stod(s) == x);
    }
    CHECK(io::format_number(std::numeric_limits<double>::quiet_NaN()) == "NA");
    CHECK(io::format_number(0.1) == "0.1");
    CHECK(io::format_number(-173.508413167) == "-173.508413167");
}

TEST_CASE("CSV parsing") {
    std::istringstream in("date,y,\"a,b\"\n2020-01-01, 1.5 ,\"x\"\"y\"\n\n2020-01-02,2e-3,z\n");
    const io::CsvTable t = io::parse_csv(in, "mem");
    CHECK(t.header == std::vector<std::string>{"date", "y", "a,b"});
    REQUIRE(t.rows.size() == 2);
    CHECK(t.rows[0][2] == "x\"y");
    CHECK(t.number(0, 1) == 1.5);
    CHECK(t.number(1, 1) == 2e-3);
    CHECK(message_of([&] { (void)t.number(1, 2); }).find("mem:4:3") != std::string::npos);

    std::istringstream ragged("y,x\n1,2\n3\n");
    CHECK(message_of([&] { (void)io::parse_csv(ragged, "r"); }).find("r:3:") != std::string::npos);
    std::istringstream empty("");
    CHECK_THROWS_AS((void)io::parse_csv(empty, "e"), InputError);
    std::istringstream unterminated("y\n\"1\n");
    CHECK_THROWS_AS((void)io::parse_csv(unterminated, "u"), InputError);
}

TEST_CASE("written tables re-parse exactly") {
    const fs::path dir = scratch("roundtrip");
    Rng rng(8);
    std::vector<io::Row> rows;
    std::vector<double> values;
    for (int i = 0; i < 50; ++i) {
        const double v = std::exp(10.0 * (rng.uniform() - 0.5));
        values.push_back(v);
        rows.push_back({std::to_string(i), io::format_number(v), "a,\"b\""});
    }
    io::write_csv((dir / "t.csv").string(), {"i", "v", "note"}, rows);
    const io::CsvTable t = io::read_csv((dir / "t.csv").string());
    for (std::size_t i = 0; i < values.size(); ++i) {
        CHECK(t.number(i, 1) == values[i]);
        CHECK(t.rows[i][2] == "a,\"b\"");
    }
    io::write_summary((dir / "s.txt").string(), {{"a", "1"}, {"b", "x=y"}});
    const io::Summary s = io::read_summary((dir / "s.txt").string());
    CHECK(s == io::Summary{{"a", "1"}, {"b", "x=y"}});
}

TEST_CASE("series loading") {
    std::istringstream in("date,y,x,w\nd1,1.0,0.1,1\nd2,-2.0,0.2,0\n");
    const io::CsvTable t = io::parse_csv(in, "s.csv");
    const std::string neg = message_of([&] { (void)io::load_series(t, "y", {"x"}, {"w"}, std::string("date")); });
    CHECK(neg.find("s.csv:3") != std::string::npos);
    CHECK(neg.find("positive") != std::string::npos);

    const std::string miss = message_of([&] { (void)io::load_series(t, "y", {"a", "x"}, {"b"}, std::nullopt); });
    CHECK(miss.find("a, b") != std::string::npos);

    std::istringstream ok("date,y,x\nd1,1.0,0.1\nd2,2.0,0.2\n");
    const io::SeriesData s = io::load_series(io::parse_csv(ok, "ok"), "y", {"x"}, {}, std::string("date"));
    CHECK(s.dates == std::vector<std::string>{"d1", "d2"});
    CHECK(s.data.X(1, 0) == 1.0);
    CHECK(s.data.X(1, 1) == 0.2);
    CHECK(s.data.W.cols() == 1);
}

TEST_CASE("configuration validation") {
    const io::RunConfig c = io::parse_config_text(
        R"({"kernel": "cn", "extras": [0.3, 0.5], "p": 1, "fit": {"seed": 9, "hessian_mode": "finite-diff"}})");
    CHECK(c.kernel_family().kind() == KernelKind::ContaminatedNormal);
    CHECK(c.fit.seed == 9);
    CHECK(c.fit.hessian_mode == HessianMode::FiniteDiff);

    CHECK(message_of([] { (void)io::parse_config_text(R"({"kernal": "t"})"); }).find("'kernal'") != std::string::npos);
    CHECK(message_of([] { (void)io::parse_config_text(R"({"fit": {"tol": 1}})"); }).find("'fit.tol'") !=
          std::string::npos);
    CHECK(message_of([] { (void)io::parse_config_text(R"({"kernel": "t", "extras": [-1]})"); }).find("'extras'") !=
          std::string::npos);
    CHECK(message_of([] { (void)io::parse_config_text(R"({"p": "one"})"); }).find("'p'") != std::string::npos);
    CHECK(message_of([] { (void)io::parse_config_text(R"({"tau_level": 1.5})"); }).find("'tau_level'") !=
          std::string::npos);
    CHECK(message_of([] { (void)io::parse_config_text(R"({"truth": {"beta": [1], "tau": [0], "phi": [0.5]}})"); })
              .find("'truth.phi'") != std::string::npos);
    CHECK_THROWS_AS((void)io::parse_config_text("{not json"), InputError);

    // the kernel domain is checked before the config file is even needed
    CHECK_THROWS_AS((void)io::load_config(std::nullopt, {{"kernel", "slash"}, {"extras", "[0]"}}), InputError);
    const io::RunConfig o = io::load_config(std::nullopt, {{"kernel", "pe"}, {"extras", "[0.5]"}, {"fit.seed", "4"}});
    CHECK(o.kernel_family().kind() == KernelKind::PowerExponential);
    CHECK(o.fit.seed == 4);
    CHECK_THROWS_AS((void)io::load_config(std::string("/nonexistent/config.json")), InputError);
}

TEST_CASE("output directory") {
    io::RunConfig c;
    const fs::path dir = scratch("env") / "nested";
    setenv("QLSARMA_OUTPUT_DIR", dir.string().c_str(), 1);
    CHECK(io::resolve_output_dir(c) == dir.string());
    CHECK(fs::is_directory(dir));
    c.output_dir = (dir / "explicit").string();
    CHECK(io::resolve_output_dir(c) == c.output_dir);
    unsetenv("QLSARMA_OUTPUT_DIR");
}

TEST_CASE("simulate then fit is byte-identical across runs") {
    const fs::path a = scratch("golden_a"), b = scratch("golden_b");
    const io::Written sa = io::cmd_simulate(sim_config(a));
    const io::Written sb = io::cmd_simulate(sim_config(b));
    CHECK(slurp(sa[0]) == slurp(sb[0]));

    io::RunConfig fa = sim_config(a);
    io::RunConfig fb = sim_config(b);
    fa.tau_grid = fb.tau_grid = {0.25, 0.5};
    const io::Written wa = io::cmd_fit(fa, sa[0]);
    const io::Written wb = io::cmd_fit(fb, sb[0]);
    REQUIRE(wa.size() == wb.size());
    for (std::size_t i = 0; i < wa.size(); ++i) {
        CAPTURE(wa[i]);
        CHECK(slurp(wa[i]) == slurp(wb[i]));
    }

    // estimates on disk equal the in-memory fit at full precision
    const io::CsvTable series = io::read_csv(sa[0]);
    const io::SeriesData sd = io::load_series(series, "y", fa.mean_covariates, fa.dispersion_covariates, std::nullopt);
    const LikelihoodContext ctx(fa.spec(), sd.data);
    const FitResult r = fit(ctx, fa.fit);
    const io::CsvTable est = io::read_csv((a / "estimates.csv").string());
    const Eigen::VectorXd packed = r.params.pack();
    REQUIRE(est.rows.size() == static_cast<std::size_t>(packed.size()));
    for (std::size_t i = 0; i < est.rows.size(); ++i) {
        CHECK(est.number(i, est.column("estimate")) == packed[static_cast<Eigen::Index>(i)]);
        CHECK(est.number(i, est.column("se")) == (*r.se)[static_cast<Eigen::Index>(i)]);
    }
    const io::CsvTable crit = io::read_csv((a / "criteria.csv").string());
    CHECK(crit.header == std::vector<std::string>{"Indicator", "log-t(4)"});
    CHECK(crit.rows[0][0] == "AIC");
    const io::CsvTable fitted = io::read_csv((a / "fitted.csv").string());
    CHECK(fitted.number(10, fitted.column("fitted_Q")) == r.fitted_Q[10]);
    CHECK(fitted.rows[0][fitted.column("fitted_Q")] == "NA");
    const io::Summary s = io::read_summary((a / "fit_summary.txt").string());
    CHECK(s[0] == std::pair<std::string, std::string>{"kernel", "log-t(4)"});
}

TEST_CASE("calendar-dummy model structure") {
    // mean: intercept + snapca, snaptx, mother, thanks; dispersion: intercept + mother, thanks
    const fs::path dir = scratch("dummies");
    ModelSpec spec;
    spec.p = 1;
    spec.q = 1;
    spec.k = 4;
    spec.l = 2;
    spec.kernel = KernelFamily::student_t(4.0);
    const int n = 400;
    Eigen::MatrixXd xc(n, 4), wc(n, 2);
    Rng rng(21);
    for (int t = 0; t < n; ++t) {
        xc(t, 0) = (t % 30) < 10;
        xc(t, 1) = (t % 30) >= 10 && (t % 30) < 20;
        xc(t, 2) = rng.uniform() < 0.15;
        xc(t, 3) = rng.uniform() < 0.15;
        wc(t, 0) = xc(t, 2);
        wc(t, 1) = xc(t, 3);
    }
    ParamVector truth = ParamVector::zeros(spec);
    truth.beta << 2.0, -0.05, 0.1, -0.1, 0.2;
    truth.tau_coefs << -4.0, 1.0, 1.5;
    truth.phi << 0.8;
    truth.theta << -0.4;
    const DesignData d = DesignData::with_intercepts(Eigen::VectorXd::Ones(n), xc, wc);
    Rng draw(5);
    const Eigen::VectorXd y = simulate_series(spec, truth, d.X, d.W, draw);
    std::vector<io::Row> rows;
    for (int t = 0; t < n; ++t)
        rows.push_back({"2011-" + std::to_string(t), io::format_number(y[t]), io::format_number(xc(t, 0)),
                        io::format_number(xc(t, 1)), io::format_number(xc(t, 2)), io::format_number(xc(t, 3))});
    const std::string path = (dir / "sales.csv").string();
    io::write_csv(path, {"date", "sales", "snapca", "snaptx", "mother", "thanks"}, rows);

    io::RunConfig c = io::parse_config_text(R"({"kernel": "t", "extras": [4], "p": 1, "q": 1, "response": "sales",
        "mean_covariates": ["snapca", "snaptx", "mother", "thanks"], "dispersion_covariates": ["mother", "thanks"],
        "date_column": "date", "output_dir": ")" + dir.string() + "\"}");
    (void)io::cmd_fit(c, path);
    const io::CsvTable est = io::read_csv((dir / "estimates.csv").string());
    std::vector<std::string> terms;
    for (const auto& r : est.rows) terms.push_back(r[1] + ":" + r[2]);
    CHECK(terms == std::vector<std::string>{"beta:intercept", "beta:snapca", "beta:snaptx", "beta:mother",
                                            "beta:thanks", "tau:intercept", "tau:mother", "tau:thanks", "phi:1",
                                            "theta:1"});
    const io::CsvTable fitted = io::read_csv((dir / "fitted.csv").string());
    CHECK(fitted.header[1] == "date");
    CHECK(fitted.rows[3][1] == "2011-3");
}

TEST_CASE("forecast command") {
    const fs::path dir = scratch("forecast");
    io::RunConfig c = sim_config(dir);
    c.n = 160;
    const std::string all = io::cmd_simulate(c)[0];
    // split: first 150 rows history, last 10 rows future with actuals
    const io::CsvTable t = io::read_csv(all);
    std::vector<io::Row> hist(t.rows.begin(), t.rows.begin() + 150), fut(t.rows.begin() + 150, t.rows.end());
    io::write_csv((dir / "hist.csv").string(), t.header, hist);
    io::write_csv((dir / "future.csv").string(), t.header, fut);

    c.horizon = 1;
    std::vector<io::Row> one(fut.begin(), fut.begin() + 1);
    io::write_csv((dir / "future1.csv").string(), t.header, one);
    (void)io::cmd_forecast(c, (dir / "hist.csv").string(), (dir / "future1.csv").string(), std::nullopt);
    const io::CsvTable f1 = io::read_csv((dir / "forecast.csv").string());

    const io::SeriesData sd =
        io::load_series(io::read_csv((dir / "hist.csv").string()), "y", c.mean_covariates, c.dispersion_covariates,
                        std::nullopt);
    const LikelihoodContext ctx(c.spec(), sd.data);
    const FitResult r = fit(ctx, c.fit);
    ForecastRequest req;
    req.horizon = 1;
    req.future_X = Eigen::MatrixXd::Ones(1, 2);
    req.future_W = Eigen::MatrixXd::Ones(1, 2);
    const io::CsvTable ft = io::read_csv((dir / "future1.csv").string());
    req.future_X(0, 1) = ft.number(0, ft.column("x1"));
    req.future_W(0, 1) = ft.number(0, ft.column("w1"));
    CHECK(f1.number(0, f1.column("point")) == forecast(r, sd.data, req).point[0]);

    c.horizon = 10;
    c.interval_levels = std::make_pair(0.025, 0.975);
    const io::Written w = io::cmd_forecast(c, (dir / "hist.csv").string(), (dir / "future.csv").string(), std::nullopt);
    REQUIRE(w.size() == 2);
    const io::CsvTable fc = io::read_csv(w[0]);
    CHECK(fc.header == std::vector<std::string>{"step", "point", "lower", "upper"});
    CHECK(fc.rows.size() == 10);
    const io::CsvTable m = io::read_csv(w[1]);
    CHECK(m.header == std::vector<std::string>{"Model", "RMSE", "MAE", "MASE", "SMAPE", "MSIS"});
    CHECK(m.rows[0][5] != "NA");

    const std::string mismatch = message_of([&] {
        (void)io::cmd_forecast(c, (dir / "hist.csv").string(), (dir / "future1.csv").string(), std::nullopt);
    });
    CHECK(mismatch.find("horizon") != std::string::npos);

    io::write_csv((dir / "bad_future.csv").string(), {"x1"}, {{"0.5"}});
    c.horizon = 1;
    const std::string missing = message_of([&] {
        (void)io::cmd_forecast(c, (dir / "hist.csv").string(), (dir / "bad_future.csv").string(), std::nullopt);
    });
    CHECK(missing.find("missing columns: w1") != std::string::npos);
}

TEST_CASE("montecarlo command") {
    const fs::path a = scratch("mc_a"), b = scratch("mc_b");
    auto cfg = [](const fs::path& out) {
        return io::parse_config_text(R"({"p": 1, "q": 1, "replications": 5, "n_grid": [50], "tau_grid": [0.5],
            "kernels": ["normal"], "seed": 3,
            "truth": {"beta": [1.0, 0.7], "tau": [0.5, 1.5], "phi": [0.6], "theta": [0.3]},
            "output_dir": ")" + out.string() + "\"}");
    };
    const auto t0 = std::chrono::steady_clock::now();
    const io::Written wa = io::cmd_montecarlo(cfg(a));
    CHECK(std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count() < 10.0);
    const io::Written wb = io::cmd_montecarlo(cfg(b));
    for (std::size_t i = 0; i < wa.size(); ++i) CHECK(slurp(wa[i]) == slurp(wb[i]));
    const io::CsvTable g = io::read_csv((a / "mc_gcs.csv").string());
    CHECK(g.header == std::vector<std::string>{"n", "q", "statistic", "log-NO"});
    CHECK(g.rows.size() == 5);
    CHECK(g.rows[0][2] == "MN");
    const io::CsvTable bias = io::read_csv((a / "mc_bias.csv").string());
    CHECK(bias.rows.size() == 6);
    CHECK(bias.rows[4][2] == "phi1");

    io::RunConfig two = cfg(a);
    two.kernels = {{"normal", {}}, {"t", {4.0}}, {"pe", {0.5}}};
    two.replications = 2;
    (void)io::cmd_montecarlo(two);
    const io::CsvTable g3 = io::read_csv((a / "mc_gcs.csv").string());
    CHECK(g3.header == std::vector<std::string>{"n", "q", "statistic", "log-NO", "log-t(4)", "log-PE(0.5)"});
}

TEST_CASE("residuals command") {
    const fs::path dir = scratch("resid");
    io::RunConfig c = sim_config(dir);
    const std::string series = io::cmd_simulate(c)[0];
    const io::Written w = io::cmd_residuals(c, series);
    CHECK(w.size() == 5);
    const io::CsvTable r = io::read_csv((dir / "residuals.csv").string());
    CHECK(r.rows.size() == 149);
    CHECK(r.rows[0][0] == "2");
    const io::CsvTable st = io::read_csv((dir / "residual_stats.csv").string());
    CHECK(st.rows[0][0] == "MN");
    const io::CsvTable ap = io::read_csv((dir / "acf_pacf.csv").string());
    CHECK(ap.rows.size() == 21);
    CHECK(ap.number(0, 1) == 1.0);
    const io::CsvTable qq = io::read_csv((dir / "qq_rq.csv").string());
    CHECK(qq.rows.size() == 149);
    for (std::size_t i = 0; i < qq.rows.size(); ++i) CHECK(qq.number(i, 3) <= qq.number(i, 4));
}

TEST_CASE("exit codes") {
    CHECK(io::exit_code_for(InputError("x")) == 2);
    CHECK(io::exit_code_for(ParameterError("x")) == 2);
    CHECK(io::exit_code_for(CollinearityError("x")) == 2);
    CHECK(io::exit_code_for(NumericError("x")) == 3);
    CHECK(io::exit_code_for(ConvergenceError("x")) == 3);
}
