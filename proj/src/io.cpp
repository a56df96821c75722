#include "qlsarma/io.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "qlsarma/diagnostics.hpp"
#include "qlsarma/errors.hpp"
#include "qlsarma/forecasting.hpp"
#include "qlsarma/likelihood.hpp"
#include "qlsarma/rng.hpp"
#include "qlsarma/simulation.hpp"

namespace qlsarma::io {

namespace {

using json = nlohmann::json;

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, const std::string& source, std::size_t lineno) {
    std::vector<std::string> out;
    std::string cell;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"') {
                if (i + 1 < line.size() && line[i + 1] == '"') {
                    cell += '"';
                    ++i;
                } else {
                    quoted = false;
                }
            } else {
                cell += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(trim(cell));
            cell.clear();
        } else {
            cell += c;
        }
    }
    if (quoted) throw InputError(source + ":" + std::to_string(lineno) + ": unterminated quote");
    out.push_back(trim(cell));
    return out;
}

std::string quote(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

std::ofstream open_out(const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw InputError("cannot write '" + path + "'");
    return out;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

std::string join(const std::vector<std::string>& v, const std::string& sep) {
    std::string out;
    for (std::size_t i = 0; i < v.size(); ++i) out += (i ? sep : "") + v[i];
    return out;
}

std::string join_numbers(const std::vector<double>& v, const std::string& sep) {
    std::vector<std::string> s;
    for (double x : v) s.push_back(format_number(x));
    return join(s, sep);
}

// ---- config ----------------------------------------------------------------

[[noreturn]] void bad_key(const std::string& key, const std::string& what) {
    throw InputError("config key '" + key + "': " + what);
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed, const std::string& prefix) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key())) bad_key(prefix + it.key(), "unknown key");
}

template <class T>
T get_as(const json& v, const std::string& key) {
    try {
        return v.get<T>();
    } catch (const json::exception&) {
        bad_key(key, "wrong type (" + std::string(v.type_name()) + ")");
    }
}

int get_int(const json& v, const std::string& key) {
    if (!v.is_number_integer()) bad_key(key, "expected an integer");
    return v.get<int>();
}

std::uint64_t get_seed(const json& v, const std::string& key) {
    if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<long long>() >= 0))
        bad_key(key, "expected a non-negative integer");
    return v.get<std::uint64_t>();
}

std::vector<double> get_numbers(const json& v, const std::string& key) {
    if (!v.is_array()) bad_key(key, "expected an array of numbers");
    std::vector<double> out;
    for (const auto& e : v) {
        if (!e.is_number()) bad_key(key, "expected an array of numbers");
        out.push_back(e.get<double>());
    }
    return out;
}

std::vector<std::string> get_strings(const json& v, const std::string& key) {
    if (!v.is_array()) bad_key(key, "expected an array of strings");
    std::vector<std::string> out;
    for (const auto& e : v) {
        if (!e.is_string()) bad_key(key, "expected an array of strings");
        out.push_back(e.get<std::string>());
    }
    return out;
}

KernelFamily build_kernel(const KernelChoice& k, const std::string& key) {
    try {
        return KernelFamily(KernelFamily::parse_kind(k.name), k.extras);
    } catch (const ParameterError& e) {
        bad_key(key, e.what());
    }
}

KernelChoice get_kernel_choice(const json& v, const std::string& key) {
    if (v.is_string()) return {v.get<std::string>(), {}};
    if (!v.is_object()) bad_key(key, "expected a kernel name or {\"kernel\", \"extras\"}");
    reject_unknown(v, {"kernel", "extras"}, key + ".");
    KernelChoice k;
    if (!v.contains("kernel")) bad_key(key + ".kernel", "missing");
    k.name = get_as<std::string>(v["kernel"], key + ".kernel");
    if (v.contains("extras")) k.extras = get_numbers(v["extras"], key + ".extras");
    return k;
}

void set_path(json& root, const std::string& dotted, json value) {
    json* node = &root;
    std::size_t start = 0;
    for (;;) {
        const auto dot = dotted.find('.', start);
        const std::string part = dotted.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        if (part.empty()) throw InputError("malformed override key '" + dotted + "'");
        if (dot == std::string::npos) {
            (*node)[part] = std::move(value);
            return;
        }
        if (!node->contains(part)) (*node)[part] = json::object();
        node = &(*node)[part];
        if (!node->is_object()) bad_key(dotted.substr(0, dot), "not an object");
        start = dot + 1;
    }
}

RunConfig from_json(const json& j) {
    if (!j.is_object()) throw InputError("config must be a JSON object");
    reject_unknown(j,
                   {"kernel", "extras", "p", "q", "tau_level", "tau_grid", "response", "mean_covariates",
                    "dispersion_covariates", "date_column", "mean_link", "dispersion_link", "fit", "horizon",
                    "interval_levels", "max_lag", "envelope_sims", "envelope_seed", "truth", "n", "seed", "kernels",
                    "n_grid", "replications", "nested_samples", "threads", "output_dir"},
                   "");
    RunConfig c;
    if (j.contains("kernel")) c.kernel.name = get_as<std::string>(j["kernel"], "kernel");
    if (j.contains("extras")) c.kernel.extras = get_numbers(j["extras"], "extras");
    if (j.contains("p")) c.p = get_int(j["p"], "p");
    if (j.contains("q")) c.q = get_int(j["q"], "q");
    if (j.contains("tau_level")) c.tau_level = get_as<double>(j["tau_level"], "tau_level");
    if (j.contains("tau_grid")) c.tau_grid = get_numbers(j["tau_grid"], "tau_grid");
    if (j.contains("response")) c.response = get_as<std::string>(j["response"], "response");
    if (j.contains("mean_covariates")) c.mean_covariates = get_strings(j["mean_covariates"], "mean_covariates");
    if (j.contains("dispersion_covariates"))
        c.dispersion_covariates = get_strings(j["dispersion_covariates"], "dispersion_covariates");
    if (j.contains("date_column") && !j["date_column"].is_null())
        c.date_column = get_as<std::string>(j["date_column"], "date_column");
    if (j.contains("mean_link")) c.mean_link = get_as<std::string>(j["mean_link"], "mean_link");
    if (j.contains("dispersion_link")) c.dispersion_link = get_as<std::string>(j["dispersion_link"], "dispersion_link");
    if (j.contains("fit")) {
        const json& f = j["fit"];
        if (!f.is_object()) bad_key("fit", "expected an object");
        reject_unknown(f, {"max_iters", "grad_tol", "step_tol", "multistart", "seed", "compute_se", "hessian_mode"},
                       "fit.");
        if (f.contains("max_iters")) c.fit.max_iters = get_int(f["max_iters"], "fit.max_iters");
        if (f.contains("grad_tol")) c.fit.grad_tol = get_as<double>(f["grad_tol"], "fit.grad_tol");
        if (f.contains("step_tol")) c.fit.step_tol = get_as<double>(f["step_tol"], "fit.step_tol");
        if (f.contains("multistart")) c.fit.multistart = get_int(f["multistart"], "fit.multistart");
        if (f.contains("seed")) c.fit.seed = get_seed(f["seed"], "fit.seed");
        if (f.contains("compute_se")) c.fit.compute_se = get_as<bool>(f["compute_se"], "fit.compute_se");
        if (f.contains("hessian_mode")) {
            const auto m = get_as<std::string>(f["hessian_mode"], "fit.hessian_mode");
            if (m == "analytic")
                c.fit.hessian_mode = HessianMode::Analytic;
            else if (m == "finite-diff")
                c.fit.hessian_mode = HessianMode::FiniteDiff;
            else
                bad_key("fit.hessian_mode", "expected \"analytic\" or \"finite-diff\"");
        }
    }
    if (j.contains("horizon")) c.horizon = get_int(j["horizon"], "horizon");
    if (j.contains("interval_levels") && !j["interval_levels"].is_null()) {
        const auto lv = get_numbers(j["interval_levels"], "interval_levels");
        if (lv.size() != 2) bad_key("interval_levels", "expected [lower, upper]");
        c.interval_levels = std::make_pair(lv[0], lv[1]);
    }
    if (j.contains("max_lag")) {
        const int v = get_int(j["max_lag"], "max_lag");
        if (v < 1) bad_key("max_lag", "must be at least 1");
        c.max_lag = static_cast<std::size_t>(v);
    }
    if (j.contains("envelope_sims")) {
        const int v = get_int(j["envelope_sims"], "envelope_sims");
        if (v < 19) bad_key("envelope_sims", "must be at least 19");
        c.envelope_sims = static_cast<std::size_t>(v);
    }
    if (j.contains("envelope_seed")) c.envelope_seed = get_seed(j["envelope_seed"], "envelope_seed");
    if (j.contains("truth")) {
        const json& t = j["truth"];
        if (!t.is_object()) bad_key("truth", "expected an object");
        reject_unknown(t, {"beta", "tau", "phi", "theta"}, "truth.");
        TruthConfig tc;
        if (t.contains("beta")) tc.beta = get_numbers(t["beta"], "truth.beta");
        if (t.contains("tau")) tc.tau = get_numbers(t["tau"], "truth.tau");
        if (t.contains("phi")) tc.phi = get_numbers(t["phi"], "truth.phi");
        if (t.contains("theta")) tc.theta = get_numbers(t["theta"], "truth.theta");
        c.truth = tc;
    }
    if (j.contains("n")) c.n = get_int(j["n"], "n");
    if (j.contains("seed")) c.seed = get_seed(j["seed"], "seed");
    if (j.contains("kernels")) {
        if (!j["kernels"].is_array()) bad_key("kernels", "expected an array");
        for (std::size_t i = 0; i < j["kernels"].size(); ++i)
            c.kernels.push_back(get_kernel_choice(j["kernels"][i], "kernels[" + std::to_string(i) + "]"));
    }
    if (j.contains("n_grid")) {
        c.n_grid.clear();
        if (!j["n_grid"].is_array()) bad_key("n_grid", "expected an array of integers");
        for (const auto& e : j["n_grid"]) c.n_grid.push_back(get_int(e, "n_grid"));
    }
    if (j.contains("replications")) c.replications = get_int(j["replications"], "replications");
    if (j.contains("nested_samples")) c.nested_samples = get_as<bool>(j["nested_samples"], "nested_samples");
    if (j.contains("threads")) {
        const int v = get_int(j["threads"], "threads");
        if (v < 0) bad_key("threads", "must be non-negative");
        c.threads = static_cast<unsigned>(v);
    }
    if (j.contains("output_dir")) c.output_dir = get_as<std::string>(j["output_dir"], "output_dir");
    return c;
}

void validate(RunConfig& c) {
    (void)build_kernel(c.kernel, "extras");
    for (std::size_t i = 0; i < c.kernels.size(); ++i)
        (void)build_kernel(c.kernels[i], "kernels[" + std::to_string(i) + "]");
    if (c.p < 0) bad_key("p", "must be non-negative");
    if (c.q < 0) bad_key("q", "must be non-negative");
    if (!(c.tau_level > 0.0 && c.tau_level < 1.0)) bad_key("tau_level", "must lie in (0, 1)");
    for (double t : c.tau_grid)
        if (!(t > 0.0 && t < 1.0)) bad_key("tau_grid", "levels must lie in (0, 1)");
    try {
        (void)parse_link(c.mean_link);
    } catch (const Error& e) {
        bad_key("mean_link", e.what());
    }
    try {
        (void)parse_link(c.dispersion_link);
    } catch (const Error& e) {
        bad_key("dispersion_link", e.what());
    }
    try {
        c.fit.validate();
    } catch (const Error& e) {
        bad_key("fit", e.what());
    }
    if (c.horizon < 1) bad_key("horizon", "must be at least 1");
    if (c.interval_levels) {
        const auto [lo, hi] = *c.interval_levels;
        if (!(lo > 0.0 && lo < hi && hi < 1.0)) bad_key("interval_levels", "need 0 < lower < upper < 1");
    }
    if (c.n < 1) bad_key("n", "must be positive");
    if (c.replications < 1) bad_key("replications", "must be positive");
    for (int n : c.n_grid)
        if (n < 1) bad_key("n_grid", "sizes must be positive");
    if (c.truth) {
        auto& t = *c.truth;
        if (t.beta.empty()) bad_key("truth.beta", "needs at least the intercept");
        if (t.tau.empty()) bad_key("truth.tau", "needs at least the intercept");
        if (c.mean_covariates.empty())
            for (std::size_t i = 1; i < t.beta.size(); ++i) c.mean_covariates.push_back("x" + std::to_string(i));
        if (c.dispersion_covariates.empty())
            for (std::size_t i = 1; i < t.tau.size(); ++i) c.dispersion_covariates.push_back("w" + std::to_string(i));
        if (t.beta.size() != c.mean_covariates.size() + 1)
            bad_key("truth.beta", "expected " + std::to_string(c.mean_covariates.size() + 1) + " values");
        if (t.tau.size() != c.dispersion_covariates.size() + 1)
            bad_key("truth.tau", "expected " + std::to_string(c.dispersion_covariates.size() + 1) + " values");
        if (t.phi.size() != static_cast<std::size_t>(c.p)) bad_key("truth.phi", "expected p values");
        if (t.theta.size() != static_cast<std::size_t>(c.q)) bad_key("truth.theta", "expected q values");
    }
}

// ---- shared command plumbing ------------------------------------------------

struct Fitted {
    SeriesData series;
    std::optional<LikelihoodContext> ctx;
    FitResult fit;
};

Fitted fit_series(const RunConfig& cfg, const std::string& series_path, double tau) {
    Fitted f;
    const CsvTable table = read_csv(series_path);
    f.series = load_series(table, cfg.response, cfg.mean_covariates, cfg.dispersion_covariates, cfg.date_column);
    ModelSpec spec = cfg.spec();
    spec.tau_level = tau;
    f.ctx.emplace(spec, f.series.data);
    f.fit = fit(*f.ctx, cfg.fit);
    return f;
}

std::vector<std::pair<std::string, std::string>> param_terms(const RunConfig& cfg) {
    std::vector<std::pair<std::string, std::string>> out;
    out.emplace_back("beta", "intercept");
    for (const auto& c : cfg.mean_covariates) out.emplace_back("beta", c);
    out.emplace_back("tau", "intercept");
    for (const auto& c : cfg.dispersion_covariates) out.emplace_back("tau", c);
    for (int i = 1; i <= cfg.p; ++i) out.emplace_back("phi", std::to_string(i));
    for (int i = 1; i <= cfg.q; ++i) out.emplace_back("theta", std::to_string(i));
    return out;
}

std::string kernel_display(const KernelFamily& k) {
    if (k.extras().empty()) return k.label();
    return k.label() + "(" + join_numbers(k.extras(), ";") + ")";
}

Eigen::MatrixXd future_block(const CsvTable& t, const std::vector<std::string>& cols) {
    Eigen::MatrixXd M = Eigen::MatrixXd::Ones(static_cast<Eigen::Index>(t.rows.size()),
                                              static_cast<Eigen::Index>(cols.size()) + 1);
    for (std::size_t c = 0; c < cols.size(); ++c) {
        const std::size_t idx = t.column(cols[c]);
        for (std::size_t r = 0; r < t.rows.size(); ++r)
            M(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c) + 1) = t.number(r, idx);
    }
    return M;
}

void require_columns(const CsvTable& t, const std::vector<std::string>& cols) {
    std::vector<std::string> missing;
    for (const auto& c : cols)
        if (!t.has_column(c) && std::find(missing.begin(), missing.end(), c) == missing.end()) missing.push_back(c);
    if (!missing.empty()) throw InputError(t.source + ": missing columns: " + join(missing, ", "));
}

Row description_row(const std::string& label, const std::optional<double>& a, const std::optional<double>& b) {
    auto f = [](const std::optional<double>& v) { return v ? format_number(*v) : std::string("NA"); };
    return {label, f(a), f(b)};
}

}  // namespace

// ---- CSV -------------------------------------------------------------------

std::size_t CsvTable::column(const std::string& name) const {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw InputError(source + ": missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
}

bool CsvTable::has_column(const std::string& name) const {
    return std::find(header.begin(), header.end(), name) != header.end();
}

std::size_t CsvTable::line_of(std::size_t row) const { return row < lines.size() ? lines[row] : row + 2; }

double CsvTable::number(std::size_t row, std::size_t col) const {
    const std::string& s = rows.at(row).at(col);
    const std::string where =
        source + ":" + std::to_string(line_of(row)) + ":" + std::to_string(col + 1) + " ('" + header[col] + "')";
    if (s.empty() || s == "NA") throw InputError(where + ": missing value");
    double v = 0.0;
    const char* first = s.data();
    if (*first == '+') ++first;
    const auto res = std::from_chars(first, s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size())
        throw InputError(where + ": cannot parse '" + s + "' as a number");
    return v;
}

CsvTable parse_csv(std::istream& in, const std::string& source) {
    CsvTable t;
    t.source = source;
    std::string line;
    std::size_t lineno = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++lineno;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        auto cells = split_line(line, source, lineno);
        if (!have_header) {
            t.header = std::move(cells);
            have_header = true;
            if (lineno != 1) throw InputError(source + ":" + std::to_string(lineno) + ": header must be line 1");
            continue;
        }
        if (cells.size() != t.header.size())
            throw InputError(source + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(t.header.size()) + " cells, found " + std::to_string(cells.size()));
        t.rows.push_back(std::move(cells));
        t.lines.push_back(lineno);
    }
    if (!have_header) throw InputError(source + ": empty file");
    return t;
}

CsvTable read_csv(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    return parse_csv(in, path);
}

std::string format_number(double x) {
    if (std::isnan(x)) return "NA";
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, res.ptr);
}

void write_csv(const std::string& path, const Row& header, const std::vector<Row>& rows) {
    auto out = open_out(path);
    auto put = [&](const Row& r) {
        for (std::size_t i = 0; i < r.size(); ++i) out << (i ? "," : "") << quote(r[i]);
        out << '\n';
    };
    put(header);
    for (const auto& r : rows) put(r);
    if (!out) throw InputError("write failed for '" + path + "'");
}

void write_summary(const std::string& path, const Summary& entries) {
    auto out = open_out(path);
    for (const auto& [k, v] : entries) out << k << '=' << v << '\n';
    if (!out) throw InputError("write failed for '" + path + "'");
}

Summary read_summary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open '" + path + "'");
    Summary out;
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty()) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InputError(path + ":" + std::to_string(lineno) + ": expected key=value");
        out.emplace_back(line.substr(0, eq), line.substr(eq + 1));
    }
    return out;
}

SeriesData load_series(const CsvTable& table, const std::string& response,
                       const std::vector<std::string>& mean_columns,
                       const std::vector<std::string>& dispersion_columns,
                       const std::optional<std::string>& date_column) {
    std::vector<std::string> needed{response};
    needed.insert(needed.end(), mean_columns.begin(), mean_columns.end());
    needed.insert(needed.end(), dispersion_columns.begin(), dispersion_columns.end());
    if (date_column) needed.push_back(*date_column);
    require_columns(table, needed);
    if (table.rows.empty()) throw InputError(table.source + ": no data rows");

    SeriesData s;
    const std::size_t ry = table.column(response);
    Eigen::VectorXd y(static_cast<Eigen::Index>(table.rows.size()));
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        y[static_cast<Eigen::Index>(r)] = table.number(r, ry);
        if (!(y[static_cast<Eigen::Index>(r)] > 0.0))
            throw InputError(table.source + ":" + std::to_string(table.line_of(r)) + ": response '" + response +
                             "' must be positive, found " + table.rows[r][ry]);
    }
    const Eigen::MatrixXd X = future_block(table, mean_columns);
    const Eigen::MatrixXd W = future_block(table, dispersion_columns);
    s.data.y = std::move(y);
    s.data.X = X;
    s.data.W = W;
    if (date_column) {
        const std::size_t rd = table.column(*date_column);
        for (const auto& row : table.rows) s.dates.push_back(row[rd]);
    }
    return s;
}

ModelSpec RunConfig::spec() const {
    ModelSpec s;
    s.p = p;
    s.q = q;
    s.k = static_cast<int>(mean_covariates.size());
    s.l = static_cast<int>(dispersion_covariates.size());
    s.tau_level = tau_level;
    s.kernel = kernel_family();
    s.mean_link = parse_link(mean_link);
    s.disp_link = parse_link(dispersion_link);
    return s;
}

KernelFamily RunConfig::kernel_family() const { return build_kernel(kernel, "extras"); }

RunConfig parse_config_text(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw InputError(std::string("config: ") + e.what());
    }
    RunConfig c = from_json(j);
    validate(c);
    return c;
}

RunConfig load_config(const std::optional<std::string>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
    json j = json::object();
    if (path) {
        std::ifstream in(*path, std::ios::binary);
        if (!in) throw InputError("cannot open config '" + *path + "'");
        try {
            j = json::parse(in);
        } catch (const json::parse_error& e) {
            throw InputError(*path + ": " + e.what());
        }
    }
    for (const auto& [key, value] : overrides) {
        json v;
        try {
            v = json::parse(value);
        } catch (const json::parse_error&) {
            v = value;
        }
        set_path(j, key, std::move(v));
    }
    RunConfig c = from_json(j);
    validate(c);
    return c;
}

std::string resolve_output_dir(const RunConfig& config) {
    std::string dir = config.output_dir;
    if (dir.empty()) {
        const char* env = std::getenv("QLSARMA_OUTPUT_DIR");
        dir = env && *env ? env : ".";
    }
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
    return dir;
}

// ---- commands ----------------------------------------------------------------

Written cmd_fit(const RunConfig& config, const std::string& series_path) {
    const std::string dir = resolve_output_dir(config);
    Fitted f = fit_series(config, series_path, config.tau_level);
    const FitResult& r = f.fit;
    const auto terms = param_terms(config);
    const auto names = ParamVector::names(r.spec);
    const Eigen::VectorXd est = r.params.pack();
    Written out;

    std::vector<Row> rows;
    for (std::size_t i = 0; i < names.size(); ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        rows.push_back({names[i], terms[i].first, terms[i].second, format_number(est[ii]),
                        r.se ? format_number((*r.se)[ii]) : "NA"});
    }
    out.push_back(join_path(dir, "estimates.csv"));
    write_csv(out.back(), {"parameter", "block", "term", "estimate", "se"}, rows);

    InformationCriteria ic = r.criteria;
    std::size_t levels = 1;
    if (!config.tau_grid.empty()) {
        const auto prof = fit_profile(r.spec, f.series.data, config.fit, config.tau_grid);
        std::vector<Row> prow;
        InformationCriteria sum;
        levels = 0;
        for (const auto& e : prof) {
            if (!e.result) {
                prow.push_back({format_number(e.tau), "", "NA", "NA", e.error});
                continue;
            }
            const Eigen::VectorXd pe = e.result->params.pack();
            for (std::size_t i = 0; i < names.size(); ++i) {
                const auto ii = static_cast<Eigen::Index>(i);
                prow.push_back({format_number(e.tau), names[i], format_number(pe[ii]),
                                e.result->se ? format_number((*e.result->se)[ii]) : "NA", ""});
            }
            sum.aic += e.result->criteria.aic;
            sum.bic += e.result->criteria.bic;
            sum.caic += e.result->criteria.caic;
            sum.hqic += e.result->criteria.hqic;
            ++levels;
        }
        out.push_back(join_path(dir, "profile.csv"));
        write_csv(out.back(), {"tau", "parameter", "estimate", "se", "error"}, prow);
        if (levels == 0) throw ConvergenceError("no level of tau_grid could be fitted");
        const double d = static_cast<double>(levels);
        ic = {sum.aic / d, sum.bic / d, sum.caic / d, sum.hqic / d};
    }
    const std::string label = kernel_display(r.spec.kernel);
    out.push_back(join_path(dir, "criteria.csv"));
    write_csv(out.back(), {"Indicator", label},
              {{"AIC", format_number(ic.aic)},
               {"BIC", format_number(ic.bic)},
               {"CAIC", format_number(ic.caic)},
               {"HQIC", format_number(ic.hqic)}});

    Row fh{"t"};
    if (!f.series.dates.empty()) fh.push_back("date");
    fh.insert(fh.end(), {"y", "fitted_Q", "kappa", "innovation"});
    std::vector<Row> frows;
    for (Eigen::Index t = 0; t < f.series.data.n(); ++t) {
        Row row{std::to_string(t + 1)};
        if (!f.series.dates.empty()) row.push_back(f.series.dates[static_cast<std::size_t>(t)]);
        row.insert(row.end(), {format_number(f.series.data.y[t]), format_number(r.fitted_Q[t]),
                               format_number(r.kappa[t]), format_number(r.innovations[t])});
        frows.push_back(std::move(row));
    }
    out.push_back(join_path(dir, "fitted.csv"));
    write_csv(out.back(), fh, frows);

    Summary s{{"kernel", label},
              {"p", std::to_string(r.spec.p)},
              {"q", std::to_string(r.spec.q)},
              {"tau_level", format_number(r.spec.tau_level)},
              {"n", std::to_string(f.series.data.n())},
              {"n_used", std::to_string(r.n_used)},
              {"loglik", format_number(r.loglik)},
              {"converged", r.converged ? "true" : "false"},
              {"iterations", std::to_string(r.iterations)},
              {"score_max", format_number(r.score_max)},
              {"start_index", std::to_string(r.start_index)},
              {"stationary", r.stationarity.stationary ? "true" : "false"},
              {"invertible", r.stationarity.invertible ? "true" : "false"},
              {"criteria_levels", std::to_string(levels)}};
    for (std::size_t i = 0; i < r.warnings.size(); ++i) s.emplace_back("warning" + std::to_string(i + 1), r.warnings[i]);
    out.push_back(join_path(dir, "fit_summary.txt"));
    write_summary(out.back(), s);
    return out;
}

Written cmd_forecast(const RunConfig& config, const std::string& series_path, const std::string& future_path,
                     const std::optional<std::string>& actuals_path) {
    const std::string dir = resolve_output_dir(config);
    const CsvTable future = read_csv(future_path);
    std::vector<std::string> cols = config.mean_covariates;
    cols.insert(cols.end(), config.dispersion_covariates.begin(), config.dispersion_covariates.end());
    require_columns(future, cols);
    if (future.rows.size() != static_cast<std::size_t>(config.horizon))
        throw InputError(future_path + ": horizon is " + std::to_string(config.horizon) + " but the file has " +
                         std::to_string(future.rows.size()) + " rows");
    std::optional<CsvTable> actuals;
    if (actuals_path) {
        actuals = read_csv(*actuals_path);
        if (actuals->rows.size() != static_cast<std::size_t>(config.horizon))
            throw InputError(*actuals_path + ": expected " + std::to_string(config.horizon) + " rows");
    } else if (future.has_column(config.response)) {
        actuals = future;
    }

    Fitted f = fit_series(config, series_path, config.tau_level);
    ForecastRequest req;
    req.horizon = config.horizon;
    req.future_X = future_block(future, config.mean_covariates);
    req.future_W = future_block(future, config.dispersion_covariates);
    req.interval_levels = config.interval_levels;
    req.fit_config = config.fit;
    const ForecastResult fc = forecast(f.fit, f.series.data, req);

    Written out;
    const bool dates = config.date_column && future.has_column(*config.date_column);
    Row header{"step"};
    if (dates) header.push_back("date");
    header.push_back("point");
    if (fc.lower) header.insert(header.end(), {"lower", "upper"});
    std::vector<Row> rows;
    for (int h = 0; h < config.horizon; ++h) {
        Row row{std::to_string(h + 1)};
        if (dates) row.push_back(future.rows[static_cast<std::size_t>(h)][future.column(*config.date_column)]);
        row.push_back(format_number(fc.point[h]));
        if (fc.lower) row.insert(row.end(), {format_number((*fc.lower)[h]), format_number((*fc.upper)[h])});
        rows.push_back(std::move(row));
    }
    out.push_back(join_path(dir, "forecast.csv"));
    write_csv(out.back(), header, rows);

    if (actuals) {
        const std::size_t ry = actuals->column(config.response);
        Eigen::VectorXd a(config.horizon);
        for (int h = 0; h < config.horizon; ++h) a[h] = actuals->number(static_cast<std::size_t>(h), ry);
        const double alpha = config.interval_levels ? 1.0 - (config.interval_levels->second - config.interval_levels->first)
                                                    : 0.05;
        const ForecastMetrics m = forecast_metrics(a, fc.point, fc.lower, fc.upper, f.series.data.y, alpha);
        out.push_back(join_path(dir, "forecast_metrics.csv"));
        write_csv(out.back(), {"Model", "RMSE", "MAE", "MASE", "SMAPE", "MSIS"},
                  {{kernel_display(f.fit.spec.kernel), format_number(m.rmse), format_number(m.mae),
                    format_number(m.mase), format_number(m.smape), m.msis ? format_number(*m.msis) : "NA"}});
    }
    return out;
}

Written cmd_simulate(const RunConfig& config) {
    if (!config.truth) throw InputError("config key 'truth': required by simulate");
    const std::string dir = resolve_output_dir(config);
    const ModelSpec spec = config.spec();
    const TruthConfig& tc = *config.truth;
    ParamVector truth = ParamVector::zeros(spec);
    truth.beta = Eigen::Map<const Eigen::VectorXd>(tc.beta.data(), static_cast<Eigen::Index>(tc.beta.size()));
    truth.tau_coefs = Eigen::Map<const Eigen::VectorXd>(tc.tau.data(), static_cast<Eigen::Index>(tc.tau.size()));
    truth.phi = Eigen::Map<const Eigen::VectorXd>(tc.phi.data(), static_cast<Eigen::Index>(tc.phi.size()));
    truth.theta = Eigen::Map<const Eigen::VectorXd>(tc.theta.data(), static_cast<Eigen::Index>(tc.theta.size()));

    // shared names between the mean and dispersion lists refer to one column
    std::vector<std::string> cols;
    for (const auto* list : {&config.mean_covariates, &config.dispersion_covariates})
        for (const auto& c : *list)
            if (std::find(cols.begin(), cols.end(), c) == cols.end()) cols.push_back(c);
    Rng rng(config.seed);
    Eigen::MatrixXd U(config.n, static_cast<Eigen::Index>(cols.size()));
    for (Eigen::Index t = 0; t < U.rows(); ++t)
        for (Eigen::Index c = 0; c < U.cols(); ++c) U(t, c) = rng.uniform();
    auto block = [&](const std::vector<std::string>& names) {
        Eigen::MatrixXd M = Eigen::MatrixXd::Ones(config.n, static_cast<Eigen::Index>(names.size()) + 1);
        for (std::size_t i = 0; i < names.size(); ++i) {
            const auto c = std::find(cols.begin(), cols.end(), names[i]) - cols.begin();
            M.col(static_cast<Eigen::Index>(i) + 1) = U.col(c);
        }
        return M;
    };
    const Eigen::MatrixXd X = block(config.mean_covariates);
    const Eigen::MatrixXd W = block(config.dispersion_covariates);
    const Eigen::VectorXd y = simulate_series(spec, truth, X, W, rng);

    Row header{"t", config.response};
    header.insert(header.end(), cols.begin(), cols.end());
    std::vector<Row> rows;
    for (Eigen::Index t = 0; t < config.n; ++t) {
        Row row{std::to_string(t + 1), format_number(y[t])};
        for (Eigen::Index c = 0; c < U.cols(); ++c) row.push_back(format_number(U(t, c)));
        rows.push_back(std::move(row));
    }
    Written out{join_path(dir, "series.csv")};
    write_csv(out.back(), header, rows);
    return out;
}

Written cmd_montecarlo(const RunConfig& config) {
    if (!config.truth) throw InputError("config key 'truth': required by montecarlo");
    const std::string dir = resolve_output_dir(config);
    McDesign d;
    d.spec = config.spec();
    const TruthConfig& tc = *config.truth;
    d.truth = ParamVector::zeros(d.spec);
    for (std::size_t i = 0; i < tc.beta.size(); ++i) d.truth.beta[static_cast<Eigen::Index>(i)] = tc.beta[i];
    for (std::size_t i = 0; i < tc.tau.size(); ++i) d.truth.tau_coefs[static_cast<Eigen::Index>(i)] = tc.tau[i];
    for (std::size_t i = 0; i < tc.phi.size(); ++i) d.truth.phi[static_cast<Eigen::Index>(i)] = tc.phi[i];
    for (std::size_t i = 0; i < tc.theta.size(); ++i) d.truth.theta[static_cast<Eigen::Index>(i)] = tc.theta[i];
    d.n_grid = config.n_grid;
    d.tau_grid = config.tau_grid.empty() ? std::vector<double>{config.tau_level} : config.tau_grid;
    d.kernels.clear();
    if (config.kernels.empty()) {
        d.kernels.push_back(config.kernel_family());
    } else {
        for (std::size_t i = 0; i < config.kernels.size(); ++i)
            d.kernels.push_back(build_kernel(config.kernels[i], "kernels[" + std::to_string(i) + "]"));
    }
    d.replications = config.replications;
    d.seed = config.seed;
    d.nested_samples = config.nested_samples;
    d.fit_config = config.fit;
    d.threads = config.threads;
    const McReport rep = run_mc(d);

    const std::size_t nk = d.kernels.size(), nt = d.tau_grid.size(), nn = d.n_grid.size();
    auto cell = [&](std::size_t k, std::size_t ti, std::size_t ni) -> const McCell& {
        return rep.cells[(k * nt + ti) * nn + ni];
    };
    Row kheads;
    for (const auto& k : d.kernels) kheads.push_back(kernel_display(k));

    Written out;
    auto param_table = [&](const std::string& name, bool mse) {
        Row header{"n", "q", "parameter"};
        header.insert(header.end(), kheads.begin(), kheads.end());
        std::vector<Row> rows;
        for (std::size_t ni = 0; ni < nn; ++ni)
            for (std::size_t ti = 0; ti < nt; ++ti)
                for (std::size_t p = 0; p < rep.param_names.size(); ++p) {
                    Row row{std::to_string(d.n_grid[ni]), format_number(d.tau_grid[ti]), rep.param_names[p]};
                    for (std::size_t k = 0; k < nk; ++k) {
                        const McCell& c = cell(k, ti, ni);
                        const auto pi = static_cast<Eigen::Index>(p);
                        row.push_back(c.converged ? format_number(mse ? c.mse[pi] : c.bias[pi]) : "NA");
                    }
                    rows.push_back(std::move(row));
                }
        out.push_back(join_path(dir, name));
        write_csv(out.back(), header, rows);
    };
    param_table("mc_bias.csv", false);
    param_table("mc_mse.csv", true);

    auto resid_table = [&](const std::string& name, bool gcs) {
        Row header{"n", "q", "statistic"};
        header.insert(header.end(), kheads.begin(), kheads.end());
        std::vector<Row> rows;
        const char* stats[] = {"MN", "MD", "SD", "CS", "CK"};
        for (std::size_t ni = 0; ni < nn; ++ni)
            for (std::size_t ti = 0; ti < nt; ++ti)
                for (int s = 0; s < 5; ++s) {
                    Row row{std::to_string(d.n_grid[ni]), format_number(d.tau_grid[ti]), stats[s]};
                    for (std::size_t k = 0; k < nk; ++k) {
                        const McCell& c = cell(k, ti, ni);
                        const ResidualSummary& r = gcs ? c.gcs : c.rq;
                        const double v[] = {r.mn, r.md, r.sd, r.cs, r.ck};
                        row.push_back(c.converged ? format_number(v[s]) : "NA");
                    }
                    rows.push_back(std::move(row));
                }
        out.push_back(join_path(dir, name));
        write_csv(out.back(), header, rows);
    };
    resid_table("mc_gcs.csv", true);
    resid_table("mc_rq.csv", false);

    Row header{"n", "q"};
    header.insert(header.end(), kheads.begin(), kheads.end());
    std::vector<Row> rows;
    int low = 0;
    for (std::size_t ni = 0; ni < nn; ++ni)
        for (std::size_t ti = 0; ti < nt; ++ti) {
            Row row{std::to_string(d.n_grid[ni]), format_number(d.tau_grid[ti])};
            for (std::size_t k = 0; k < nk; ++k) {
                row.push_back(std::to_string(cell(k, ti, ni).converged));
                low += cell(k, ti, ni).low_convergence;
            }
            rows.push_back(std::move(row));
        }
    out.push_back(join_path(dir, "mc_convergence.csv"));
    write_csv(out.back(), header, rows);

    out.push_back(join_path(dir, "mc_summary.txt"));
    write_summary(out.back(), {{"replications", std::to_string(d.replications)},
                               {"seed", std::to_string(d.seed)},
                               {"nested_samples", d.nested_samples ? "true" : "false"},
                               {"kernels", join(kheads, " ")},
                               {"parameters", join(rep.param_names, " ")},
                               {"truth", join_numbers(tc.beta, " ") + " | " + join_numbers(tc.tau, " ") + " | " +
                                             join_numbers(tc.phi, " ") + " | " + join_numbers(tc.theta, " ")},
                               {"low_convergence_cells", std::to_string(low)}});
    return out;
}

Written cmd_residuals(const RunConfig& config, const std::string& series_path) {
    const std::string dir = resolve_output_dir(config);
    Fitted f = fit_series(config, series_path, config.tau_level);
    const ResidualReport rr = residuals(f.fit, *f.ctx, config.max_lag);
    const int m = f.fit.spec.m();
    Written out;

    Row header{"t"};
    if (!f.series.dates.empty()) header.push_back("date");
    header.insert(header.end(), {"gcs", "rq"});
    std::vector<Row> rows;
    for (Eigen::Index i = 0; i < rr.gcs.size(); ++i) {
        const auto t = static_cast<std::size_t>(i + m);
        Row row{std::to_string(t + 1)};
        if (!f.series.dates.empty()) row.push_back(f.series.dates[t]);
        row.insert(row.end(), {format_number(rr.gcs[i]), format_number(rr.rq[i])});
        rows.push_back(std::move(row));
    }
    out.push_back(join_path(dir, "residuals.csv"));
    write_csv(out.back(), header, rows);

    const Description& g = rr.stats_gcs;
    const Description& q = rr.stats_rq;
    out.push_back(join_path(dir, "residual_stats.csv"));
    write_csv(out.back(), {"statistic", "gcs", "rq"},
              {description_row("MN", g.mn, q.mn), description_row("MD", g.md, q.md),
               description_row("SD", g.sd, q.sd), description_row("CS", g.cs, q.cs),
               description_row("CK", g.ck, q.ck), description_row("CV", g.cv, q.cv),
               description_row("MIN", g.min, q.min), description_row("MAX", g.max, q.max),
               {"N", std::to_string(g.n), std::to_string(q.n)}});

    if (rr.rq_correlation) {
        std::vector<Row> ar;
        for (std::size_t lag = 0; lag < rr.rq_correlation->acf.size(); ++lag)
            ar.push_back({std::to_string(lag), format_number(rr.rq_correlation->acf[lag]),
                          format_number(rr.rq_correlation->pacf[lag])});
        out.push_back(join_path(dir, "acf_pacf.csv"));
        write_csv(out.back(), {"lag", "acf", "pacf"}, ar);
    }

    auto envelope = [&](const std::string& name, const Eigen::VectorXd& r, EnvelopeTarget target,
                        std::uint64_t index) {
        Rng rng = Rng::stream(config.envelope_seed, index);
        const std::vector<double> v(r.data(), r.data() + r.size());
        const QqEnvelope e = qq_envelope(v, target, config.envelope_sims, rng);
        std::vector<Row> er;
        for (std::size_t i = 0; i < e.observed.size(); ++i)
            er.push_back({std::to_string(i + 1), format_number(e.theoretical[i]), format_number(e.observed[i]),
                          format_number(e.lo[i]), format_number(e.hi[i])});
        out.push_back(join_path(dir, name));
        write_csv(out.back(), {"i", "theoretical", "observed", "lo", "hi"}, er);
    };
    envelope("qq_rq.csv", rr.rq, EnvelopeTarget::StdNormal, 0);
    envelope("qq_gcs.csv", rr.gcs, EnvelopeTarget::StdExponential, 1);
    return out;
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const NumericError*>(&e)) return 3;
    if (dynamic_cast<const Error*>(&e)) return 2;
    if (dynamic_cast<const std::invalid_argument*>(&e)) return 2;
    return 1;
}

}  // namespace qlsarma::io
