#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/arma.hpp"
#include "qlsarma/estimation.hpp"
#include "qlsarma/kernels.hpp"

namespace qlsarma::io {

struct CsvTable {
    std::string source;
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;  ///< every row has header.size() cells
    std::vector<std::size_t> lines;              ///< source line of each row; blank lines are skipped

    /// Index of a header column; throws InputError when absent.
    [[nodiscard]] std::size_t column(const std::string& name) const;
    [[nodiscard]] bool has_column(const std::string& name) const;
    [[nodiscard]] std::size_t line_of(std::size_t row) const;
    /// Numeric cell; row is zero-based over data rows. Parse errors name line and column.
    [[nodiscard]] double number(std::size_t row, std::size_t col) const;
};

/// Comma-delimited text with a header row. Double quotes protect commas and quotes.
CsvTable parse_csv(std::istream& in, const std::string& source);
CsvTable read_csv(const std::string& path);

/// Shortest text that parses back to the same double; "NA" for NaN.
std::string format_number(double x);

using Row = std::vector<std::string>;
void write_csv(const std::string& path, const Row& header, const std::vector<Row>& rows);

using Summary = std::vector<std::pair<std::string, std::string>>;
/// One "key=value" per line.
void write_summary(const std::string& path, const Summary& entries);
Summary read_summary(const std::string& path);

struct SeriesData {
    DesignData data;
    std::vector<std::string> dates;  ///< empty without a date column
};

/**
 * Response, mean and dispersion covariate columns of a series file. Intercept
 * columns are added. Missing columns are listed together; a non-positive
 * response names its line.
 */
SeriesData load_series(const CsvTable& table, const std::string& response,
                       const std::vector<std::string>& mean_columns,
                       const std::vector<std::string>& dispersion_columns,
                       const std::optional<std::string>& date_column);

struct TruthConfig {
    std::vector<double> beta;  ///< intercept first
    std::vector<double> tau;   ///< intercept first
    std::vector<double> phi;
    std::vector<double> theta;
};

struct KernelChoice {
    std::string name;
    std::vector<double> extras;
};

/// Everything a command needs. Built only by load_config, which validates.
struct RunConfig {
    KernelChoice kernel{"normal", {}};
    int p = 0;
    int q = 0;
    double tau_level = 0.5;
    std::vector<double> tau_grid;
    std::string response = "y";
    std::vector<std::string> mean_covariates;
    std::vector<std::string> dispersion_covariates;
    std::optional<std::string> date_column;
    std::string mean_link = "log";
    std::string dispersion_link = "log";
    FitConfig fit;

    int horizon = 1;
    std::optional<std::pair<double, double>> interval_levels;

    std::size_t max_lag = 20;
    std::size_t envelope_sims = 99;
    std::uint64_t envelope_seed = 1;

    std::optional<TruthConfig> truth;
    int n = 200;
    std::uint64_t seed = 1;

    std::vector<KernelChoice> kernels;
    std::vector<int> n_grid{50, 100, 200};
    int replications = 500;
    bool nested_samples = false;
    unsigned threads = 0;

    std::string output_dir;  ///< empty: QLSARMA_OUTPUT_DIR, then "."

    [[nodiscard]] ModelSpec spec() const;
    [[nodiscard]] KernelFamily kernel_family() const;
};

/**
 * Reads an optional JSON config file, then applies "key=value" overrides
 * (value is JSON text, or a bare string). Unknown keys, wrong types and kernel
 * extras outside their domain throw InputError naming the key.
 */
RunConfig load_config(const std::optional<std::string>& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});
RunConfig parse_config_text(const std::string& text);

/// Directory the commands write into, created on demand.
std::string resolve_output_dir(const RunConfig& config);

/// Paths of written files, in writing order.
using Written = std::vector<std::string>;

/// estimates.csv, criteria.csv, fitted.csv, fit_summary.txt; profile.csv with a tau grid.
Written cmd_fit(const RunConfig& config, const std::string& series_path);
/// forecast.csv; forecast_metrics.csv when actuals are available (response column of
/// the actuals file, or of the future file).
Written cmd_forecast(const RunConfig& config, const std::string& series_path, const std::string& future_path,
                     const std::optional<std::string>& actuals_path);
/// series.csv from config.truth with Uniform(0,1) covariates.
Written cmd_simulate(const RunConfig& config);
/// mc_bias.csv, mc_mse.csv, mc_gcs.csv, mc_rq.csv, mc_convergence.csv, mc_summary.txt.
Written cmd_montecarlo(const RunConfig& config);
/// residuals.csv, residual_stats.csv, acf_pacf.csv, qq_rq.csv, qq_gcs.csv.
Written cmd_residuals(const RunConfig& config, const std::string& series_path);

/// 0 ok, 2 input error, 3 numeric or convergence error.
int exit_code_for(const std::exception& e);

}  // namespace qlsarma::io
