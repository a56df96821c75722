#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/estimation.hpp"

namespace qlsarma {

struct ForecastRequest {
    int horizon = 1;
    Eigen::MatrixXd future_X;  ///< horizon x (k + 1), leading ones column
    Eigen::MatrixXd future_W;  ///< horizon x (l + 1), leading ones column
    std::optional<std::pair<double, double>> interval_levels;
    FitConfig fit_config;      ///< used for the band fits at the interval levels
};

struct ForecastResult {
    Eigen::VectorXd point;
    std::optional<Eigen::VectorXd> lower;
    std::optional<Eigen::VectorXd> upper;
    double basis_tau = 0.5;
    int coherence_violations = 0;  ///< steps with lower > point or point > upper
};

/**
 * Point path of the fitted conditional tau-quantile. Observed history feeds
 * the first step; later steps reuse log-forecasts for lagged responses and set
 * future innovations to zero. With interval_levels, the band comes from fits
 * of the same model at tau_lo and tau_hi, warm-started from `fit`.
 */
ForecastResult forecast(const FitResult& fit, const DesignData& data, const ForecastRequest& req);

/// Same, with band fits already available.
ForecastResult forecast_with_band(const FitResult& fit, const FitResult& lower_fit, const FitResult& upper_fit,
                                  const DesignData& data, const ForecastRequest& req);

/// Forecast path of one fit.
Eigen::VectorXd forecast_path(const FitResult& fit, const DesignData& data, const ForecastRequest& req);

struct ForecastMetrics {
    double rmse = 0.0;
    double mae = 0.0;
    double mase = 0.0;
    double smape = 0.0;
    std::optional<double> msis;
};

/// RMSE, MAE, MASE, SMAPE (percent) and, with a band, MSIS at nominal level 1 - alpha.
/// MASE and MSIS are scaled by the mean absolute first difference of `insample`.
ForecastMetrics forecast_metrics(const Eigen::VectorXd& actual, const Eigen::VectorXd& point,
                                 const std::optional<Eigen::VectorXd>& lower,
                                 const std::optional<Eigen::VectorXd>& upper, const Eigen::VectorXd& insample,
                                 double alpha);

}  // namespace qlsarma
