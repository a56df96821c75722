#pragma once

#include <optional>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/estimation.hpp"
#include "qlsarma/likelihood.hpp"
#include "qlsarma/rng.hpp"

namespace qlsarma {

/// Descriptive statistics. CS and CK are the bias-adjusted sample skewness (G1)
/// and excess kurtosis (G2); CV is SD / MN in percent. Undefined entries are empty.
struct Description {
    double mn = 0.0;
    double md = 0.0;
    double sd = 0.0;
    std::optional<double> cs;
    std::optional<double> ck;
    double min = 0.0;
    double max = 0.0;
    std::optional<double> cv;
    std::size_t n = 0;
};

/// Throws InputError for fewer than two values.
Description describe(const std::vector<double>& x);

struct AcfPacf {
    std::vector<double> acf;   ///< lags 0..max_lag, acf[0] = 1
    std::vector<double> pacf;  ///< lags 0..max_lag, pacf[0] = 1
};

/// Sample ACF with 1/n normalization and PACF by Durbin-Levinson.
/// Throws InputError for a constant series or max_lag >= length.
AcfPacf acf_pacf(const std::vector<double>& x, std::size_t max_lag);

struct ResidualReport {
    Eigen::VectorXd gcs;  ///< -log S(y_t), t >= m
    Eigen::VectorXd rq;   ///< Phi^{-1}(F(y_t)), t >= m
    Description stats_gcs;
    Description stats_rq;
    std::optional<AcfPacf> rq_correlation;  ///< empty when RQ is constant
    std::size_t clamped = 0;  ///< survival probabilities moved into [1e-15, 1 - 1e-15]
};

ResidualReport residuals(const FitResult& fit, const LikelihoodContext& ctx, std::size_t max_lag = 20);

enum class EnvelopeTarget { StdNormal, StdExponential };

struct QqEnvelope {
    std::vector<double> theoretical;  ///< target quantiles at (i - 0.5) / n
    std::vector<double> observed;     ///< sorted residuals
    std::vector<double> lo;
    std::vector<double> hi;
    std::size_t inside = 0;
};

/// Pointwise order-statistic band from n_sim simulated target samples. Each band
/// edge is the j-th most extreme simulated value with j = max(1, floor((n_sim + 1) alpha / 2)).
QqEnvelope qq_envelope(const std::vector<double>& resid, EnvelopeTarget target, std::size_t n_sim, Rng& rng,
                       double level = 0.95);

}  // namespace qlsarma
