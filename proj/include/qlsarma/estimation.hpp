#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/arma.hpp"
#include "qlsarma/likelihood.hpp"

namespace qlsarma {

struct FitConfig {
    int max_iters = 500;
    double grad_tol = 1e-6;
    double step_tol = 1e-10;
    int multistart = 3;
    std::uint64_t seed = 1;
    bool compute_se = true;
    HessianMode hessian_mode = HessianMode::Analytic;

    /// Throws ParameterError for non-positive tolerances or multistart < 1.
    void validate() const;
};

struct InformationCriteria {
    double aic = 0.0;
    double bic = 0.0;
    double caic = 0.0;
    double hqic = 0.0;
};

/// AIC, BIC, CAIC (small-sample corrected) and HQIC; throws InputError when n_used <= n_params + 1.
InformationCriteria information_criteria(double loglik, int n_params, Eigen::Index n_used);

struct FitResult {
    ModelSpec spec;
    ParamVector params;
    std::optional<Eigen::VectorXd> se;
    double loglik = 0.0;
    Eigen::Index n_used = 0;
    InformationCriteria criteria;
    Eigen::VectorXd fitted_Q;     ///< NaN for t < m
    Eigen::VectorXd kappa;        ///< NaN for t < m
    Eigen::VectorXd innovations;  ///< zero for t < m
    bool converged = false;
    int iterations = 0;
    double score_max = 0.0;       ///< max|score| at the returned point
    int start_index = 0;          ///< which multistart branch won
    StationarityReport stationarity;
    std::vector<std::string> warnings;
};

/// Least-squares start: OLS for beta, Hannan-Rissanen for (phi, theta) projected into the
/// stationary/invertible region, robust dispersion for the tau intercept. Throws
/// CollinearityError naming the offending columns of X.
ParamVector initialize(const ModelSpec& spec, const DesignData& data);

/// Conditional ML fit. `start` replaces the least-squares initializer for branch 0.
FitResult fit(const LikelihoodContext& ctx, const FitConfig& config,
              const std::optional<ParamVector>& start = std::nullopt);

struct ProfileEntry {
    double tau = 0.0;
    std::optional<FitResult> result;
    std::string error;
};

/// One fit per quantile level, each warm-started from the previous success.
std::vector<ProfileEntry> fit_profile(const ModelSpec& spec, const DesignData& data, const FitConfig& config,
                                      const std::vector<double>& tau_grid);

enum class Criterion { AIC, BIC, CAIC, HQIC };
double criterion_value(const InformationCriteria& ic, Criterion c);
Criterion parse_criterion(const std::string& name);

struct ExtrasGridResult {
    std::vector<std::vector<double>> extras;
    std::vector<std::optional<FitResult>> fits;
    std::size_t best = 0;
};

/// Fits the model for each candidate extras vector of spec.kernel's kind and picks the smallest criterion.
ExtrasGridResult select_extras(const ModelSpec& spec, const DesignData& data, const FitConfig& config,
                               const std::vector<std::vector<double>>& grid, Criterion criterion);

/// Fraction of t >= m where the lower-level fitted quantile exceeds the upper-level one.
double quantile_crossing_fraction(const FitResult& lower, const FitResult& upper);

}  // namespace qlsarma
