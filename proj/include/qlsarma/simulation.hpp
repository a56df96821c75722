#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/arma.hpp"
#include "qlsarma/diagnostics.hpp"
#include "qlsarma/estimation.hpp"
#include "qlsarma/kernels.hpp"
#include "qlsarma/rng.hpp"

namespace qlsarma {

/**
 * Forward draw of y from the model. X and W include the intercept column.
 * For t < m, y_t comes from the regression law QLS(h^{-1}(x_t beta), kappa_t)
 * with r_t = 0; afterwards eta_t follows the ARMA recursion on realized values.
 * Throws NumericError naming t when eta_t is not finite.
 */
Eigen::VectorXd simulate_series(const ModelSpec& spec, const ParamVector& truth, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& W, Rng& rng);
/// Same, reusing a built kernel for spec.kernel.
Eigen::VectorXd simulate_series(const ModelSpec& spec, const ParamVector& truth, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& W, Rng& rng, const StandardKernel& kernel);

enum class CovariateLaw { Uniform01, Fixed };

struct McDesign {
    ModelSpec spec;  ///< orders and covariate counts; kernel and tau_level are set per cell
    ParamVector truth;
    std::vector<int> n_grid{50, 100, 200};
    std::vector<double> tau_grid{0.25, 0.5, 0.75};
    std::vector<KernelFamily> kernels{KernelFamily::normal()};
    int replications = 500;
    CovariateLaw covariate_law = CovariateLaw::Uniform01;
    Eigen::MatrixXd fixed_x;  ///< covariates without intercept, at least max(n_grid) rows
    Eigen::MatrixXd fixed_w;
    std::uint64_t seed = 1;
    /// Replication r uses one series of length max(n_grid) for every cell and fits its prefixes.
    bool nested_samples = false;
    FitConfig fit_config;
    unsigned threads = 0;  ///< 0 = hardware concurrency

    void validate() const;
};

struct ResidualSummary {
    double mn = 0.0, md = 0.0, sd = 0.0, cs = 0.0, ck = 0.0;
};

struct McCell {
    int n = 0;
    double tau = 0.5;
    KernelFamily kernel = KernelFamily::normal();
    int replications = 0;
    int converged = 0;
    Eigen::VectorXd mean_estimate;
    Eigen::VectorXd bias;
    Eigen::VectorXd mse;
    ResidualSummary gcs;  ///< averages over converged replications
    ResidualSummary rq;
    bool low_convergence = false;  ///< convergence rate below 80%
};

struct McReport {
    std::vector<std::string> param_names;
    std::vector<McCell> cells;  ///< kernel-major, then tau, then n
};

McReport run_mc(const McDesign& design);

}  // namespace qlsarma
