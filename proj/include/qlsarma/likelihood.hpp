#pragma once

#include <Eigen/Dense>

#include "qlsarma/arma.hpp"
#include "qlsarma/kernels.hpp"

namespace qlsarma {

/**
 * @brief Everything the conditional likelihood needs besides the parameters.
 *
 * Immutable after construction; z_tau is solved once here.
 */
class LikelihoodContext {
public:
    LikelihoodContext(ModelSpec spec, DesignData data, double quadrature_tol = 1e-10);
    /// Shares an already-built kernel (its quantile table and constants).
    LikelihoodContext(ModelSpec spec, DesignData data, StandardKernel kernel);

    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const DesignData& data() const noexcept { return data_; }
    [[nodiscard]] const StandardKernel& kernel() const noexcept { return kernel_; }
    [[nodiscard]] double z_tau() const noexcept { return z_tau_; }
    /// n - m, the number of terms in the conditional likelihood.
    [[nodiscard]] Eigen::Index n_used() const { return data_.n() - spec_.m(); }

private:
    ModelSpec spec_;
    DesignData data_;
    StandardKernel kernel_;
    double z_tau_;
};

struct LikelihoodEval {
    double loglik = 0.0;
    Eigen::VectorXd score;    ///< filled when order >= 1
    Eigen::MatrixXd hessian;  ///< filled when order >= 2
};

/**
 * Conditional log-likelihood sum_{t>m} log f(y_t | past) and, for order 1 and 2,
 * its exact gradient and Hessian in zeta = (beta, tau, phi, theta). The
 * derivative recursions of eta_t start from zero before t = m, matching r_t = 0.
 * Throws NumericError naming the first t with a non-finite term.
 */
LikelihoodEval evaluate(const LikelihoodContext& ctx, const Eigen::VectorXd& zeta, int order);

double loglik(const LikelihoodContext& ctx, const ParamVector& params);
Eigen::VectorXd score(const LikelihoodContext& ctx, const ParamVector& params);

enum class HessianMode { Analytic, FiniteDiff };

struct HessianReport {
    Eigen::MatrixXd H;        ///< symmetrized (H + H^T) / 2
    double asymmetry = 0.0;   ///< max|H - H^T| / max|H| before symmetrization
    bool asymmetry_warning = false;
    HessianMode mode = HessianMode::Analytic;
};

/// FiniteDiff central-differences the analytic score with steps 1e-5 * max(1, |zeta_i|).
HessianReport hessian(const LikelihoodContext& ctx, const ParamVector& params, HessianMode mode);

/// sqrt(diag((-H)^{-1})); throws SingularInformationError if -H is not positive definite.
Eigen::VectorXd observed_info_se(const Eigen::MatrixXd& hessian_at_max);

}  // namespace qlsarma
