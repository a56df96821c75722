#pragma once

#include <complex>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "qlsarma/kernels.hpp"

namespace qlsarma {

/// Monotone link between a positive parameter and its linear predictor.
enum class Link { Log };

/// h(mu) and the derivatives of log h^{-1}(eta) used by the likelihood chain rule.
struct LinkFunctions {
    Link kind = Link::Log;
    [[nodiscard]] double apply(double mu) const;          // h(mu)
    [[nodiscard]] double inverse(double eta) const;       // h^{-1}(eta)
    [[nodiscard]] double log_inverse(double eta) const;   // log h^{-1}(eta)
    [[nodiscard]] double dlog_inverse(double eta) const;  // d log h^{-1} / d eta
    [[nodiscard]] double d2log_inverse(double eta) const;
};

Link parse_link(const std::string& name);
std::string link_name(Link link);

/// Orders, covariate counts and distributional choices of a QLS-ARMAX model.
struct ModelSpec {
    int p = 0;
    int q = 0;
    int k = 0;  ///< mean covariates, excluding the intercept
    int l = 0;  ///< dispersion covariates, excluding the intercept
    double tau_level = 0.5;
    KernelFamily kernel = KernelFamily::normal();
    Link mean_link = Link::Log;
    Link disp_link = Link::Log;

    [[nodiscard]] int m() const { return std::max(p, q); }
    [[nodiscard]] int n_params() const { return 2 + k + l + p + q; }
    /// Throws ParameterError on negative orders or a level outside (0, 1).
    void validate() const;
};

/// Response and design matrices. X and W carry a leading column of ones.
struct DesignData {
    Eigen::VectorXd y;
    Eigen::MatrixXd X;
    Eigen::MatrixXd W;

    /// Builds X = [1 | x_cov], W = [1 | w_cov]; empty covariate matrices are allowed.
    static DesignData with_intercepts(Eigen::VectorXd y, const Eigen::MatrixXd& x_cov,
                                      const Eigen::MatrixXd& w_cov);

    [[nodiscard]] Eigen::Index n() const { return y.size(); }
    /// Checks shapes against spec, positivity of y and finiteness of everything.
    void validate(const ModelSpec& spec) const;
};

/// zeta = (beta, tau, phi, theta).
struct ParamVector {
    Eigen::VectorXd beta;
    Eigen::VectorXd tau_coefs;
    Eigen::VectorXd phi;
    Eigen::VectorXd theta;

    static ParamVector zeros(const ModelSpec& spec);
    static ParamVector unpack(const ModelSpec& spec, const Eigen::VectorXd& zeta);
    [[nodiscard]] Eigen::VectorXd pack() const;
    [[nodiscard]] Eigen::Index size() const { return beta.size() + tau_coefs.size() + phi.size() + theta.size(); }
    void check_shape(const ModelSpec& spec) const;

    /// beta0.., tau0.., phi1.., theta1..
    static std::vector<std::string> names(const ModelSpec& spec);
};

/// Output of the forward recursion. Entries with t < m are unavailable and
/// hold NaN, except innov which is zero there.
struct RecursionState {
    Eigen::VectorXd eta;
    Eigen::VectorXd gamma;
    Eigen::VectorXd Q;
    Eigen::VectorXd kappa;
    Eigen::VectorXd innov;
    int m = 0;
};

RecursionState run_recursion(const ModelSpec& spec, const DesignData& data, const ParamVector& params);

/// psi_0..psi_horizon of Theta(B) / Phi(B); throws ParameterError when Phi is not invertible.
std::vector<double> psi_weights(const std::vector<double>& phi, const std::vector<double>& theta,
                                std::size_t horizon);

struct StationarityReport {
    std::vector<std::complex<double>> ar_roots;  ///< roots of 1 - sum phi_i B^i
    std::vector<std::complex<double>> ma_roots;  ///< roots of 1 + sum theta_j B^j
    bool stationary = true;
    bool invertible = true;
};

StationarityReport check_stationarity(const std::vector<double>& phi, const std::vector<double>& theta);

/// Autocorrelations rho_0..rho_max_lag of the linear process sum psi_j r_{t-j}
/// with uncorrelated, equal-variance innovations.
std::vector<double> arma_autocorrelation(const std::vector<double>& phi, const std::vector<double>& theta,
                                         std::size_t max_lag, std::size_t truncation = 2000);

inline std::vector<double> to_std(const Eigen::VectorXd& v) { return {v.data(), v.data() + v.size()}; }

}  // namespace qlsarma
