#pragma once

#include <vector>

#include "qlsarma/kernels.hpp"
#include "qlsarma/rng.hpp"

namespace qlsarma {

/**
 * @brief Quantile-parameterized log-symmetric law QLS(Q, kappa, g) at level tau.
 *
 * Y = Q exp(sqrt(kappa) (Z - z_tau)) with Z ~ xi_nc g(z^2), so Q is the
 * tau-quantile of Y. z_tau is solved once at construction.
 */
class QlsDistribution {
public:
    QlsDistribution(double Q, double kappa, double tau_level, StandardKernel kernel);
    /// Reuses a z_tau already solved for the same kernel and level.
    QlsDistribution(double Q, double kappa, double tau_level, StandardKernel kernel, double z_tau);

    [[nodiscard]] double Q() const noexcept { return Q_; }
    [[nodiscard]] double kappa() const noexcept { return kappa_; }
    [[nodiscard]] double tau_level() const noexcept { return tau_; }
    [[nodiscard]] double z_tau() const noexcept { return z_tau_; }
    [[nodiscard]] const StandardKernel& kernel() const noexcept { return kernel_; }

    /// Standardized argument (log(y/Q) + sqrt(kappa) z_tau) / sqrt(kappa).
    [[nodiscard]] double standardize(double y) const;

    [[nodiscard]] double pdf(double y) const;
    [[nodiscard]] double log_pdf(double y) const;
    [[nodiscard]] double cdf(double y) const;
    /// 1 - cdf(y) without cancellation in the upper tail.
    [[nodiscard]] double sf(double y) const;
    [[nodiscard]] double quantile(double prob) const;

    std::vector<double> sample(Rng& rng, std::size_t n) const;
    double sample_one(Rng& rng) const;

private:
    void check_y(double y) const;

    double Q_;
    double kappa_;
    double tau_;
    StandardKernel kernel_;
    double z_tau_;
    double root_kappa_;
};

}  // namespace qlsarma
