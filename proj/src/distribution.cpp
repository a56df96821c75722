#include "qlsarma/distribution.hpp"

#include <cmath>
#include <sstream>

#include "qlsarma/errors.hpp"

namespace qlsarma {

namespace {

void validate(double Q, double kappa, double tau) {
    if (!(Q > 0.0) || !std::isfinite(Q)) throw ParameterError("QLS: Q must be positive and finite");
    if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ParameterError("QLS: kappa must be positive and finite");
    if (!(tau > 0.0 && tau < 1.0)) throw ParameterError("QLS: tau level must lie in (0, 1)");
}

}  // namespace

QlsDistribution::QlsDistribution(double Q, double kappa, double tau_level, StandardKernel kernel)
    : Q_(Q), kappa_(kappa), tau_(tau_level), kernel_(std::move(kernel)), z_tau_(0.0),
      root_kappa_(std::sqrt(kappa)) {
    validate(Q, kappa, tau_level);
    z_tau_ = kernel_.quantile(tau_level);
}

QlsDistribution::QlsDistribution(double Q, double kappa, double tau_level, StandardKernel kernel, double z_tau)
    : Q_(Q), kappa_(kappa), tau_(tau_level), kernel_(std::move(kernel)), z_tau_(z_tau),
      root_kappa_(std::sqrt(kappa)) {
    validate(Q, kappa, tau_level);
}

void QlsDistribution::check_y(double y) const {
    if (!(y > 0.0)) {
        std::ostringstream msg;
        msg << "QLS: support is y > 0, got " << y;
        throw DomainError(msg.str());
    }
}

double QlsDistribution::standardize(double y) const {
    return std::log(y / Q_) / root_kappa_ + z_tau_;
}

double QlsDistribution::pdf(double y) const { return std::exp(log_pdf(y)); }

double QlsDistribution::log_pdf(double y) const {
    check_y(y);
    if (std::isinf(y)) return -INFINITY;
    return kernel_.log_density(standardize(y)) - std::log(root_kappa_ * y);
}

double QlsDistribution::cdf(double y) const {
    check_y(y);
    if (std::isinf(y)) return 1.0;
    return kernel_.cdf(standardize(y));
}

double QlsDistribution::sf(double y) const {
    check_y(y);
    if (std::isinf(y)) return 0.0;
    return kernel_.sf(standardize(y));
}

double QlsDistribution::quantile(double prob) const {
    if (prob == tau_) return Q_;
    return Q_ * std::exp(root_kappa_ * (kernel_.quantile(prob) - z_tau_));
}

double QlsDistribution::sample_one(Rng& rng) const {
    return Q_ * std::exp(root_kappa_ * (kernel_.sample_one(rng) - z_tau_));
}

std::vector<double> QlsDistribution::sample(Rng& rng, std::size_t n) const {
    std::vector<double> out(n);
    for (auto& y : out) y = sample_one(rng);
    return out;
}

}  // namespace qlsarma
