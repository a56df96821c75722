#include "qlsarma/arma.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Eigenvalues>

#include "qlsarma/errors.hpp"

namespace qlsarma {

double LinkFunctions::apply(double mu) const { return std::log(mu); }
double LinkFunctions::inverse(double eta) const { return std::exp(eta); }
double LinkFunctions::log_inverse(double eta) const { return eta; }
double LinkFunctions::dlog_inverse(double) const { return 1.0; }
double LinkFunctions::d2log_inverse(double) const { return 0.0; }

Link parse_link(const std::string& name) {
    if (name == "log") return Link::Log;
    throw ParameterError("unknown link '" + name + "' (supported: log)");
}

std::string link_name(Link) { return "log"; }

void ModelSpec::validate() const {
    if (p < 0 || q < 0 || k < 0 || l < 0) throw ParameterError("model orders and covariate counts must be >= 0");
    if (!(tau_level > 0.0 && tau_level < 1.0)) throw ParameterError("tau_level must lie in (0, 1)");
}

DesignData DesignData::with_intercepts(Eigen::VectorXd y, const Eigen::MatrixXd& x_cov,
                                       const Eigen::MatrixXd& w_cov) {
    const Eigen::Index n = y.size();
    auto build = [n](const Eigen::MatrixXd& cov, const char* which) {
        if (cov.cols() > 0 && cov.rows() != n) {
            std::ostringstream msg;
            msg << which << " has " << cov.rows() << " rows, response has " << n;
            throw ShapeError(msg.str());
        }
        Eigen::MatrixXd out(n, cov.cols() + 1);
        out.col(0).setOnes();
        if (cov.cols() > 0) out.rightCols(cov.cols()) = cov;
        return out;
    };
    DesignData d;
    d.X = build(x_cov, "mean covariate matrix");
    d.W = build(w_cov, "dispersion covariate matrix");
    d.y = std::move(y);
    return d;
}

void DesignData::validate(const ModelSpec& spec) const {
    const Eigen::Index n = y.size();
    if (X.rows() != n || W.rows() != n) throw ShapeError("design matrices and response differ in length");
    if (X.cols() != spec.k + 1) throw ShapeError("X must have k + 1 columns");
    if (W.cols() != spec.l + 1) throw ShapeError("W must have l + 1 columns");
    if (n <= spec.m()) throw ShapeError("series length must exceed max(p, q)");
    for (Eigen::Index t = 0; t < n; ++t) {
        if (!(y[t] > 0.0) || !std::isfinite(y[t])) {
            std::ostringstream msg;
            msg << "response must be positive and finite; row " << t + 1 << " has " << y[t];
            throw InputError(msg.str());
        }
    }
    if (!X.allFinite() || !W.allFinite()) throw InputError("design matrices contain non-finite entries");
}

ParamVector ParamVector::zeros(const ModelSpec& spec) {
    ParamVector p;
    p.beta = Eigen::VectorXd::Zero(spec.k + 1);
    p.tau_coefs = Eigen::VectorXd::Zero(spec.l + 1);
    p.phi = Eigen::VectorXd::Zero(spec.p);
    p.theta = Eigen::VectorXd::Zero(spec.q);
    return p;
}

ParamVector ParamVector::unpack(const ModelSpec& spec, const Eigen::VectorXd& zeta) {
    if (zeta.size() != spec.n_params()) {
        std::ostringstream msg;
        msg << "parameter vector has length " << zeta.size() << ", model needs " << spec.n_params();
        throw ShapeError(msg.str());
    }
    ParamVector p;
    Eigen::Index o = 0;
    p.beta = zeta.segment(o, spec.k + 1);
    o += spec.k + 1;
    p.tau_coefs = zeta.segment(o, spec.l + 1);
    o += spec.l + 1;
    p.phi = zeta.segment(o, spec.p);
    o += spec.p;
    p.theta = zeta.segment(o, spec.q);
    return p;
}

Eigen::VectorXd ParamVector::pack() const {
    Eigen::VectorXd z(size());
    z << beta, tau_coefs, phi, theta;
    return z;
}

void ParamVector::check_shape(const ModelSpec& spec) const {
    if (beta.size() != spec.k + 1 || tau_coefs.size() != spec.l + 1 || phi.size() != spec.p ||
        theta.size() != spec.q)
        throw ShapeError("parameter blocks do not match the model orders");
    if (!pack().allFinite()) throw ParameterError("parameters must be finite");
}

std::vector<std::string> ParamVector::names(const ModelSpec& spec) {
    std::vector<std::string> out;
    for (int i = 0; i <= spec.k; ++i) out.push_back("beta" + std::to_string(i));
    for (int i = 0; i <= spec.l; ++i) out.push_back("tau" + std::to_string(i));
    for (int i = 1; i <= spec.p; ++i) out.push_back("phi" + std::to_string(i));
    for (int i = 1; i <= spec.q; ++i) out.push_back("theta" + std::to_string(i));
    return out;
}

RecursionState run_recursion(const ModelSpec& spec, const DesignData& data, const ParamVector& params) {
    params.check_shape(spec);
    if (data.X.cols() != spec.k + 1 || data.W.cols() != spec.l + 1 || data.X.rows() != data.y.size() ||
        data.W.rows() != data.y.size())
        throw ShapeError("design matrices do not match the model");
    const LinkFunctions h{spec.mean_link};
    const LinkFunctions d{spec.disp_link};
    const Eigen::Index n = data.y.size();
    const int m = spec.m();
    const double nan = std::numeric_limits<double>::quiet_NaN();

    RecursionState s;
    s.m = m;
    s.eta = Eigen::VectorXd::Constant(n, nan);
    s.gamma = Eigen::VectorXd::Constant(n, nan);
    s.Q = Eigen::VectorXd::Constant(n, nan);
    s.kappa = Eigen::VectorXd::Constant(n, nan);
    s.innov = Eigen::VectorXd::Zero(n);

    const Eigen::VectorXd xb = data.X * params.beta;
    Eigen::VectorXd hy(n);
    for (Eigen::Index t = 0; t < n; ++t) hy[t] = h.apply(data.y[t]);

    for (Eigen::Index t = m; t < n; ++t) {
        double eta = xb[t];
        for (int i = 1; i <= spec.p; ++i) eta += params.phi[i - 1] * (hy[t - i] - xb[t - i]);
        for (int j = 1; j <= spec.q; ++j) eta += params.theta[j - 1] * s.innov[t - j];
        const double gamma = data.W.row(t).dot(params.tau_coefs);
        const double Q = h.inverse(eta);
        const double kappa = d.inverse(gamma);
        if (!std::isfinite(eta) || !std::isfinite(gamma) || !(Q > 0.0) || !std::isfinite(Q) ||
            !(kappa > 0.0) || !std::isfinite(kappa))
            throw NumericError("recursion produced a non-finite predictor", static_cast<std::size_t>(t));
        s.eta[t] = eta;
        s.gamma[t] = gamma;
        s.Q[t] = Q;
        s.kappa[t] = kappa;
        s.innov[t] = hy[t] - eta;
    }
    return s;
}

namespace {

/// Roots of 1 + c_1 B + ... + c_r B^r via the companion matrix of the reversed polynomial.
std::vector<std::complex<double>> poly_roots(const std::vector<double>& c) {
    std::size_t r = c.size();
    while (r > 0 && c[r - 1] == 0.0) --r;
    if (r == 0) return {};
    // B-roots are reciprocals of the roots of z^r + c_1 z^{r-1} + ... + c_r
    Eigen::MatrixXd comp = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(r));
    for (std::size_t j = 0; j < r; ++j) comp(0, static_cast<Eigen::Index>(j)) = -c[j];
    for (std::size_t i = 1; i < r; ++i) comp(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i - 1)) = 1.0;
    Eigen::EigenSolver<Eigen::MatrixXd> es(comp, false);
    std::vector<std::complex<double>> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        const std::complex<double> z = es.eigenvalues()[i];
        out.push_back(std::abs(z) == 0.0 ? std::complex<double>(INFINITY, 0.0) : 1.0 / z);
    }
    return out;
}

bool outside_unit_circle(const std::vector<std::complex<double>>& roots) {
    constexpr double kMargin = 1e-10;
    return std::all_of(roots.begin(), roots.end(), [](const auto& z) { return std::abs(z) > 1.0 + kMargin; });
}

}  // namespace

StationarityReport check_stationarity(const std::vector<double>& phi, const std::vector<double>& theta) {
    StationarityReport r;
    std::vector<double> ar(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i) ar[i] = -phi[i];
    r.ar_roots = poly_roots(ar);
    r.ma_roots = poly_roots(theta);
    r.stationary = outside_unit_circle(r.ar_roots);
    r.invertible = outside_unit_circle(r.ma_roots);
    return r;
}

std::vector<double> psi_weights(const std::vector<double>& phi, const std::vector<double>& theta,
                                std::size_t horizon) {
    if (!check_stationarity(phi, {}).stationary)
        throw ParameterError("psi weights need an invertible AR polynomial (a root lies on or inside the unit circle)");
    std::vector<double> psi(horizon + 1, 0.0);
    psi[0] = 1.0;
    for (std::size_t j = 1; j <= horizon; ++j) {
        double v = j <= theta.size() ? theta[j - 1] : 0.0;
        for (std::size_t i = 1; i <= std::min(j, phi.size()); ++i) v += phi[i - 1] * psi[j - i];
        psi[j] = v;
    }
    return psi;
}

std::vector<double> arma_autocorrelation(const std::vector<double>& phi, const std::vector<double>& theta,
                                         std::size_t max_lag, std::size_t truncation) {
    const std::vector<double> psi = psi_weights(phi, theta, truncation + max_lag);
    std::vector<double> rho(max_lag + 1);
    double var = 0.0;
    for (std::size_t j = 0; j <= truncation; ++j) var += psi[j] * psi[j];
    for (std::size_t k = 0; k <= max_lag; ++k) {
        double c = 0.0;
        for (std::size_t j = 0; j <= truncation; ++j) c += psi[j] * psi[j + k];
        rho[k] = c / var;
    }
    rho[0] = 1.0;
    return rho;
}

}  // namespace qlsarma
