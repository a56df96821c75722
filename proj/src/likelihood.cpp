#include "qlsarma/likelihood.hpp"

#include <cmath>
#include <vector>

#include "qlsarma/errors.hpp"

namespace qlsarma {

LikelihoodContext::LikelihoodContext(ModelSpec spec, DesignData data, double quadrature_tol)
    : LikelihoodContext(spec, std::move(data), StandardKernel(spec.kernel, quadrature_tol)) {}

LikelihoodContext::LikelihoodContext(ModelSpec spec, DesignData data, StandardKernel kernel)
    : spec_(std::move(spec)), data_(std::move(data)), kernel_(std::move(kernel)), z_tau_(0.0) {
    spec_.validate();
    if (!(kernel_.family() == spec_.kernel)) throw ParameterError("kernel does not match the model specification");
    data_.validate(spec_);
    z_tau_ = kernel_.quantile(spec_.tau_level);
}

LikelihoodEval evaluate(const LikelihoodContext& ctx, const Eigen::VectorXd& zeta, int order) {
    const ModelSpec& spec = ctx.spec();
    const DesignData& data = ctx.data();
    const ParamVector prm = ParamVector::unpack(spec, zeta);
    prm.check_shape(spec);
    const LinkFunctions hl{spec.mean_link};
    const LinkFunctions dl{spec.disp_link};
    const double z_tau = ctx.z_tau();

    const Eigen::Index n = data.n();
    const int m = spec.m();
    const int p = spec.p, q = spec.q;
    const Eigen::Index P = spec.n_params();
    const Eigen::Index ob = 0, ot = spec.k + 1, op = ot + spec.l + 1, oq = op + p;

    const Eigen::VectorXd xb = data.X * prm.beta;
    Eigen::VectorXd hy(n);
    for (Eigen::Index t = 0; t < n; ++t) hy[t] = hl.apply(data.y[t]);

    LikelihoodEval out;
    if (order >= 1) out.score = Eigen::VectorXd::Zero(P);
    if (order >= 2) out.hessian = Eigen::MatrixXd::Zero(P, P);

    // ring buffers of the last q gradients/Hessians of eta; zero before t = m
    const int ring = std::max(q, 1);
    std::vector<Eigen::VectorXd> G(ring, Eigen::VectorXd::Zero(order >= 1 ? P : 0));
    std::vector<Eigen::MatrixXd> H(ring, Eigen::MatrixXd::Zero(order >= 2 ? P : 0, order >= 2 ? P : 0));
    auto slot = [ring](Eigen::Index s) { return static_cast<int>(s % ring); };

    Eigen::VectorXd innov = Eigen::VectorXd::Zero(n);
    Eigen::VectorXd grad_eta(order >= 1 ? P : 0);
    Eigen::MatrixXd hess_eta(order >= 2 ? P : 0, order >= 2 ? P : 0);
    Eigen::VectorXd grad_gamma(order >= 1 ? P : 0);
    double ll = 0.0;

    for (Eigen::Index t = m; t < n; ++t) {
        double eta = xb[t];
        for (int i = 1; i <= p; ++i) eta += prm.phi[i - 1] * (hy[t - i] - xb[t - i]);
        for (int j = 1; j <= q; ++j) eta += prm.theta[j - 1] * innov[t - j];
        const double gamma = data.W.row(t).dot(prm.tau_coefs);
        innov[t] = hy[t] - eta;

        const double log_Q = hl.log_inverse(eta);
        const double log_kappa = dl.log_inverse(gamma);
        const double s = std::exp(0.5 * log_kappa);
        const double logy = std::log(data.y[t]);
        const double dev = (logy - log_Q) / s;  // z - z_tau
        const double z = dev + z_tau;
        const LogGeneratorDerivs L = ctx.kernel().log_derivs(z);
        const double term = L.value - 0.5 * log_kappa - logy;
        if (!std::isfinite(term) || !std::isfinite(eta) || !std::isfinite(gamma))
            throw NumericError("log-likelihood term is not finite", static_cast<std::size_t>(t));
        ll += term;
        if (order < 1) continue;

        // eta gradient: base - sum_j theta_j G_{t-j}
        grad_eta.setZero();
        grad_eta.segment(ob, spec.k + 1) = data.X.row(t).transpose();
        for (int i = 1; i <= p; ++i) {
            grad_eta.segment(ob, spec.k + 1) -= prm.phi[i - 1] * data.X.row(t - i).transpose();
            grad_eta[op + i - 1] = hy[t - i] - xb[t - i];
        }
        for (int j = 1; j <= q; ++j) {
            grad_eta[oq + j - 1] += innov[t - j];
            if (t - j >= m) grad_eta -= prm.theta[j - 1] * G[slot(t - j)];
        }
        grad_gamma.setZero();
        grad_gamma.segment(ot, spec.l + 1) = data.W.row(t).transpose();

        const double c1 = hl.dlog_inverse(eta), d1 = dl.dlog_inverse(gamma);
        const double a_lam = -L.d1 / s;
        const double a_omg = -0.5 * (L.d1 * dev + 1.0);
        const double a_eta = a_lam * c1;
        const double a_gam = a_omg * d1;
        out.score += a_eta * grad_eta + a_gam * grad_gamma;

        if (order >= 2) {
            hess_eta.setZero();
            for (int i = 1; i <= p; ++i) {
                for (int c = 0; c <= spec.k; ++c) {
                    hess_eta(ob + c, op + i - 1) -= data.X(t - i, c);
                    hess_eta(op + i - 1, ob + c) -= data.X(t - i, c);
                }
            }
            for (int j = 1; j <= q; ++j) {
                if (t - j < m) continue;
                const Eigen::VectorXd& g = G[slot(t - j)];
                hess_eta.row(oq + j - 1) -= g.transpose();
                hess_eta.col(oq + j - 1) -= g;
                hess_eta -= prm.theta[j - 1] * H[slot(t - j)];
            }
            const double c2 = hl.d2log_inverse(eta), d2 = dl.d2log_inverse(gamma);
            const double A = L.d2 / (s * s);
            const double B = (L.d2 * dev + L.d1) / (2.0 * s);
            const double C = 0.25 * (L.d2 * dev * dev + L.d1 * dev);
            const double A_eta = A * c1 * c1 + a_lam * c2;
            const double B_eg = B * c1 * d1;
            const double C_gam = C * d1 * d1 + a_omg * d2;
            out.hessian.noalias() += A_eta * grad_eta * grad_eta.transpose();
            out.hessian.noalias() += B_eg * (grad_eta * grad_gamma.transpose() + grad_gamma * grad_eta.transpose());
            out.hessian.noalias() += C_gam * grad_gamma * grad_gamma.transpose();
            out.hessian += a_eta * hess_eta;
            if (q > 0) H[slot(t)] = hess_eta;
        }
        if (q > 0) G[slot(t)] = grad_eta;
    }
    out.loglik = ll + static_cast<double>(n - m) * ctx.kernel().log_xi_nc();
    return out;
}

double loglik(const LikelihoodContext& ctx, const ParamVector& params) {
    return evaluate(ctx, params.pack(), 0).loglik;
}

Eigen::VectorXd score(const LikelihoodContext& ctx, const ParamVector& params) {
    return evaluate(ctx, params.pack(), 1).score;
}

HessianReport hessian(const LikelihoodContext& ctx, const ParamVector& params, HessianMode mode) {
    HessianReport r;
    r.mode = mode;
    const Eigen::VectorXd zeta = params.pack();
    Eigen::MatrixXd H;
    if (mode == HessianMode::Analytic) {
        H = evaluate(ctx, zeta, 2).hessian;
    } else {
        const Eigen::Index P = zeta.size();
        H.resize(P, P);
        for (Eigen::Index i = 0; i < P; ++i) {
            const double h = 1e-5 * std::max(1.0, std::abs(zeta[i]));
            Eigen::VectorXd up = zeta, dn = zeta;
            up[i] += h;
            dn[i] -= h;
            H.col(i) = (evaluate(ctx, up, 1).score - evaluate(ctx, dn, 1).score) / (2.0 * h);
        }
    }
    const double scale = std::max(H.cwiseAbs().maxCoeff(), std::numeric_limits<double>::min());
    r.asymmetry = (H - H.transpose()).cwiseAbs().maxCoeff() / scale;
    r.asymmetry_warning = r.asymmetry > 1e-3;
    r.H = 0.5 * (H + H.transpose());
    return r;
}

Eigen::VectorXd observed_info_se(const Eigen::MatrixXd& hessian_at_max) {
    const Eigen::MatrixXd info = -hessian_at_max;
    Eigen::LLT<Eigen::MatrixXd> llt(info);
    if (llt.info() != Eigen::Success || !info.allFinite())
        throw SingularInformationError("observed information is not positive definite");
    const Eigen::MatrixXd cov = llt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
    Eigen::VectorXd se = cov.diagonal().cwiseSqrt();
    if (!se.allFinite() || (cov.diagonal().array() <= 0.0).any())
        throw SingularInformationError("observed information is numerically singular");
    return se;
}

}  // namespace qlsarma
