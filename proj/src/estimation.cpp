#include "qlsarma/estimation.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "qlsarma/errors.hpp"
#include "qlsarma/optimizer.hpp"
#include "qlsarma/rng.hpp"

namespace qlsarma {

void FitConfig::validate() const {
    if (!(grad_tol > 0.0) || !(step_tol > 0.0)) throw ParameterError("fit tolerances must be > 0");
    if (max_iters < 1) throw ParameterError("max_iters must be >= 1");
    if (multistart < 1) throw ParameterError("multistart must be >= 1");
}

InformationCriteria information_criteria(double loglik, int n_params, Eigen::Index n_used) {
    const double k = n_params;
    const double n = static_cast<double>(n_used);
    if (n <= k + 1.0) {
        std::ostringstream msg;
        msg << "CAIC undefined: n_used = " << n_used << " must exceed n_params + 1 = " << n_params + 1;
        throw InputError(msg.str());
    }
    InformationCriteria ic;
    ic.aic = -2.0 * loglik + 2.0 * k;
    ic.bic = -2.0 * loglik + k * std::log(n);
    ic.caic = -2.0 * loglik + 2.0 * k * n / (n - k - 1.0);
    ic.hqic = -2.0 * loglik + 2.0 * k * std::log(std::log(n));
    return ic;
}

namespace {

/// OLS of y on the columns of A; returns nullopt when A is rank deficient.
std::optional<Eigen::VectorXd> ols(const Eigen::MatrixXd& A, const Eigen::VectorXd& y) {
    if (A.rows() <= A.cols()) return std::nullopt;
    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(A);
    if (qr.rank() < A.cols()) return std::nullopt;
    return Eigen::VectorXd(qr.solve(y));
}

double median(std::vector<double> v) {
    const std::size_t h = v.size() / 2;
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h), v.end());
    double m = v[h];
    if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(h)));
    return m;
}

bool well_inside(const std::vector<double>& phi, const std::vector<double>& theta) {
    const StationarityReport r = check_stationarity(phi, theta);
    auto ok = [](const std::vector<std::complex<double>>& roots) {
        return std::all_of(roots.begin(), roots.end(), [](const auto& z) { return std::abs(z) >= 1.02; });
    };
    return ok(r.ar_roots) && ok(r.ma_roots);
}

void project(Eigen::VectorXd& phi, Eigen::VectorXd& theta) {
    for (int k = 0; k < 200 && !well_inside(to_std(phi), to_std(theta)); ++k) {
        phi *= 0.95;
        theta *= 0.95;
    }
}

/// Lagged regressors e_{t-1..t-p}, a_{t-1..t-q} for t in [start, n).
Eigen::MatrixXd lag_matrix(const Eigen::VectorXd& e, const Eigen::VectorXd& a, int p, int q, Eigen::Index start) {
    const Eigen::Index rows = e.size() - start;
    Eigen::MatrixXd M(rows, p + q);
    for (Eigen::Index r = 0; r < rows; ++r) {
        const Eigen::Index t = start + r;
        for (int i = 1; i <= p; ++i) M(r, i - 1) = e[t - i];
        for (int j = 1; j <= q; ++j) M(r, p + j - 1) = a[t - j];
    }
    return M;
}

/// Hannan-Rissanen: long autoregression for innovations, then regression on lags.
void hannan_rissanen(const Eigen::VectorXd& e, int p, int q, Eigen::VectorXd& phi, Eigen::VectorXd& theta) {
    phi = Eigen::VectorXd::Zero(p);
    theta = Eigen::VectorXd::Zero(q);
    if (p + q == 0) return;
    const Eigen::Index n = e.size();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    Eigen::Index start = p;
    if (q > 0) {
        const int L = static_cast<int>(std::min<double>(std::floor(n / 4.0), std::max(p + q + 2.0, std::ceil(10.0 * std::log10(n)))));
        if (L < 1) return;
        const Eigen::MatrixXd M = lag_matrix(e, a, L, 0, L);
        const auto ar = ols(M, e.tail(n - L));
        if (!ar) return;
        a.tail(n - L) = e.tail(n - L) - M * (*ar);
        start = L + q;
        if (start < p) start = p;
    }
    if (start >= n) return;
    const auto coef = ols(lag_matrix(e, a, p, q, start), e.tail(n - start));
    if (!coef) return;
    phi = coef->head(p);
    theta = coef->tail(q);
}

}  // namespace

ParamVector initialize(const ModelSpec& spec, const DesignData& data) {
    spec.validate();
    data.validate(spec);
    const LinkFunctions h{spec.mean_link};
    const Eigen::Index n = data.n();
    Eigen::VectorXd hy(n);
    for (Eigen::Index t = 0; t < n; ++t) hy[t] = h.apply(data.y[t]);

    Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(data.X);
    qr.setThreshold(1e-10);
    if (qr.rank() < data.X.cols()) {
        std::ostringstream msg;
        msg << "mean design matrix is rank deficient (rank " << qr.rank() << " of " << data.X.cols()
            << "); dependent column(s):";
        for (Eigen::Index i = qr.rank(); i < data.X.cols(); ++i) {
            const Eigen::Index c = qr.colsPermutation().indices()[i];
            msg << ' ' << (c == 0 ? std::string("intercept") : "x" + std::to_string(c));
        }
        throw CollinearityError(msg.str());
    }
    ParamVector prm = ParamVector::zeros(spec);
    prm.beta = qr.solve(hy);
    const Eigen::VectorXd e = hy - data.X * prm.beta;

    hannan_rissanen(e, spec.p, spec.q, prm.phi, prm.theta);
    if (!prm.phi.allFinite() || !prm.theta.allFinite()) {
        prm.phi.setZero();
        prm.theta.setZero();
    }
    project(prm.phi, prm.theta);

    // innovations of the ARMA fit to e, then a robust, kernel-aware scale
    const int m = spec.m();
    Eigen::VectorXd a = Eigen::VectorXd::Zero(n);
    std::vector<double> used;
    for (Eigen::Index t = m; t < n; ++t) {
        double v = e[t];
        for (int i = 1; i <= spec.p; ++i) v -= prm.phi[i - 1] * e[t - i];
        for (int j = 1; j <= spec.q; ++j) v -= prm.theta[j - 1] * a[t - j];
        a[t] = v;
        used.push_back(v);
    }
    const double med = median(used);
    for (double& v : used) v = std::abs(v - med);
    const StandardKernel kernel(spec.kernel);
    double root_kappa = median(used) / kernel.quantile(0.75);
    const double sd = std::sqrt(e.squaredNorm() / static_cast<double>(n));
    root_kappa = std::max(root_kappa, 1e-4 * std::max(sd, 1e-8));
    prm.tau_coefs[0] = 2.0 * std::log(root_kappa);

    // move the intercept from the centre to the tau-quantile
    const double c = root_kappa * kernel.quantile(spec.tau_level);
    prm.beta[0] += c * (1.0 + prm.theta.sum()) / (1.0 - prm.phi.sum());
    return prm;
}

namespace {

ParamVector perturb(const ModelSpec& spec, const ParamVector& base, Rng& rng) {
    ParamVector p = base;
    for (Eigen::Index i = 0; i < p.beta.size(); ++i) p.beta[i] += 0.1 * (1.0 + std::abs(p.beta[i])) * rng.normal();
    for (Eigen::Index i = 0; i < p.tau_coefs.size(); ++i) p.tau_coefs[i] += 0.2 * rng.normal();
    for (Eigen::Index i = 0; i < spec.p; ++i) p.phi[i] += 0.1 * rng.normal();
    for (Eigen::Index i = 0; i < spec.q; ++i) p.theta[i] += 0.1 * rng.normal();
    project(p.phi, p.theta);
    return p;
}

struct Branch {
    OptimizerResult opt;
    int index = 0;
};

}  // namespace

FitResult fit(const LikelihoodContext& ctx, const FitConfig& config, const std::optional<ParamVector>& start) {
    config.validate();
    const ModelSpec& spec = ctx.spec();
    const ParamVector base = start ? *start : initialize(spec, ctx.data());
    base.check_shape(spec);

    const Objective objective = [&ctx](const Eigen::VectorXd& z, Eigen::VectorXd* g) {
        LikelihoodEval ev = evaluate(ctx, z, g ? 1 : 0);
        if (g) *g = std::move(ev.score);
        return ev.loglik;
    };
    const HessianFn hess = [&ctx](const Eigen::VectorXd& z) { return evaluate(ctx, z, 2).hessian; };
    OptimizerOptions opts;
    opts.max_iters = config.max_iters;
    opts.grad_tol = config.grad_tol;
    opts.step_tol = config.step_tol;

    std::optional<Branch> best;
    std::string last_error;
    for (int s = 0; s < config.multistart; ++s) {
        ParamVector x0 = base;
        if (s > 0) {
            Rng rng = Rng::stream(config.seed, static_cast<std::uint64_t>(s));
            x0 = perturb(spec, base, rng);
        }
        try {
            OptimizerResult r = maximize(objective, x0.pack(), opts, hess);
            const bool better = !best || (r.converged && !best->opt.converged) ||
                                (r.converged == best->opt.converged && r.f > best->opt.f);
            if (better) best = Branch{std::move(r), s};
        } catch (const std::invalid_argument& e) {
            last_error = e.what();
        } catch (const Error& e) {
            last_error = e.what();
        }
    }
    if (!best) throw ConvergenceError("no start produced a finite log-likelihood: " + last_error);
    if (!best->opt.converged) {
        std::ostringstream msg;
        msg << "no start converged; best log-likelihood " << best->opt.f << " with max|score| "
            << best->opt.grad.cwiseAbs().maxCoeff() << " after " << best->opt.iterations << " iterations ("
            << best->opt.stop_reason << ")";
        throw ConvergenceError(msg.str());
    }

    FitResult res;
    res.spec = spec;
    res.params = ParamVector::unpack(spec, best->opt.x);
    res.loglik = best->opt.f;
    res.n_used = ctx.n_used();
    res.criteria = information_criteria(res.loglik, spec.n_params(), res.n_used);
    const RecursionState st = run_recursion(spec, ctx.data(), res.params);
    res.fitted_Q = st.Q;
    res.kappa = st.kappa;
    res.innovations = st.innov;
    res.converged = true;
    res.iterations = best->opt.iterations;
    res.score_max = best->opt.grad.cwiseAbs().maxCoeff();
    res.start_index = best->index;
    res.stationarity = check_stationarity(to_std(res.params.phi), to_std(res.params.theta));
    if (!res.stationarity.stationary) res.warnings.emplace_back("fitted AR polynomial is not stationary");
    if (!res.stationarity.invertible) res.warnings.emplace_back("fitted MA polynomial is not invertible");
    if (config.compute_se) {
        const HessianReport hr = hessian(ctx, res.params, config.hessian_mode);
        if (hr.asymmetry_warning) res.warnings.emplace_back("Hessian asymmetry above 1e-3");
        try {
            res.se = observed_info_se(hr.H);
        } catch (const SingularInformationError& e) {
            res.warnings.emplace_back(e.what());
        }
    }
    return res;
}

std::vector<ProfileEntry> fit_profile(const ModelSpec& spec, const DesignData& data, const FitConfig& config,
                                      const std::vector<double>& tau_grid) {
    const StandardKernel kernel(spec.kernel);
    std::vector<ProfileEntry> out;
    std::optional<ParamVector> warm;
    for (double tau : tau_grid) {
        ProfileEntry e;
        e.tau = tau;
        try {
            ModelSpec s = spec;
            s.tau_level = tau;
            const LikelihoodContext ctx(s, data, kernel);
            e.result = fit(ctx, config, warm);
            warm = e.result->params;
        } catch (const Error& err) {
            e.error = err.what();
        }
        out.push_back(std::move(e));
    }
    return out;
}

double criterion_value(const InformationCriteria& ic, Criterion c) {
    switch (c) {
        case Criterion::AIC: return ic.aic;
        case Criterion::BIC: return ic.bic;
        case Criterion::CAIC: return ic.caic;
        case Criterion::HQIC: return ic.hqic;
    }
    return ic.aic;
}

Criterion parse_criterion(const std::string& name) {
    if (name == "aic" || name == "AIC") return Criterion::AIC;
    if (name == "bic" || name == "BIC") return Criterion::BIC;
    if (name == "caic" || name == "CAIC") return Criterion::CAIC;
    if (name == "hqic" || name == "HQIC") return Criterion::HQIC;
    throw ParameterError("unknown criterion '" + name + "'");
}

ExtrasGridResult select_extras(const ModelSpec& spec, const DesignData& data, const FitConfig& config,
                               const std::vector<std::vector<double>>& grid, Criterion criterion) {
    ExtrasGridResult out;
    double best = INFINITY;
    for (const auto& extras : grid) {
        ModelSpec s = spec;
        s.kernel = KernelFamily(spec.kernel.kind(), extras);
        out.extras.push_back(extras);
        try {
            const LikelihoodContext ctx(s, data);
            out.fits.emplace_back(fit(ctx, config));
            const double v = criterion_value(out.fits.back()->criteria, criterion);
            if (v < best) {
                best = v;
                out.best = out.fits.size() - 1;
            }
        } catch (const NumericError&) {
            out.fits.emplace_back(std::nullopt);
        }
    }
    if (!std::isfinite(best)) throw ConvergenceError("no candidate extras produced a converged fit");
    return out;
}

double quantile_crossing_fraction(const FitResult& lower, const FitResult& upper) {
    if (lower.fitted_Q.size() != upper.fitted_Q.size()) throw ShapeError("fits cover different series");
    Eigen::Index count = 0, total = 0;
    for (Eigen::Index t = 0; t < lower.fitted_Q.size(); ++t) {
        if (std::isnan(lower.fitted_Q[t]) || std::isnan(upper.fitted_Q[t])) continue;
        ++total;
        if (lower.fitted_Q[t] > upper.fitted_Q[t]) ++count;
    }
    return total == 0 ? 0.0 : static_cast<double>(count) / static_cast<double>(total);
}

}  // namespace qlsarma
