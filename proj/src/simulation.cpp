#include "qlsarma/simulation.hpp"

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <map>
#include <thread>

#include "qlsarma/distribution.hpp"
#include "qlsarma/errors.hpp"

namespace qlsarma {

Eigen::VectorXd simulate_series(const ModelSpec& spec, const ParamVector& truth, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& W, Rng& rng) {
    return simulate_series(spec, truth, X, W, rng, StandardKernel(spec.kernel));
}

Eigen::VectorXd simulate_series(const ModelSpec& spec, const ParamVector& truth, const Eigen::MatrixXd& X,
                                const Eigen::MatrixXd& W, Rng& rng, const StandardKernel& kernel) {
    spec.validate();
    truth.check_shape(spec);
    if (!(kernel.family() == spec.kernel)) throw ParameterError("kernel does not match the model specification");
    const Eigen::Index n = X.rows();
    if (W.rows() != n || X.cols() != spec.k + 1 || W.cols() != spec.l + 1)
        throw ShapeError("simulation designs do not match the model");
    if (n <= spec.m()) throw ShapeError("series length must exceed max(p, q)");
    const LinkFunctions h{spec.mean_link};
    const LinkFunctions d{spec.disp_link};
    const double z_tau = kernel.quantile(spec.tau_level);
    const Eigen::VectorXd xb = X * truth.beta;
    Eigen::VectorXd y(n), hy(n), r = Eigen::VectorXd::Zero(n);
    for (Eigen::Index t = 0; t < n; ++t) {
        double eta = xb[t];
        if (t >= spec.m()) {
            for (int i = 1; i <= spec.p; ++i) eta += truth.phi[i - 1] * (hy[t - i] - xb[t - i]);
            for (int j = 1; j <= spec.q; ++j) eta += truth.theta[j - 1] * r[t - j];
        }
        const double Q = h.inverse(eta);
        const double kappa = d.inverse(W.row(t).dot(truth.tau_coefs));
        if (!std::isfinite(eta) || !(Q > 0.0) || !std::isfinite(Q) || !(kappa > 0.0) || !std::isfinite(kappa))
            throw NumericError("simulated predictor is not finite", static_cast<std::size_t>(t));
        const QlsDistribution law(Q, kappa, spec.tau_level, kernel, z_tau);
        y[t] = law.sample_one(rng);
        if (!(y[t] > 0.0) || !std::isfinite(y[t]))
            throw NumericError("simulated response is not positive and finite", static_cast<std::size_t>(t));
        hy[t] = h.apply(y[t]);
        if (t >= spec.m()) r[t] = hy[t] - eta;
    }
    return y;
}

void McDesign::validate() const {
    spec.validate();
    truth.check_shape(spec);
    fit_config.validate();
    if (replications < 1) throw ParameterError("replications must be >= 1");
    if (n_grid.empty() || tau_grid.empty() || kernels.empty()) throw ParameterError("design grids must be non-empty");
    for (int n : n_grid)
        if (n <= spec.m() + spec.n_params() + 1) throw ParameterError("every n must exceed m + n_params + 1");
    for (double t : tau_grid)
        if (!(t > 0.0 && t < 1.0)) throw ParameterError("tau levels must lie in (0, 1)");
    if (covariate_law == CovariateLaw::Fixed) {
        const int nmax = *std::max_element(n_grid.begin(), n_grid.end());
        if (fixed_x.rows() < nmax || fixed_x.cols() != spec.k || fixed_w.rows() < nmax || fixed_w.cols() != spec.l)
            throw ShapeError("fixed covariates must have max(n) rows and k / l columns");
    }
}

namespace {

struct Outcome {
    bool ok = false;
    Eigen::VectorXd estimate;
    ResidualSummary gcs, rq;
};

ResidualSummary summarize(const Description& d) {
    return {d.mn, d.md, d.sd, d.cs.value_or(NAN), d.ck.value_or(NAN)};
}

void designs(const McDesign& dz, int n, Rng& rng, Eigen::MatrixXd& X, Eigen::MatrixXd& W) {
    X.resize(n, dz.spec.k + 1);
    W.resize(n, dz.spec.l + 1);
    X.col(0).setOnes();
    W.col(0).setOnes();
    if (dz.covariate_law == CovariateLaw::Fixed) {
        X.rightCols(dz.spec.k) = dz.fixed_x.topRows(n);
        W.rightCols(dz.spec.l) = dz.fixed_w.topRows(n);
        return;
    }
    for (int t = 0; t < n; ++t)
        for (int c = 1; c <= dz.spec.k; ++c) X(t, c) = rng.uniform();
    for (int t = 0; t < n; ++t)
        for (int c = 1; c <= dz.spec.l; ++c) W(t, c) = rng.uniform();
}

}  // namespace

McReport run_mc(const McDesign& dz) {
    dz.validate();
    const std::size_t nk = dz.kernels.size(), nt = dz.tau_grid.size(), nn = dz.n_grid.size();
    const std::size_t R = static_cast<std::size_t>(dz.replications);
    const int nmax = *std::max_element(dz.n_grid.begin(), dz.n_grid.end());
    std::vector<StandardKernel> kernels;
    for (const auto& k : dz.kernels) kernels.emplace_back(k);

    // a task is one (kernel, tau, replication) series; nested designs fit every n on it
    const std::size_t n_tasks = nk * nt * (dz.nested_samples ? 1 : nn) * R;
    std::vector<Outcome> outcomes(nk * nt * nn * R);
    auto cell_index = [&](std::size_t k, std::size_t t, std::size_t i) { return (k * nt + t) * nn + i; };

    auto run_one = [&](std::size_t k, std::size_t ti, std::size_t ni, std::size_t r) {
        ModelSpec spec = dz.spec;
        spec.kernel = dz.kernels[k];
        spec.tau_level = dz.tau_grid[ti];
        const int n = dz.n_grid[ni];
        const int n_draw = dz.nested_samples ? nmax : n;
        const std::uint64_t stream = dz.nested_samples
                                         ? (k * nt + ti) * R + r
                                         : cell_index(k, ti, ni) * R + r;
        Rng rng = Rng::stream(dz.seed, stream);
        Eigen::MatrixXd X, W;
        Eigen::VectorXd y;
        try {
            designs(dz, n_draw, rng, X, W);
            y = simulate_series(spec, dz.truth, X, W, rng, kernels[k]);
        } catch (const Error&) {
            return;
        }
        const std::vector<std::size_t> which = dz.nested_samples ? [&] {
            std::vector<std::size_t> all(nn);
            for (std::size_t i = 0; i < nn; ++i) all[i] = i;
            return all;
        }() : std::vector<std::size_t>{ni};
        for (std::size_t i : which) {
            const int m = dz.n_grid[i];
            Outcome& o = outcomes[cell_index(k, ti, i) * R + r];
            try {
                DesignData d;
                d.y = y.head(m);
                d.X = X.topRows(m);
                d.W = W.topRows(m);
                const LikelihoodContext ctx(spec, std::move(d), kernels[k]);
                FitConfig cfg = dz.fit_config;
                cfg.compute_se = false;
                const FitResult f = fit(ctx, cfg);
                const ResidualReport rr = residuals(f, ctx, 1);
                o.estimate = f.params.pack();
                o.gcs = summarize(rr.stats_gcs);
                o.rq = summarize(rr.stats_rq);
                o.ok = true;
            } catch (const Error&) {
            }
        }
    };
    auto run_task = [&](std::size_t task) {
        const std::size_t r = task % R;
        std::size_t rest = task / R;
        std::size_t ni = 0;
        if (!dz.nested_samples) {
            ni = rest % nn;
            rest /= nn;
        }
        const std::size_t ti = rest % nt;
        const std::size_t k = rest / nt;
        run_one(k, ti, ni, r);
    };

    unsigned threads = dz.threads ? dz.threads : std::max(1u, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, n_tasks));
    if (threads <= 1) {
        for (std::size_t t = 0; t < n_tasks; ++t) run_task(t);
    } else {
        std::atomic<std::size_t> next{0};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < threads; ++w) {
            pool.emplace_back([&] {
                for (std::size_t t = next++; t < n_tasks; t = next++) run_task(t);
            });
        }
        for (auto& th : pool) th.join();
    }

    McReport rep;
    rep.param_names = ParamVector::names(dz.spec);
    const Eigen::VectorXd truth = dz.truth.pack();
    for (std::size_t k = 0; k < nk; ++k) {
        for (std::size_t ti = 0; ti < nt; ++ti) {
            for (std::size_t ni = 0; ni < nn; ++ni) {
                McCell c;
                c.n = dz.n_grid[ni];
                c.tau = dz.tau_grid[ti];
                c.kernel = dz.kernels[k];
                c.replications = dz.replications;
                c.mean_estimate = Eigen::VectorXd::Zero(truth.size());
                c.mse = Eigen::VectorXd::Zero(truth.size());
                std::array<double, 5> g{}, q{};
                std::array<int, 5> gn{}, qn{};
                auto acc = [](std::array<double, 5>& s, std::array<int, 5>& cnt, const ResidualSummary& v) {
                    const double vals[5] = {v.mn, v.md, v.sd, v.cs, v.ck};
                    for (int i = 0; i < 5; ++i)
                        if (std::isfinite(vals[i])) {
                            s[i] += vals[i];
                            ++cnt[i];
                        }
                };
                for (std::size_t r = 0; r < R; ++r) {
                    const Outcome& o = outcomes[cell_index(k, ti, ni) * R + r];
                    if (!o.ok) continue;
                    ++c.converged;
                    const Eigen::VectorXd e = o.estimate - truth;
                    c.mean_estimate += o.estimate;
                    c.mse += e.cwiseAbs2();
                    acc(g, gn, o.gcs);
                    acc(q, qn, o.rq);
                }
                if (c.converged > 0) {
                    c.mean_estimate /= c.converged;
                    c.mse /= c.converged;
                }
                c.bias = c.mean_estimate - truth;
                auto avg = [](const std::array<double, 5>& s, const std::array<int, 5>& cnt) {
                    auto f = [&](int i) { return cnt[i] ? s[i] / cnt[i] : NAN; };
                    return ResidualSummary{f(0), f(1), f(2), f(3), f(4)};
                };
                c.gcs = avg(g, gn);
                c.rq = avg(q, qn);
                c.low_convergence = c.converged < 0.8 * c.replications;
                rep.cells.push_back(std::move(c));
            }
        }
    }
    return rep;
}

}  // namespace qlsarma
