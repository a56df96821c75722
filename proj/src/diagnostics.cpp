#include "qlsarma/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <boost/math/special_functions/erf.hpp>

#include "qlsarma/distribution.hpp"
#include "qlsarma/errors.hpp"

namespace qlsarma {

namespace {

double normal_quantile(double p) { return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p); }

}  // namespace

Description describe(const std::vector<double>& x) {
    if (x.size() < 2) throw InputError("describe needs at least two values");
    Description d;
    d.n = x.size();
    const double n = static_cast<double>(d.n);
    std::vector<double> s = x;
    std::sort(s.begin(), s.end());
    d.min = s.front();
    d.max = s.back();
    d.md = d.n % 2 ? s[d.n / 2] : 0.5 * (s[d.n / 2 - 1] + s[d.n / 2]);
    d.mn = std::accumulate(x.begin(), x.end(), 0.0) / n;
    double m2 = 0.0, m3 = 0.0, m4 = 0.0;
    for (double v : x) {
        const double e = v - d.mn;
        m2 += e * e;
        m3 += e * e * e;
        m4 += e * e * e * e;
    }
    d.sd = std::sqrt(m2 / (n - 1.0));
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if (m2 > 0.0) {
        if (d.n >= 3) d.cs = std::sqrt(n * (n - 1.0)) / (n - 2.0) * m3 / std::pow(m2, 1.5);
        if (d.n >= 4) d.ck = (n - 1.0) / ((n - 2.0) * (n - 3.0)) * ((n + 1.0) * (m4 / (m2 * m2) - 3.0) + 6.0);
    }
    if (d.mn != 0.0) d.cv = 100.0 * d.sd / d.mn;
    return d;
}

AcfPacf acf_pacf(const std::vector<double>& x, std::size_t max_lag) {
    const std::size_t n = x.size();
    if (max_lag >= n) throw InputError("max_lag must be smaller than the series length");
    const double mean = std::accumulate(x.begin(), x.end(), 0.0) / static_cast<double>(n);
    std::vector<double> c(max_lag + 1, 0.0);
    for (std::size_t k = 0; k <= max_lag; ++k) {
        for (std::size_t t = k; t < n; ++t) c[k] += (x[t] - mean) * (x[t - k] - mean);
        c[k] /= static_cast<double>(n);
    }
    if (!(c[0] > 0.0)) throw InputError("autocorrelation of a constant series is undefined");
    AcfPacf out;
    out.acf.resize(max_lag + 1);
    for (std::size_t k = 0; k <= max_lag; ++k) out.acf[k] = c[k] / c[0];
    out.acf[0] = 1.0;

    out.pacf.assign(max_lag + 1, 0.0);
    out.pacf[0] = 1.0;
    std::vector<double> phi(max_lag + 1, 0.0), prev(max_lag + 1, 0.0);
    double v = 1.0;
    for (std::size_t k = 1; k <= max_lag; ++k) {
        double num = out.acf[k];
        for (std::size_t j = 1; j < k; ++j) num -= prev[j] * out.acf[k - j];
        const double a = num / v;
        phi[k] = a;
        for (std::size_t j = 1; j < k; ++j) phi[j] = prev[j] - a * prev[k - j];
        v *= 1.0 - a * a;
        out.pacf[k] = a;
        prev = phi;
    }
    return out;
}

ResidualReport residuals(const FitResult& fit, const LikelihoodContext& ctx, std::size_t max_lag) {
    constexpr double eps = 1e-15;
    const int m = fit.spec.m();
    const Eigen::Index n = ctx.data().n();
    if (fit.fitted_Q.size() != n || fit.kappa.size() != n) throw ShapeError("fit does not match the context data");
    ResidualReport r;
    r.gcs.resize(n - m);
    r.rq.resize(n - m);
    for (Eigen::Index t = m; t < n; ++t) {
        const QlsDistribution law(fit.fitted_Q[t], fit.kappa[t], fit.spec.tau_level, ctx.kernel(), ctx.z_tau());
        double s = law.sf(ctx.data().y[t]);
        if (s < eps || s > 1.0 - eps) {
            s = std::clamp(s, eps, 1.0 - eps);
            ++r.clamped;
        }
        r.gcs[t - m] = -std::log(s);
        r.rq[t - m] = -normal_quantile(s);
    }
    r.stats_gcs = describe(to_std(r.gcs));
    r.stats_rq = describe(to_std(r.rq));
    try {
        r.rq_correlation = acf_pacf(to_std(r.rq), std::min<std::size_t>(max_lag, static_cast<std::size_t>(r.rq.size()) - 1));
    } catch (const InputError&) {
    }
    return r;
}

QqEnvelope qq_envelope(const std::vector<double>& resid, EnvelopeTarget target, std::size_t n_sim, Rng& rng,
                       double level) {
    if (n_sim < 19) throw InputError("qq_envelope needs n_sim >= 19");
    if (resid.empty()) throw InputError("qq_envelope needs residuals");
    if (!(level > 0.0 && level < 1.0)) throw InputError("envelope level must lie in (0, 1)");
    const std::size_t n = resid.size();
    auto draw = [&]() { return target == EnvelopeTarget::StdNormal ? rng.normal() : -std::log(rng.uniform()); };
    auto quant = [&](double p) { return target == EnvelopeTarget::StdNormal ? normal_quantile(p) : -std::log1p(-p); };

    std::vector<std::vector<double>> by_rank(n, std::vector<double>(n_sim));
    std::vector<double> sample(n);
    for (std::size_t s = 0; s < n_sim; ++s) {
        for (auto& v : sample) v = draw();
        std::sort(sample.begin(), sample.end());
        for (std::size_t i = 0; i < n; ++i) by_rank[i][s] = sample[i];
    }
    const double alpha = 1.0 - level;
    const std::size_t j = std::max<std::size_t>(1, static_cast<std::size_t>(std::floor((static_cast<double>(n_sim) + 1.0) * alpha / 2.0)));

    QqEnvelope e;
    e.observed = resid;
    std::sort(e.observed.begin(), e.observed.end());
    e.theoretical.resize(n);
    e.lo.resize(n);
    e.hi.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
        e.theoretical[i] = quant((static_cast<double>(i) + 0.5) / static_cast<double>(n));
        auto& col = by_rank[i];
        std::sort(col.begin(), col.end());
        e.lo[i] = col[j - 1];
        e.hi[i] = col[n_sim - j];
        if (e.observed[i] >= e.lo[i] && e.observed[i] <= e.hi[i]) ++e.inside;
    }
    return e;
}

}  // namespace qlsarma
