#include <algorithm>
#include <cmath>
#include <numbers>

#include <boost/math/special_functions/erf.hpp>

#include "doctest.h"
#include "qlsarma/diagnostics.hpp"
#include "qlsarma/errors.hpp"
#include "test_support.hpp"

using namespace qlsarma;
using qlsarma::testing::draw_series;
using qlsarma::testing::representative_kernels;

namespace {

std::vector<double> ar1(double phi, std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<double> x(n);
    double prev = 0.0;
    for (std::size_t i = 0; i < 200 + n; ++i) {
        prev = phi * prev + rng.normal();
        if (i >= 200) x[i - 200] = prev;
    }
    return x;
}

}  // namespace

TEST_CASE("describe") {
    const Description d = describe({5, 3, 1, 4, 2});
    CHECK(d.mn == 3.0);
    CHECK(d.md == 3.0);
    CHECK(d.sd == doctest::Approx(1.5811388300841898).epsilon(1e-15));
    CHECK(d.min == 1.0);
    CHECK(d.max == 5.0);
    CHECK(*d.cv == doctest::Approx(100.0 * 1.5811388300841898 / 3.0).epsilon(1e-15));
    CHECK(d.n == 5);
    CHECK(describe({1, 2, 3, 4}).md == 2.5);

    const Description c = describe({2.0, 2.0, 2.0, 2.0});
    CHECK(c.sd == 0.0);
    CHECK_FALSE(c.cs.has_value());
    CHECK_FALSE(c.ck.has_value());
    CHECK_THROWS_AS((void)describe({1.0}), InputError);

    // k-statistic oracle for the adjusted skewness and kurtosis
    const std::vector<double> x{0.3, 1.9, -0.4, 2.2, 5.1, 0.0, 0.7, -1.3, 3.3};
    const double n = static_cast<double>(x.size());
    double mean = 0.0;
    for (double v : x) mean += v / n;
    double m2 = 0, m3 = 0, m4 = 0;
    for (double v : x) {
        m2 += std::pow(v - mean, 2) / n;
        m3 += std::pow(v - mean, 3) / n;
        m4 += std::pow(v - mean, 4) / n;
    }
    const double k2 = n / (n - 1) * m2;
    const double k3 = n * n / ((n - 1) * (n - 2)) * m3;
    const double k4 = n * n * ((n + 1) * m4 - 3 * (n - 1) * m2 * m2) / ((n - 1) * (n - 2) * (n - 3));
    const Description dx = describe(x);
    CHECK(*dx.cs == doctest::Approx(k3 / std::pow(k2, 1.5)).epsilon(1e-12));
    CHECK(*dx.ck == doctest::Approx(k4 / (k2 * k2)).epsilon(1e-12));

    std::vector<double> perm = x;
    std::reverse(perm.begin(), perm.end());
    const Description dp = describe(perm);
    CHECK(dp.md == dx.md);
    CHECK(dp.sd == doctest::Approx(dx.sd).epsilon(1e-15));
}

TEST_CASE("acf and pacf") {
    CHECK_THROWS_AS((void)acf_pacf({1.0, 1.0, 1.0}, 1), InputError);
    CHECK_THROWS_AS((void)acf_pacf({1.0, 2.0}, 2), InputError);

    // white noise: |acf| < 3 / sqrt(n) at >= 95% of lags overall
    int pass = 0, total = 0;
    for (int r = 0; r < 10; ++r) {
        Rng rng(100 + r);
        std::vector<double> w(10000);
        for (auto& v : w) v = rng.normal();
        const AcfPacf a = acf_pacf(w, 20);
        CHECK(a.acf[0] == 1.0);
        for (int k = 1; k <= 20; ++k, ++total) pass += std::abs(a.acf[k]) < 3.0 / 100.0;
    }
    CHECK(pass >= 0.95 * total);

    const std::vector<double> x = ar1(0.6, 100000, 5);
    const AcfPacf a = acf_pacf(x, 10);
    for (int k = 1; k <= 5; ++k) CHECK(std::abs(a.acf[k] - std::pow(0.6, k)) < 0.03);
    CHECK(std::abs(a.pacf[1] - 0.6) < 0.03);
    for (int k = 2; k <= 10; ++k) CHECK(std::abs(a.pacf[k]) < 0.03);

    // Durbin-Levinson against a direct Yule-Walker solve
    const std::vector<double> y = ar1(0.4, 300, 6);
    const AcfPacf b = acf_pacf(y, 6);
    for (int k = 1; k <= 6; ++k) {
        Eigen::MatrixXd R(k, k);
        Eigen::VectorXd rhs(k);
        for (int i = 0; i < k; ++i) {
            rhs[i] = b.acf[i + 1];
            for (int j = 0; j < k; ++j) R(i, j) = b.acf[std::abs(i - j)];
        }
        const Eigen::VectorXd sol = R.ldlt().solve(rhs);
        CHECK(std::abs(sol[k - 1] - b.pacf[k]) < 1e-10);
    }
}

TEST_CASE("residuals at the fitted median") {
    ModelSpec s;
    Eigen::VectorXd y(3);
    y << 1.0, 2.0, 3.0;
    const LikelihoodContext ctx(s, DesignData::with_intercepts(y, Eigen::MatrixXd(0, 0), Eigen::MatrixXd(0, 0)));
    FitResult f;
    f.spec = s;
    f.fitted_Q = y;
    f.kappa = Eigen::Vector3d(0.5, 1.0, 2.0);
    const ResidualReport r = residuals(f, ctx, 1);
    for (int t = 0; t < 3; ++t) {
        CHECK(r.gcs[t] == doctest::Approx(std::numbers::ln2).epsilon(1e-14));
        CHECK(std::abs(r.rq[t]) < 1e-14);
    }
}

TEST_CASE("residual properties under correct specification") {
    for (const auto& k : representative_kernels()) {
        for (double tau : {0.25, 0.75}) {
            ModelSpec s;
            s.p = 1;
            s.q = 1;
            s.k = 1;
            s.l = 1;
            s.tau_level = tau;
            s.kernel = k;
            ParamVector p = ParamVector::zeros(s);
            p.beta << 1.0, 0.7;
            const double sc = StandardKernel(k).scale();
            p.tau_coefs << std::log(0.3 / (sc * sc)), 0.5;
            p.phi << 0.6;
            p.theta << 0.3;
            const LikelihoodContext ctx(s, draw_series(s, p, 600, 44));
            const FitResult f = fit(ctx, FitConfig{});
            const ResidualReport r = residuals(f, ctx);
            CAPTURE(k.label());
            CAPTURE(tau);
            // RQ and GCS are tied elementwise
            for (Eigen::Index i = 0; i < r.rq.size(); ++i) {
                const double back = -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * (1.0 - std::exp(-r.gcs[i])));
                CHECK(std::abs(back - r.rq[i]) < 1e-10 * std::max(1.0, std::abs(r.rq[i])));
            }
            // share of observations below the fitted quantile
            int below = 0;
            for (Eigen::Index t = 1; t < ctx.data().n(); ++t) below += ctx.data().y[t] <= f.fitted_Q[t];
            const double nu = static_cast<double>(ctx.n_used());
            CHECK(std::abs(below / nu - tau) < 3.0 / std::sqrt(nu));
            CHECK(std::abs(r.stats_gcs.mn - 1.0) < 0.2);
            CHECK(std::abs(r.stats_rq.sd - 1.0) < 0.2);
        }
    }
}

TEST_CASE("qq envelope") {
    double inside = 0.0;
    int reps = 0;
    for (int r = 0; r < 40; ++r) {
        Rng data(200 + r);
        std::vector<double> e(150);
        for (auto& v : e) v = data.normal();
        Rng sim(900 + r);
        const QqEnvelope q = qq_envelope(e, EnvelopeTarget::StdNormal, 60, sim);
        inside += static_cast<double>(q.inside) / 150.0;
        ++reps;
    }
    CHECK(inside / reps >= 0.95);

    Rng data(3);
    std::vector<double> ex(100);
    for (auto& v : ex) v = -std::log(data.uniform());
    Rng a(1), b(1);
    const QqEnvelope qa = qq_envelope(ex, EnvelopeTarget::StdExponential, 39, a);
    const QqEnvelope qb = qq_envelope(ex, EnvelopeTarget::StdExponential, 39, b);
    CHECK(qa.lo == qb.lo);
    CHECK(qa.hi == qb.hi);
    CHECK(qa.theoretical[0] == doctest::Approx(-std::log1p(-0.005)).epsilon(1e-15));

    std::vector<double> shifted = ex;
    for (auto& v : shifted) v += 2.0;
    Rng c(1);
    CHECK(qq_envelope(shifted, EnvelopeTarget::StdExponential, 39, c).inside < 50);
    Rng d(1);
    CHECK_THROWS_AS((void)qq_envelope(ex, EnvelopeTarget::StdNormal, 10, d), InputError);
}
