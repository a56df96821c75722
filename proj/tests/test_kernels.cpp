#include <cmath>
#include <numbers>

#include <boost/math/special_functions/bessel.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "doctest.h"
#include "qlsarma/errors.hpp"
#include "qlsarma/kernels.hpp"
#include "test_support.hpp"

using namespace qlsarma;
using qlsarma::testing::central_diff;
using qlsarma::testing::representative_kernels;

namespace {

// Independent closed forms of the integral of g(z^2) over the real line,
// obtained by substitution (sinh for the EBS pair, cosh for the hyperbolic,
// the mixture representation for the slash).
double closed_form_mass(const KernelFamily& f) {
    const double root2pi = std::sqrt(2.0 * std::numbers::pi);
    const auto& x = f.extras();
    switch (f.kind()) {
        case KernelKind::Normal:
            return root2pi;
        case KernelKind::StudentT:
            return std::sqrt(x[0] * std::numbers::pi) * std::tgamma(x[0] / 2) / std::tgamma((x[0] + 1) / 2);
        case KernelKind::PowerExponential:
            return std::pow(2.0, (1 + x[0]) / 2) * std::tgamma((1 + x[0]) / 2) * (1 + x[0]);
        case KernelKind::Hyperbolic:
            return 2.0 * boost::math::cyl_bessel_k(1, x[0]);
        case KernelKind::Slash:
            return root2pi / x[0];
        case KernelKind::ContaminatedNormal:
            return root2pi / x[0];
        case KernelKind::ExtendedBS:
            return root2pi * x[0] / 2.0;
        case KernelKind::ExtendedBSt: {
            const double c = x[1] * x[0] * x[0];
            const double nu = x[1];
            return std::sqrt(c) / 2.0 * std::pow(c, -(nu + 1) / 2) * std::sqrt(std::numbers::pi) *
                   std::tgamma(nu / 2) / std::tgamma((nu + 1) / 2);
        }
    }
    return 0.0;
}

}  // namespace

TEST_CASE("generator values") {
    CHECK(g_eval(KernelFamily::normal(), 0.0) == 1.0);
    CHECK(g_eval(KernelFamily::student_t(4.0), 4.0) == doctest::Approx(std::pow(2.0, -2.5)).epsilon(1e-14));
    CHECK(g_eval(KernelFamily(KernelKind::Hyperbolic, {1.0}), 3.0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-14));
    for (const auto& k : representative_kernels()) {
        for (double u : {0.0, 0.01, 0.5, 2.0, 9.0}) {
            CAPTURE(k.label());
            CHECK(g_eval(k, u) >= 0.0);
            // the log form agrees with the direct form
            CHECK(std::exp(log_g_derivs(k, std::sqrt(u)).value) == doctest::Approx(g_eval(k, u)).epsilon(1e-12));
        }
        CHECK(g_eval(k, 0.0) > 0.0);
    }
}

TEST_CASE("generator extras are validated") {
    CHECK_THROWS_AS(KernelFamily(KernelKind::StudentT, {0.0}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::StudentT, {}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::PowerExponential, {-1.0}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::PowerExponential, {1.5}), ParameterError);
    CHECK_NOTHROW(KernelFamily(KernelKind::PowerExponential, {1.0}));
    CHECK_THROWS_AS(KernelFamily(KernelKind::ContaminatedNormal, {0.3, 1.0}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::ContaminatedNormal, {0.0, 0.5}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::ExtendedBSt, {0.1, -4.0}), ParameterError);
    CHECK_THROWS_AS(KernelFamily(KernelKind::Slash, {std::nan("")}), ParameterError);
    CHECK_THROWS_AS((void)KernelFamily::parse_kind("gumbel"), ParameterError);
    CHECK(KernelFamily::parse_kind("log-t") == KernelKind::StudentT);
    CHECK(KernelFamily::parse_kind("EBS-t") == KernelKind::ExtendedBSt);
    CHECK_THROWS_AS((void)g_eval(KernelFamily::normal(), -1.0), DomainError);
}

TEST_CASE("generator derivatives") {
    CHECK(g_derivs(KernelFamily::normal(), 0.0).dg == -0.5);
    CHECK(g_derivs(KernelFamily::student_t(4.0), 0.0).dg == doctest::Approx(-0.625));

    for (const auto& k : representative_kernels()) {
        for (double u : {0.1, 1.0, 10.0}) {
            CAPTURE(k.label());
            CAPTURE(u);
            const GeneratorDerivs d = g_derivs(k, u);
            const double h = 1e-4 * std::max(1.0, u);
            const double fd1 = central_diff([&](double x) { return g_eval(k, x); }, u, h);
            const double fd2 = central_diff([&](double x) { return g_derivs(k, x).dg; }, u, h);
            CHECK(std::abs(d.dg - fd1) / std::max(1.0, std::abs(d.dg)) < 1e-6);
            CHECK(std::abs(d.d2g - fd2) / std::max(1.0, std::abs(d.d2g)) < 1e-5);
            CHECK(!d.d2g_finite_difference);
        }
    }
    // the sqrt-form kernels fall back to differencing right at the origin
    CHECK(g_derivs(KernelFamily(KernelKind::ExtendedBS, {0.5}), 0.0).d2g_finite_difference);
}

TEST_CASE("log-generator derivatives match finite differences") {
    for (const auto& k : representative_kernels()) {
        for (double z : {-2.5, -0.7, 0.3, 1.1, 3.0}) {
            // keep the narrow EBS kernels inside their effective support
            const double zz = (k.kind() == KernelKind::ExtendedBS || k.kind() == KernelKind::ExtendedBSt) ? z / 10 : z;
            CAPTURE(k.label());
            CAPTURE(zz);
            const LogGeneratorDerivs d = log_g_derivs(k, zz);
            const double fd1 = central_diff([&](double x) { return log_g_derivs(k, x).value; }, zz, 1e-4);
            const double fd2 = central_diff([&](double x) { return log_g_derivs(k, x).d1; }, zz, 1e-4);
            CHECK(std::abs(d.d1 - fd1) / std::max(1.0, std::abs(d.d1)) < 1e-7);
            CHECK(std::abs(d.d2 - fd2) / std::max(1.0, std::abs(d.d2)) < 1e-6);
        }
    }
}

TEST_CASE("weight v") {
    const StandardKernel normal(KernelFamily::normal());
    for (double z : {-3.0, 0.0, 0.4, 7.0}) CHECK(normal.weight_v(z) == 1.0);
    const StandardKernel t4(KernelFamily::student_t(4.0));
    CHECK(t4.weight_v(0.0) == doctest::Approx(1.25));
    const StandardKernel pe(KernelFamily(KernelKind::PowerExponential, {0.5}));
    CHECK(pe.weight_v(1.0) == doctest::Approx(1.0 / 1.5));

    for (const auto& f : representative_kernels()) {
        const StandardKernel k(f);
        for (double zs : {-1.3, 0.2, 0.9}) {
            const double z = zs * k.scale();
            CAPTURE(f.label());
            const GeneratorDerivs d = g_derivs(f, z * z);
            // bitwise: same expression on the same inputs
            CHECK(k.weight_v(z) == -2.0 * d.dg / d.g);
            // v(z) = -L'(z) / z
            CHECK(k.weight_v(z) == doctest::Approx(-log_g_derivs(f, z).d1 / z).epsilon(1e-9));
            const double fd = central_diff([&](double x) { return k.weight_v(x); }, z, 1e-4 * k.scale());
            CHECK(std::abs(k.weight_v_derivative(z) - fd) / std::max(1.0, std::abs(fd)) < 1e-5);
        }
    }
}

TEST_CASE("normalization constants") {
    CHECK(normalization_constant(KernelFamily::normal()) == doctest::Approx(0.3989422804014327).epsilon(1e-15));
    CHECK(normalization_constant(KernelFamily::student_t(4.0)) == doctest::Approx(0.375).epsilon(1e-14));
    CHECK_THROWS_AS((void)normalization_constant(KernelFamily::normal(), 0.0), ParameterError);
    for (const auto& f : representative_kernels()) {
        CAPTURE(f.label());
        const double xi = normalization_constant(f);
        CHECK(std::abs(xi * closed_form_mass(f) - 1.0) < 1e-9);
    }
    // a few off-design extras
    for (const auto& f : {KernelFamily(KernelKind::Slash, {0.7}), KernelFamily(KernelKind::Hyperbolic, {4.0}),
                          KernelFamily(KernelKind::ExtendedBS, {2.0}), KernelFamily(KernelKind::ExtendedBSt, {1.5, 2.0}),
                          KernelFamily(KernelKind::PowerExponential, {-0.5})}) {
        CAPTURE(f.label());
        CHECK(std::abs(normalization_constant(f) * closed_form_mass(f) - 1.0) < 1e-9);
    }
}

TEST_CASE("standard cdf and quantile") {
    const StandardKernel normal(KernelFamily::normal());
    const StandardKernel t4(KernelFamily::student_t(4.0));
    CHECK(normal.cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(t4.cdf(2.776445105197793) == doctest::Approx(0.975).epsilon(1e-12));
    CHECK(normal.quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));

    for (const auto& f : representative_kernels()) {
        const StandardKernel k(f);
        CAPTURE(f.label());
        CHECK(k.cdf(0.0) == 0.5);
        CHECK(k.quantile(0.5) == 0.0);
        double prev = 0.0;
        for (double w = -4.0; w <= 4.0; w += 0.25) {
            const double ws = w * k.scale();
            const double c = k.cdf(ws);
            CHECK(c >= prev);
            prev = c;
            CHECK(std::abs(k.cdf(-ws) + c - 1.0) < 1e-9);
            CHECK(std::abs(k.sf(ws) - (1.0 - c)) < 1e-12);
        }
        for (int i = 1; i <= 99; i += 7) {
            const double p = i / 100.0;
            CHECK(std::abs(k.cdf(k.quantile(p)) - p) < 1e-9);
        }
        // derivative of the CDF is the density
        const double z = 0.8 * k.scale();
        const double fd = central_diff([&](double x) { return k.cdf(x); }, z, 1e-3 * k.scale());
        CHECK(fd == doctest::Approx(k.density(z)).epsilon(1e-6));
    }
    CHECK_THROWS_AS((void)normal.quantile(0.0), DomainError);
    CHECK_THROWS_AS((void)normal.quantile(1.0), DomainError);
}

TEST_CASE("standard sampling") {
    const StandardKernel normal(KernelFamily::normal());
    Rng rng(42);
    auto xs = normal.sample(rng, 100000);
    std::nth_element(xs.begin(), xs.begin() + 50000, xs.end());
    CHECK(std::abs(xs[50000]) < 0.01);

    for (const auto& f : representative_kernels()) {
        const StandardKernel k(f);
        CAPTURE(f.label());
        Rng r(7);
        const auto draws = k.sample(r, 20000);
        const double below = static_cast<double>(std::count_if(draws.begin(), draws.end(), [](double x) { return x <= 0; }));
        CHECK(std::abs(below / draws.size() - 0.5) < 0.012);
        CHECK(testing::ks_statistic(draws, [&](double x) { return k.cdf(x); }) < 0.015);

        // reproducible given the seed
        Rng a(99), b(99);
        CHECK(k.sample(a, 50) == k.sample(b, 50));

        // the interpolated inverse is close to the exact one
        Rng c(5);
        for (int i = 0; i < 20; ++i) {
            Rng probe = c;
            const double u = probe.uniform();
            const double z = k.sample_one(c);
            CHECK(std::abs(z - k.quantile(u)) < 1e-6 * std::max(1.0, std::abs(z)));
        }
    }
}
