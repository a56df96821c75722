#include "qlsarma/kernels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <mutex>
#include <numbers>
#include <sstream>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>
#include <boost/math/tools/roots.hpp>

#include "qlsarma/errors.hpp"
#include "quadrature.hpp"

namespace qlsarma {

namespace {

constexpr double kLog2 = std::numbers::ln2;

std::string lower(std::string_view s) {
    std::string out(s);
    std::transform(out.begin(), out.end(), out.begin(),
                   [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
    return out;
}

void require(bool ok, const std::string& msg) {
    if (!ok) throw ParameterError(msg);
}

/// S_n(x) = gamma_lower(a + n, x) / x^(a + n) = int_0^1 s^(a+n-1) e^(-x s) ds.
/// The slash generator is S_0(u / 2); derivatives in x are (-1)^n S_n.
double slash_s(double b, double x) {
    if (x == 0.0) return 1.0 / b;
    if (x < 1e-3) {
        double term = 1.0, sum = 0.0;
        for (int k = 0; k < 12; ++k) {
            sum += term / (b + k);
            term *= -x / (k + 1);
        }
        return sum;
    }
    const double p = boost::math::gamma_p(b, x);
    return std::exp(std::log(p) + boost::math::lgamma(b) - b * std::log(x));
}

double log_cosh(double z) {
    const double a = std::abs(z);
    return a + std::log1p(std::exp(-2.0 * a)) - kLog2;
}

/// log of (c + 4 sinh^2 z), stable for large |z|.
double log_c_plus_4sinh2(double c, double z) {
    const double a = std::abs(z);
    if (a < 20.0) {
        const double s = std::sinh(a);
        return std::log(c + 4.0 * s * s);
    }
    const double e = std::exp(-2.0 * a);
    return 2.0 * a + std::log((1.0 - e) * (1.0 - e) + c * e);
}

double log_g_value(const KernelFamily& f, double z) {
    const double u = z * z;
    const auto& x = f.extras();
    switch (f.kind()) {
        case KernelKind::Normal:
            return -0.5 * u;
        case KernelKind::StudentT:
            return -0.5 * (x[0] + 1.0) * std::log1p(u / x[0]);
        case KernelKind::PowerExponential:
            return -0.5 * std::pow(u, 1.0 / (1.0 + x[0]));
        case KernelKind::Hyperbolic:
            return -x[0] * std::sqrt(1.0 + u);
        case KernelKind::Slash:
            return std::log(slash_s(x[0] + 0.5, 0.5 * u));
        case KernelKind::ContaminatedNormal: {
            const double l1 = 0.5 * std::log(x[1]) - 0.5 * x[1] * u;
            const double l2 = std::log((1.0 - x[0]) / x[0]) - 0.5 * u;
            const double m = std::max(l1, l2);
            return m + std::log(std::exp(l1 - m) + std::exp(l2 - m));
        }
        case KernelKind::ExtendedBS: {
            const double s = std::sinh(z);
            return log_cosh(z) - 2.0 / (x[0] * x[0]) * s * s;
        }
        case KernelKind::ExtendedBSt:
            return log_cosh(z) -
                   0.5 * (x[1] + 1.0) * log_c_plus_4sinh2(x[1] * x[0] * x[0], z);
    }
    return 0.0;
}

double characteristic_scale(const KernelFamily& f) {
    const auto& x = f.extras();
    switch (f.kind()) {
        case KernelKind::Hyperbolic:
            return x[0] > 1.0 ? 1.0 / std::sqrt(x[0]) : 1.0 / x[0];
        case KernelKind::ContaminatedNormal:
            return 1.0 / std::sqrt(x[1]);
        case KernelKind::ExtendedBS:
            return std::asinh(0.5 * x[0]);
        case KernelKind::ExtendedBSt:
            return std::asinh(0.5 * x[0] * std::sqrt(x[1]));
        default:
            return 1.0;
    }
}

/// Derivatives in u for the kernels that are naturally written in w = sqrt(u).
GeneratorDerivs derivs_from_sqrt_form(const KernelFamily& f, double u) {
    auto first = [&f](double uu) {
        const double w = std::sqrt(uu);
        const LogGeneratorDerivs l = log_g_derivs(f, w);
        const double g = std::exp(l.value);
        // L'(w) / (2w) -> L''(0) / 2 as w -> 0
        const double ratio = w > 1e-8 ? l.d1 / (2.0 * w) : 0.5 * l.d2;
        return std::pair{g, g * ratio};
    };
    GeneratorDerivs out;
    const auto [g, dg] = first(u);
    out.g = g;
    out.dg = dg;
    const double scale = characteristic_scale(f);
    const double w = std::sqrt(u);
    const LogGeneratorDerivs l = log_g_derivs(f, w);
    if (w >= 1e-3 * scale) {
        const double r = l.d1 / (2.0 * w);
        out.d2g = g * (r * r + (l.d2 * w - l.d1) / (4.0 * w * w * w));
    } else {
        // (L'' w - L') / (4 w^3) -> L(0) / 12; L from a Richardson difference of L''
        const double h = 1e-2 * scale;
        const double l0 = log_g_derivs(f, 0.0).d2;
        const double d1 = 2.0 * (log_g_derivs(f, h).d2 - l0) / (h * h);
        const double d2 = 2.0 * (log_g_derivs(f, 2.0 * h).d2 - l0) / (4.0 * h * h);
        const double l4 = (4.0 * d1 - d2) / 3.0;
        const double r = w > 1e-8 ? l.d1 / (2.0 * w) : 0.5 * l.d2;
        out.d2g = g * (r * r + l4 / 12.0);
        out.d2g_finite_difference = true;
    }
    return out;
}

}  // namespace

// ---------------------------------------------------------------------------
// KernelFamily

KernelFamily::KernelFamily(KernelKind kind, std::vector<double> extras)
    : kind_(kind), extras_(std::move(extras)) {
    const std::size_t want = extras_count(kind_);
    if (extras_.size() != want) {
        std::ostringstream msg;
        msg << label() << " kernel expects " << want << " extra parameter(s), got "
            << extras_.size();
        throw ParameterError(msg.str());
    }
    for (double v : extras_) require(std::isfinite(v), label() + ": extras must be finite");
    const auto& x = extras_;
    switch (kind_) {
        case KernelKind::Normal:
            break;
        case KernelKind::StudentT:
        case KernelKind::Hyperbolic:
        case KernelKind::Slash:
        case KernelKind::ExtendedBS:
            require(x[0] > 0.0, label() + ": extra parameter must be > 0");
            break;
        case KernelKind::PowerExponential:
            require(x[0] > -1.0 && x[0] <= 1.0, label() + ": extra parameter must be in (-1, 1]");
            break;
        case KernelKind::ContaminatedNormal:
            require(x[0] > 0.0 && x[0] < 1.0 && x[1] > 0.0 && x[1] < 1.0,
                    label() + ": both extras must be in (0, 1)");
            break;
        case KernelKind::ExtendedBSt:
            require(x[0] > 0.0 && x[1] > 0.0, label() + ": both extras must be > 0");
            break;
    }
}

std::size_t KernelFamily::extras_count(KernelKind kind) {
    switch (kind) {
        case KernelKind::Normal:
            return 0;
        case KernelKind::ContaminatedNormal:
        case KernelKind::ExtendedBSt:
            return 2;
        default:
            return 1;
    }
}

KernelKind KernelFamily::parse_kind(std::string_view name) {
    std::string s = lower(name);
    if (s.rfind("log-", 0) == 0) s = s.substr(4);
    if (s == "normal" || s == "no") return KernelKind::Normal;
    if (s == "t" || s == "student" || s == "studentt" || s == "student-t") return KernelKind::StudentT;
    if (s == "pe" || s == "powerexp" || s == "power-exponential") return KernelKind::PowerExponential;
    if (s == "hp" || s == "hyperbolic") return KernelKind::Hyperbolic;
    if (s == "sl" || s == "slash") return KernelKind::Slash;
    if (s == "cn" || s == "nc" || s == "contnormal" || s == "contaminated-normal")
        return KernelKind::ContaminatedNormal;
    if (s == "ebs" || s == "sn" || s == "sinh-normal" || s == "extended-bs")
        return KernelKind::ExtendedBS;
    if (s == "ebs-t" || s == "ebst" || s == "st" || s == "sinh-t" || s == "extended-bs-t")
        return KernelKind::ExtendedBSt;
    throw ParameterError("unknown kernel '" + std::string(name) + "'");
}

std::string KernelFamily::label() const {
    switch (kind_) {
        case KernelKind::Normal: return "log-NO";
        case KernelKind::StudentT: return "log-t";
        case KernelKind::PowerExponential: return "log-PE";
        case KernelKind::Hyperbolic: return "log-HP";
        case KernelKind::Slash: return "log-SL";
        case KernelKind::ContaminatedNormal: return "log-CN";
        case KernelKind::ExtendedBS: return "EBS";
        case KernelKind::ExtendedBSt: return "EBS-t";
    }
    return "?";
}

std::string KernelFamily::name() const {
    switch (kind_) {
        case KernelKind::Normal: return "normal";
        case KernelKind::StudentT: return "t";
        case KernelKind::PowerExponential: return "pe";
        case KernelKind::Hyperbolic: return "hyperbolic";
        case KernelKind::Slash: return "slash";
        case KernelKind::ContaminatedNormal: return "cn";
        case KernelKind::ExtendedBS: return "ebs";
        case KernelKind::ExtendedBSt: return "ebs-t";
    }
    return "?";
}

// ---------------------------------------------------------------------------
// Generator functions

double g_eval(const KernelFamily& f, double u) {
    if (!(u >= 0.0)) throw DomainError("g(u) requires u >= 0");
    const auto& x = f.extras();
    switch (f.kind()) {
        case KernelKind::Normal:
            return std::exp(-0.5 * u);
        case KernelKind::StudentT:
            return std::pow(1.0 + u / x[0], -0.5 * (x[0] + 1.0));
        case KernelKind::PowerExponential:
            return std::exp(-0.5 * std::pow(u, 1.0 / (1.0 + x[0])));
        case KernelKind::Hyperbolic:
            return std::exp(-x[0] * std::sqrt(1.0 + u));
        case KernelKind::Slash:
            return slash_s(x[0] + 0.5, 0.5 * u);
        case KernelKind::ContaminatedNormal:
            return std::sqrt(x[1]) * std::exp(-0.5 * x[1] * u) +
                   (1.0 - x[0]) / x[0] * std::exp(-0.5 * u);
        case KernelKind::ExtendedBS: {
            const double w = std::sqrt(u);
            const double s = std::sinh(w);
            return std::cosh(w) * std::exp(-2.0 / (x[0] * x[0]) * s * s);
        }
        case KernelKind::ExtendedBSt: {
            const double w = std::sqrt(u);
            const double s = std::sinh(w);
            return std::cosh(w) *
                   std::pow(x[1] * x[0] * x[0] + 4.0 * s * s, -0.5 * (x[1] + 1.0));
        }
    }
    return 0.0;
}

GeneratorDerivs g_derivs(const KernelFamily& f, double u) {
    if (!(u >= 0.0)) throw DomainError("g(u) requires u >= 0");
    const auto& x = f.extras();
    GeneratorDerivs out;
    switch (f.kind()) {
        case KernelKind::Normal: {
            const double g = std::exp(-0.5 * u);
            out = {g, -0.5 * g, 0.25 * g};
            break;
        }
        case KernelKind::StudentT: {
            const double nu = x[0];
            const double e = 0.5 * (nu + 1.0);
            const double base = 1.0 + u / nu;
            const double g = std::pow(base, -e);
            out = {g, -e / nu * g / base, e * (e + 1.0) / (nu * nu) * g / (base * base)};
            break;
        }
        case KernelKind::PowerExponential: {
            const double c = 1.0 / (1.0 + x[0]);
            const double g = std::exp(-0.5 * std::pow(u, c));
            const double half_c = 0.5 * c;
            if (c == 1.0) {
                out = {g, -0.5 * g, 0.25 * g};
            } else {
                const double uc1 = std::pow(u, c - 1.0);
                out.g = g;
                out.dg = -half_c * uc1 * g;
                out.d2g = g * (half_c * half_c * uc1 * uc1 - half_c * (c - 1.0) * std::pow(u, c - 2.0));
            }
            break;
        }
        case KernelKind::Hyperbolic: {
            const double r = std::sqrt(1.0 + u);
            const double g = std::exp(-x[0] * r);
            out = {g, -0.5 * x[0] / r * g,
                   g * (0.25 * x[0] * x[0] / (r * r) + 0.25 * x[0] / (r * r * r))};
            break;
        }
        case KernelKind::Slash: {
            const double a = x[0] + 0.5;
            const double xx = 0.5 * u;
            out = {slash_s(a, xx), -0.5 * slash_s(a + 1.0, xx), 0.25 * slash_s(a + 2.0, xx)};
            break;
        }
        case KernelKind::ContaminatedNormal: {
            const double a = std::sqrt(x[1]) * std::exp(-0.5 * x[1] * u);
            const double b = (1.0 - x[0]) / x[0] * std::exp(-0.5 * u);
            out = {a + b, -0.5 * x[1] * a - 0.5 * b, 0.25 * x[1] * x[1] * a + 0.25 * b};
            break;
        }
        case KernelKind::ExtendedBS:
        case KernelKind::ExtendedBSt:
            out = derivs_from_sqrt_form(f, u);
            break;
    }
    return out;
}

LogGeneratorDerivs log_g_derivs(const KernelFamily& f, double z) {
    const auto& x = f.extras();
    const double u = z * z;
    LogGeneratorDerivs out;
    switch (f.kind()) {
        case KernelKind::Normal:
            out = {-0.5 * u, -z, -1.0};
            break;
        case KernelKind::StudentT: {
            const double nu = x[0];
            const double den = nu + u;
            out = {-0.5 * (nu + 1.0) * std::log1p(u / nu), -(nu + 1.0) * z / den,
                   -(nu + 1.0) * (nu - u) / (den * den)};
            break;
        }
        case KernelKind::PowerExponential: {
            const double c = 1.0 / (1.0 + x[0]);
            const double a = std::abs(z);
            const double sgn = z > 0.0 ? 1.0 : (z < 0.0 ? -1.0 : 0.0);
            out.value = -0.5 * std::pow(a, 2.0 * c);
            out.d1 = (a == 0.0 && c <= 0.5) ? 0.0 : -c * std::pow(a, 2.0 * c - 1.0) * sgn;
            if (c == 1.0) {
                out.d2 = -1.0;
            } else if (c == 0.5) {
                out.d2 = 0.0;
            } else {
                out.d2 = -c * (2.0 * c - 1.0) * std::pow(a, 2.0 * c - 2.0);
            }
            break;
        }
        case KernelKind::Hyperbolic: {
            const double r = std::sqrt(1.0 + u);
            out = {-x[0] * r, -x[0] * z / r, -x[0] / (r * r * r)};
            break;
        }
        case KernelKind::Slash: {
            const double a = x[0] + 0.5;
            const double xx = 0.5 * u;
            const double s0 = slash_s(a, xx);
            const double r1 = slash_s(a + 1.0, xx) / s0;
            const double r2 = slash_s(a + 2.0, xx) / s0;
            out = {std::log(s0), -z * r1, -r1 + u * (r2 - r1 * r1)};
            break;
        }
        case KernelKind::ContaminatedNormal: {
            const double l1 = 0.5 * std::log(x[1]) - 0.5 * x[1] * u;
            const double l2 = std::log((1.0 - x[0]) / x[0]) - 0.5 * u;
            const double m = std::max(l1, l2);
            const double e1 = std::exp(l1 - m);
            const double e2 = std::exp(l2 - m);
            const double p1 = e1 / (e1 + e2);
            const double p2 = 1.0 - p1;
            const double k1 = -0.5 * x[1];
            const double k2 = -0.5;
            const double m1 = p1 * k1 + p2 * k2;                // d log g / du
            const double m2 = p1 * k1 * k1 + p2 * k2 * k2 - m1 * m1;  // d^2 log g / du^2
            out = {m + std::log(e1 + e2), 2.0 * z * m1, 2.0 * m1 + 4.0 * u * m2};
            break;
        }
        case KernelKind::ExtendedBS: {
            const double k = 2.0 / (x[0] * x[0]);
            const double s = std::sinh(z);
            const double ch = std::cosh(z);
            out = {log_cosh(z) - k * s * s, std::tanh(z) - k * std::sinh(2.0 * z),
                   1.0 / (ch * ch) - 2.0 * k * std::cosh(2.0 * z)};
            break;
        }
        case KernelKind::ExtendedBSt: {
            const double c = x[1] * x[0] * x[0];
            const double e = 0.5 * (x[1] + 1.0);
            const double a = std::abs(z);
            const double sgn = z >= 0.0 ? 1.0 : -1.0;
            double r_sinh = 0.0;  // 4 sinh(2z) / D
            double r_cosh = 0.0;  // 8 cosh(2z) / D
            if (a < 20.0) {
                const double s = std::sinh(a);
                const double d = c + 4.0 * s * s;
                r_sinh = 4.0 * std::sinh(2.0 * a) / d;
                r_cosh = 8.0 * std::cosh(2.0 * a) / d;
            } else {
                const double ex = std::exp(-2.0 * a);
                const double dn = (1.0 - ex) * (1.0 - ex) + c * ex;
                r_sinh = 2.0 / dn;
                r_cosh = 4.0 / dn;
            }
            const double ch = std::cosh(std::min(a, 350.0));
            out = {log_cosh(z) - e * log_c_plus_4sinh2(c, z), std::tanh(z) - e * sgn * r_sinh,
                   1.0 / (ch * ch) - e * (r_cosh - r_sinh * r_sinh)};
            break;
        }
    }
    return out;
}

double normalization_constant(const KernelFamily& f, double tol) {
    if (!(tol > 0.0)) throw ParameterError("quadrature tolerance must be > 0");
    const auto& x = f.extras();
    switch (f.kind()) {
        case KernelKind::Normal:
            return 1.0 / std::sqrt(2.0 * std::numbers::pi);
        case KernelKind::StudentT: {
            const double nu = x[0];
            return std::exp(boost::math::lgamma(0.5 * (nu + 1.0)) - boost::math::lgamma(0.5 * nu) -
                            0.5 * std::log(nu * std::numbers::pi));
        }
        case KernelKind::PowerExponential: {
            const double h = 0.5 * (1.0 + x[0]);
            return 1.0 / (std::pow(2.0, h) * boost::math::tgamma(h) * (1.0 + x[0]));
        }
        default:
            break;
    }
    auto integrand = [&f](double z) { return std::isfinite(z) ? std::exp(log_g_value(f, z)) : 0.0; };
    const double half = detail::integrate_upper(integrand, 0.0, characteristic_scale(f), 1e-300,
                                                0.01 * tol, "normalization constant");
    return 1.0 / (2.0 * half);
}

// ---------------------------------------------------------------------------
// StandardKernel

namespace detail {

struct QuantileTable {
    std::vector<double> z;     // nodes, increasing from 0
    std::vector<double> s;     // log upper-tail probability, decreasing
    std::vector<double> dzds;  // slope of z in s
};

struct TableCache {
    std::once_flag once;
    std::unique_ptr<QuantileTable> table;
};

}  // namespace detail

StandardKernel::StandardKernel(KernelFamily family, double quadrature_tol)
    : family_(std::move(family)),
      quadrature_tol_(quadrature_tol),
      xi_nc_(normalization_constant(family_, quadrature_tol)),
      log_xi_nc_(std::log(xi_nc_)),
      scale_(characteristic_scale(family_)),
      cache_(std::make_shared<detail::TableCache>()) {}

double StandardKernel::weight_v(double z) const {
    const GeneratorDerivs d = derivs(z * z);
    return -2.0 * d.dg / d.g;
}

double StandardKernel::weight_v_derivative(double z) const {
    const GeneratorDerivs d = derivs(z * z);
    return -4.0 * z * (d.d2g * d.g - d.dg * d.dg) / (d.g * d.g);
}

double StandardKernel::density(double z) const { return xi_nc_ * std::exp(log_g_value(family_, z)); }

double StandardKernel::log_density(double z) const { return log_xi_nc_ + log_g_value(family_, z); }

double StandardKernel::upper_tail(double a) const {
    switch (family_.kind()) {
        case KernelKind::Normal:
            return 0.5 * boost::math::erfc(a / std::numbers::sqrt2);
        case KernelKind::StudentT:
            return boost::math::cdf(
                boost::math::complement(boost::math::students_t(family_.extra(0)), a));
        default:
            break;
    }
    if (a == 0.0) return 0.5;
    auto integrand = [this](double z) { return std::isfinite(z) ? density(z) : 0.0; };
    const double abs_tol = 0.1 * quadrature_tol_;
    if (a <= scale_) return 0.5 - detail::integrate(integrand, 0.0, a, abs_tol, 1e-13, "cdf");
    return detail::integrate_upper(integrand, a, scale_, abs_tol, 1e-13, "cdf");
}

double StandardKernel::sf(double w) const { return w >= 0.0 ? upper_tail(w) : 1.0 - upper_tail(-w); }

double StandardKernel::cdf(double w) const { return w >= 0.0 ? 1.0 - upper_tail(w) : upper_tail(-w); }

double StandardKernel::upper_quantile(double tail) const {
    if (tail >= 0.5) return 0.0;
    switch (family_.kind()) {
        case KernelKind::Normal:
            return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * tail);
        case KernelKind::StudentT:
            return boost::math::quantile(
                boost::math::complement(boost::math::students_t(family_.extra(0)), tail));
        default:
            break;
    }
    const double target = std::log(tail);
    auto f = [&](double a) { return std::log(upper_tail(a)) - target; };
    double lo = 0.0;
    double hi = scale_;
    while (f(hi) > 0.0) {
        lo = hi;
        hi *= 2.0;
        if (hi > 1e12) throw NumericError("quantile bracket expansion failed");
    }
    std::uintmax_t iters = 200;
    const auto [a, b] = boost::math::tools::toms748_solve(
        f, lo, hi, boost::math::tools::eps_tolerance<double>(50), iters);
    if (iters >= 200) throw NumericError("quantile root finding did not converge");
    return 0.5 * (a + b);
}

double StandardKernel::quantile(double prob) const {
    if (!(prob > 0.0 && prob < 1.0)) throw DomainError("quantile requires prob in (0, 1)");
    if (prob == 0.5) return 0.0;
    return prob < 0.5 ? -upper_quantile(prob) : upper_quantile(1.0 - prob);
}

const detail::QuantileTable& StandardKernel::table() const {
    std::call_once(cache_->once, [this] {
        constexpr std::size_t kNodes = 1024;
        constexpr double kTailMin = 1e-9;
        auto t = std::make_unique<detail::QuantileTable>();

        double z_max = scale_;
        while (upper_tail(z_max) > kTailMin) z_max *= 2.0;

        // sinh-spaced nodes: near-uniform for light tails, stretched for heavy ones
        const double d0 = std::min(z_max / (kNodes - 1), 0.01 * scale_);
        const double span = static_cast<double>(kNodes - 1);
        auto spacing_at_zero = [&](double h) { return z_max * h / std::sinh(h * span); };
        double h_lo = 1e-12, h_hi = 1.0;
        if (spacing_at_zero(h_lo) <= d0) {
            h_hi = h_lo;
        } else {
            for (int it = 0; it < 200; ++it) {
                const double mid = 0.5 * (h_lo + h_hi);
                (spacing_at_zero(mid) > d0 ? h_lo : h_hi) = mid;
            }
        }
        const double h = h_hi;
        t->z.resize(kNodes);
        for (std::size_t i = 0; i < kNodes; ++i) {
            t->z[i] = z_max * std::sinh(h * static_cast<double>(i)) / std::sinh(h * span);
        }
        t->z.back() = z_max;

        std::vector<double> tail(kNodes);
        tail.back() = upper_tail(z_max);
        const bool closed = family_.kind() == KernelKind::Normal || family_.kind() == KernelKind::StudentT;
        auto integrand = [this](double z) { return density(z); };
        for (std::size_t i = kNodes - 1; i-- > 0;) {
            tail[i] = closed ? upper_tail(t->z[i])
                             : tail[i + 1] + detail::integrate(integrand, t->z[i], t->z[i + 1],
                                                              0.1 * quadrature_tol_, 1e-13, "cdf table");
        }
        tail[0] = 0.5;
        t->s.resize(kNodes);
        t->dzds.resize(kNodes);
        for (std::size_t i = 0; i < kNodes; ++i) {
            t->s[i] = std::log(tail[i]);
            t->dzds[i] = -tail[i] / density(t->z[i]);
        }
        cache_->table = std::move(t);
    });
    return *cache_->table;
}

double StandardKernel::sample_one(Rng& rng) const {
    const double u = rng.uniform();
    if (u == 0.5) return 0.0;
    const double tail = u < 0.5 ? u : 1.0 - u;
    const double sign = u < 0.5 ? -1.0 : 1.0;
    const detail::QuantileTable& t = table();
    const double s = std::log(tail);
    if (s <= t.s.back()) return sign * upper_quantile(tail);

    // s is decreasing in the node index; find i with s[i] >= s > s[i+1]
    const auto it = std::upper_bound(t.s.begin(), t.s.end(), s, std::greater<>());
    const std::size_t i = static_cast<std::size_t>(it - t.s.begin()) - 1;
    const double s0 = t.s[i], s1 = t.s[i + 1];
    const double hseg = s1 - s0;
    const double x = (s - s0) / hseg;
    const double x2 = x * x, x3 = x2 * x;
    const double z = (2 * x3 - 3 * x2 + 1) * t.z[i] + (x3 - 2 * x2 + x) * hseg * t.dzds[i] +
                     (-2 * x3 + 3 * x2) * t.z[i + 1] + (x3 - x2) * hseg * t.dzds[i + 1];
    return sign * z;
}

std::vector<double> StandardKernel::sample(Rng& rng, std::size_t n) const {
    std::vector<double> out(n);
    for (auto& v : out) v = sample_one(rng);
    return out;
}

}  // namespace qlsarma
