#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qlsarma/rng.hpp"

namespace qlsarma {

/// The eight symmetric density generators of the log-symmetric family.
enum class KernelKind {
    Normal,
    StudentT,
    PowerExponential,
    Hyperbolic,
    Slash,
    ContaminatedNormal,
    ExtendedBS,
    ExtendedBSt,
};

/**
 * @brief A density generator g(.) together with its fixed extra parameter(s).
 *
 * Extras per kind:
 *   Normal                none
 *   StudentT              nu > 0
 *   PowerExponential      -1 < xi <= 1
 *   Hyperbolic            nu > 0
 *   Slash                 nu > 0
 *   ContaminatedNormal    (nu1, nu2), both in (0, 1)
 *   ExtendedBS            alpha > 0
 *   ExtendedBSt           (alpha, nu), both > 0
 *
 * Construction with a wrong number of extras or out-of-domain values throws
 * ParameterError.
 */
class KernelFamily {
public:
    KernelFamily(KernelKind kind, std::vector<double> extras);

    static KernelFamily normal() { return {KernelKind::Normal, {}}; }
    static KernelFamily student_t(double nu) { return {KernelKind::StudentT, {nu}}; }

    /// Parses "normal", "t", "log-t", "pe", "slash", ... (case-insensitive).
    static KernelKind parse_kind(std::string_view name);
    static std::size_t extras_count(KernelKind kind);

    [[nodiscard]] KernelKind kind() const noexcept { return kind_; }
    [[nodiscard]] const std::vector<double>& extras() const noexcept { return extras_; }
    [[nodiscard]] double extra(std::size_t i) const { return extras_.at(i); }

    /// Short display label such as "log-NO" or "log-t".
    [[nodiscard]] std::string label() const;
    /// Machine name accepted by parse_kind.
    [[nodiscard]] std::string name() const;

    friend bool operator==(const KernelFamily&, const KernelFamily&) = default;

private:
    KernelKind kind_;
    std::vector<double> extras_;
};

/// g(u) and its first two derivatives with respect to u.
struct GeneratorDerivs {
    double g = 0.0;
    double dg = 0.0;
    double d2g = 0.0;
    /// d2g came from a central difference of the analytic dg.
    bool d2g_finite_difference = false;
};

/// L(z) = log g(z^2) and its first two derivatives with respect to z.
struct LogGeneratorDerivs {
    double value = 0.0;
    double d1 = 0.0;
    double d2 = 0.0;
};

/// g(u) for u >= 0.
double g_eval(const KernelFamily& family, double u);
GeneratorDerivs g_derivs(const KernelFamily& family, double u);
/// Log-generator in the symmetric variable z; numerically stable in the tails.
LogGeneratorDerivs log_g_derivs(const KernelFamily& family, double z);

/// 1 / integral of g(z^2) over the real line: closed form for Normal, StudentT
/// and PowerExponential, adaptive Gauss-Kronrod otherwise.
double normalization_constant(const KernelFamily& family, double tol = 1e-10);

namespace detail {
struct QuantileTable;
struct TableCache;
}  // namespace detail

/**
 * @brief The standardized symmetric law with density xi_nc * g(z^2).
 *
 * Immutable once constructed. The inverse-CDF table used by sample() is
 * built on first use and shared between copies; building it is thread-safe.
 */
class StandardKernel {
public:
    explicit StandardKernel(KernelFamily family, double quadrature_tol = 1e-10);

    [[nodiscard]] const KernelFamily& family() const noexcept { return family_; }
    [[nodiscard]] double xi_nc() const noexcept { return xi_nc_; }
    [[nodiscard]] double log_xi_nc() const noexcept { return log_xi_nc_; }
    [[nodiscard]] double quadrature_tol() const noexcept { return quadrature_tol_; }
    /// Rough width of the density, used to place integration breakpoints and brackets.
    [[nodiscard]] double scale() const noexcept { return scale_; }

    [[nodiscard]] double g(double u) const { return g_eval(family_, u); }
    [[nodiscard]] GeneratorDerivs derivs(double u) const { return g_derivs(family_, u); }
    [[nodiscard]] LogGeneratorDerivs log_derivs(double z) const { return log_g_derivs(family_, z); }

    /// v(z) = -2 g'(z^2) / g(z^2).
    [[nodiscard]] double weight_v(double z) const;
    /// dv/dz, i.e. -4 z [g'' g - g'^2] / g^2 evaluated at u = z^2.
    [[nodiscard]] double weight_v_derivative(double z) const;

    [[nodiscard]] double density(double z) const;
    [[nodiscard]] double log_density(double z) const;
    /// G(w); satisfies G(-w) = 1 - G(w) by construction.
    [[nodiscard]] double cdf(double w) const;
    /// 1 - G(w), accurate in the upper tail.
    [[nodiscard]] double sf(double w) const;
    /// G^{-1}(prob) for prob in (0, 1).
    [[nodiscard]] double quantile(double prob) const;

    /// i.i.d. draws via the cached inverse-CDF table.
    std::vector<double> sample(Rng& rng, std::size_t n) const;
    double sample_one(Rng& rng) const;

private:
    double upper_tail(double a) const;            // sf(a) for a >= 0
    double upper_quantile(double tail) const;     // a >= 0 with sf(a) = tail
    const detail::QuantileTable& table() const;

    KernelFamily family_;
    double quadrature_tol_;
    double xi_nc_;
    double log_xi_nc_;
    double scale_;
    std::shared_ptr<detail::TableCache> cache_;
};

}  // namespace qlsarma
