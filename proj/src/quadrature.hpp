#pragma once

// Adaptive Gauss-Kronrod (G7/K15) integration. Internal header.

#include <algorithm>
#include <array>
#include <cmath>
#include <queue>
#include <sstream>
#include <vector>

#include "qlsarma/errors.hpp"

namespace qlsarma::detail {

struct GkPiece {
    double a, b, value, error;
    bool operator<(const GkPiece& o) const { return error < o.error; }
};

template <class F>
GkPiece gk15(F& f, double a, double b) {
    static constexpr std::array<double, 8> xk = {
        0.991455371120812639206854697526329, 0.949107912342758524526189684047851,
        0.864864423359769072789712788640926, 0.741531185599394439863864773280788,
        0.586087235467691130294144845693013, 0.405845151377397166906606412076961,
        0.207784955007898467600689403773245, 0.000000000000000000000000000000000};
    static constexpr std::array<double, 8> wk = {
        0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
        0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
        0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
        0.204432940075298892414161999234649, 0.209482141084727828012999174891714};
    static constexpr std::array<double, 4> wg = {
        0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
        0.381830050505118944950369775488975, 0.417959183673469387755102040816327};
    const double c = 0.5 * (a + b);
    const double h = 0.5 * (b - a);
    const double fc = f(c);
    double k = fc * wk[7];
    double g = fc * wg[3];
    for (int j = 0; j < 7; ++j) {
        const double dx = h * xk[j];
        const double s = f(c - dx) + f(c + dx);
        k += wk[j] * s;
        if (j % 2 == 1) g += wg[j / 2] * s;
    }
    return {a, b, k * h, std::abs((k - g) * h)};
}

/// Adaptive integral of f over the finite interval [a, b]. Subdivides the
/// piece with the largest error until the summed error is below
/// max(abs_tol, rel_tol * |I|).
template <class F>
double integrate(F&& f, double a, double b, double abs_tol, double rel_tol, const char* what) {
    if (a == b) return 0.0;
    std::priority_queue<GkPiece> heap;
    GkPiece first = gk15(f, a, b);
    double value = first.value;
    double error = first.error;
    heap.push(first);
    constexpr int kMaxPieces = 4000;
    for (int n = 1; error > std::max(abs_tol, rel_tol * std::abs(value)); ++n) {
        if (n >= kMaxPieces || !std::isfinite(value)) {
            std::ostringstream msg;
            msg << "quadrature did not converge for " << what << " on [" << a << ", " << b
                << "]: estimate " << value << ", error " << error;
            throw NumericError(msg.str());
        }
        const GkPiece worst = heap.top();
        heap.pop();
        const double mid = 0.5 * (worst.a + worst.b);
        const GkPiece left = gk15(f, worst.a, mid);
        const GkPiece right = gk15(f, mid, worst.b);
        value += left.value + right.value - worst.value;
        error += left.error + right.error - worst.error;
        heap.push(left);
        heap.push(right);
    }
    return value;
}

/// Integral of f over [a, inf). Finite pieces at a + scale * {1, 4, 16, 64}
/// resolve narrow peaks; the remaining tail uses z = b / s on (0, 1], which
/// keeps polynomial tails smooth.
template <class F>
double integrate_upper(F&& f, double a, double scale, double abs_tol, double rel_tol, const char* what) {
    double total = 0.0;
    double lo = a;
    for (double step : {1.0, 4.0, 16.0, 64.0}) {
        const double hi = a + step * scale;
        total += integrate(f, lo, hi, abs_tol, rel_tol, what);
        lo = hi;
    }
    const double b = lo;
    auto mapped = [&f, b](double s) { return s <= 0.0 ? 0.0 : f(b / s) * b / (s * s); };
    total += integrate(mapped, 0.0, 1.0, abs_tol, rel_tol, what);
    return total;
}

}  // namespace qlsarma::detail
