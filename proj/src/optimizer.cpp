#include "qlsarma/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "qlsarma/errors.hpp"

namespace qlsarma {

namespace {

struct Point {
    Eigen::VectorXd x;
    double f = -INFINITY;
    Eigen::VectorXd g;
    bool ok = false;
};

Point probe(const Objective& f, const Eigen::VectorXd& x) {
    Point p;
    p.x = x;
    try {
        p.f = f(x, &p.g);
        p.ok = std::isfinite(p.f) && p.g.allFinite();
    } catch (const Error&) {
        p.ok = false;
    }
    return p;
}

bool grad_small(const Point& p, double tol) {
    return p.g.cwiseAbs().maxCoeff() <= tol * (1.0 + std::abs(p.f));
}

/// Backtracking along d (an ascent direction for f). Returns the accepted point or !ok.
Point line_search(const Objective& f, const Point& cur, const Eigen::VectorXd& d) {
    constexpr double c1 = 1e-4;
    const double slope = cur.g.dot(d);
    double alpha = 1.0;
    for (int k = 0; k < 60; ++k) {
        Point next = probe(f, cur.x + alpha * d);
        if (next.ok && next.f >= cur.f + c1 * alpha * slope) return next;
        alpha *= next.ok ? 0.5 : 0.1;
    }
    return {};
}

}  // namespace

OptimizerResult maximize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerOptions& opts,
                         const HessianFn& hessian) {
    Point cur = probe(f, x0);
    if (!cur.ok) throw std::invalid_argument("objective is not finite at the starting point");
    const Eigen::Index n = x0.size();
    Eigen::MatrixXd Hinv = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, cur.g.cwiseAbs().maxCoeff());
    OptimizerResult res;
    bool fresh = true;
    int it = 0;
    for (; it < opts.max_iters; ++it) {
        if (grad_small(cur, opts.grad_tol)) {
            res.stop_reason = "gradient";
            break;
        }
        Eigen::VectorXd d = Hinv * cur.g;
        if (cur.g.dot(d) <= 0.0) {
            Hinv = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, cur.g.cwiseAbs().maxCoeff());
            d = Hinv * cur.g;
        }
        Point next = line_search(f, cur, d);
        if (!next.ok) {
            if (fresh) {
                res.stop_reason = "line search";
                break;
            }
            Hinv = Eigen::MatrixXd::Identity(n, n) / std::max(1.0, cur.g.cwiseAbs().maxCoeff());
            fresh = true;
            continue;
        }
        const Eigen::VectorXd s = next.x - cur.x;
        const Eigen::VectorXd y = cur.g - next.g;  // gradient change of -f
        cur = std::move(next);
        const double sy = s.dot(y);
        if (sy > 1e-12 * s.norm() * y.norm()) {
            if (fresh) Hinv = Eigen::MatrixXd::Identity(n, n) * (sy / y.squaredNorm());
            const double rho = 1.0 / sy;
            const Eigen::VectorXd Hy = Hinv * y;
            Hinv += (rho * rho * y.dot(Hy) + rho) * s * s.transpose() - rho * (Hy * s.transpose() + s * Hy.transpose());
            fresh = false;
        }
        if (s.cwiseAbs().maxCoeff() <= opts.step_tol * (1.0 + cur.x.cwiseAbs().maxCoeff())) {
            res.stop_reason = "step";
            ++it;
            break;
        }
    }
    if (res.stop_reason.empty()) res.stop_reason = "max iterations";

    if (hessian && !grad_small(cur, opts.grad_tol)) {
        for (int k = 0; k < opts.polish_iters; ++k) {
            Eigen::MatrixXd A;
            try {
                A = -hessian(cur.x);
            } catch (const Error&) {
                break;
            }
            if (!A.allFinite()) break;
            Eigen::LLT<Eigen::MatrixXd> llt(A);
            if (llt.info() != Eigen::Success) break;
            Point next = line_search(f, cur, llt.solve(cur.g));
            ++it;
            if (!next.ok) break;
            cur = std::move(next);
            if (grad_small(cur, opts.grad_tol)) {
                res.stop_reason = "gradient (newton)";
                break;
            }
        }
    }
    res.x = cur.x;
    res.f = cur.f;
    res.grad = cur.g;
    res.iterations = it;
    res.converged = grad_small(cur, opts.grad_tol);
    return res;
}

}  // namespace qlsarma
