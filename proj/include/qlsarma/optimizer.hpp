#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace qlsarma {

struct OptimizerOptions {
    int max_iters = 500;
    double grad_tol = 1e-6;   ///< stop when max|grad| <= grad_tol * (1 + |f|)
    double step_tol = 1e-10;  ///< stop when max|step| <= step_tol * (1 + max|x|)
    int polish_iters = 20;    ///< Newton steps after BFGS when a Hessian is supplied
};

struct OptimizerResult {
    Eigen::VectorXd x;
    double f = 0.0;
    Eigen::VectorXd grad;
    int iterations = 0;
    bool converged = false;
    std::string stop_reason;
};

/// f(x) and, if grad != nullptr, its gradient. Throwing or returning a
/// non-finite value marks x as infeasible; the line search backs off.
using Objective = std::function<double(const Eigen::VectorXd& x, Eigen::VectorXd* grad)>;
using HessianFn = std::function<Eigen::MatrixXd(const Eigen::VectorXd& x)>;

/**
 * @brief Maximizes f by BFGS on -f with a backtracking Armijo line search.
 *
 * Accepted steps never decrease f. The inverse-Hessian approximation is reset
 * to a scaled identity after a failed line search; a second consecutive failure
 * stops the run. When `hessian` is given, Newton steps with the same line
 * search finish the run. Throws std::invalid_argument if f(x0) is infeasible.
 */
OptimizerResult maximize(const Objective& f, const Eigen::VectorXd& x0, const OptimizerOptions& opts,
                         const HessianFn& hessian = nullptr);

}  // namespace qlsarma
