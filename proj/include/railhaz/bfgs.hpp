#pragma once

#include <Eigen/Dense>
#include <functional>

namespace railhaz::opt {

using objective = std::function<double(Eigen::VectorXd const&)>;

struct bfgs_options {
  int max_iter = 300;
  double tol = 1e-9;        // relative change of the objective
  double grad_tol = 1e-6;   // gradient sup-norm test, scaled by 1+|f|
  double grad_step = 1e-6;  // central-difference scale, h = step*(1+|x_i|)
};

struct bfgs_result {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  long evaluations = 0;
  bool converged = false;
};

/** Central finite-difference gradient with per-coordinate step h_i = scale*(1+|x_i|). */
Eigen::VectorXd numerical_gradient(objective const& f, Eigen::VectorXd const& x,
                                   double step_scale, long* eval_count = nullptr);

/** Symmetric finite-difference Hessian (4-point off-diagonal stencil). */
Eigen::MatrixXd numerical_hessian(objective const& f, Eigen::VectorXd const& x,
                                  double step_scale);

/** BFGS minimizer on the numerical gradient; backtracking Armijo line search. */
bfgs_result minimize(objective const& f, Eigen::VectorXd const& x0,
                     bfgs_options const& opts = {});

}  // namespace railhaz::opt
