#include "railhaz/bfgs.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace railhaz::opt {

Eigen::VectorXd numerical_gradient(objective const& f, Eigen::VectorXd const& x,
                                   double step_scale, long* eval_count) {
  auto const p = x.size();
  Eigen::VectorXd g(p);
  Eigen::VectorXd xs = x;
  for (Eigen::Index i = 0; i != p; ++i) {
    double const h = step_scale * (1.0 + std::fabs(x[i]));
    xs[i] = x[i] + h;
    double const fp = f(xs);
    xs[i] = x[i] - h;
    double const fm = f(xs);
    xs[i] = x[i];
    g[i] = (fp - fm) / (2.0 * h);
  }
  if (eval_count) {
    *eval_count += 2 * p;
  }
  return g;
}

Eigen::MatrixXd numerical_hessian(objective const& f, Eigen::VectorXd const& x,
                                  double step_scale) {
  auto const p = x.size();
  Eigen::MatrixXd h_mat(p, p);
  Eigen::VectorXd step(p);
  for (Eigen::Index i = 0; i != p; ++i) {
    step[i] = step_scale * (1.0 + std::fabs(x[i]));
  }
  double const f0 = f(x);
  Eigen::VectorXd xs = x;
  for (Eigen::Index i = 0; i != p; ++i) {
    xs[i] = x[i] + step[i];
    double const fp = f(xs);
    xs[i] = x[i] - step[i];
    double const fm = f(xs);
    xs[i] = x[i];
    h_mat(i, i) = (fp - 2.0 * f0 + fm) / (step[i] * step[i]);
  }
  for (Eigen::Index i = 0; i != p; ++i) {
    for (Eigen::Index j = i + 1; j != p; ++j) {
      xs[i] = x[i] + step[i];
      xs[j] = x[j] + step[j];
      double const fpp = f(xs);
      xs[j] = x[j] - step[j];
      double const fpm = f(xs);
      xs[i] = x[i] - step[i];
      double const fmm = f(xs);
      xs[j] = x[j] + step[j];
      double const fmp = f(xs);
      xs[i] = x[i];
      xs[j] = x[j];
      double const v = (fpp - fpm - fmp + fmm) / (4.0 * step[i] * step[j]);
      h_mat(i, j) = v;
      h_mat(j, i) = v;
    }
  }
  return h_mat;
}

bfgs_result minimize(objective const& f, Eigen::VectorXd const& x0,
                     bfgs_options const& opts) {
  auto const p = x0.size();
  bfgs_result res;
  res.x = x0;
  res.value = f(res.x);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) {
    throw std::invalid_argument{"objective is not finite at the start point"};
  }
  res.gradient = numerical_gradient(f, res.x, opts.grad_step, &res.evaluations);

  Eigen::MatrixXd hinv = Eigen::MatrixXd::Identity(p, p);
  constexpr double kArmijo = 1e-4;
  bool scaled = false;
  int stalls = 0;

  auto const grad_small = [&](double factor) {
    return res.gradient.cwiseAbs().maxCoeff() <
           factor * opts.grad_tol * (1.0 + std::fabs(res.value));
  };

  for (int it = 0; it != opts.max_iter; ++it) {
    if (grad_small(1.0)) {
      res.converged = true;
      break;
    }
    Eigen::VectorXd dir = -(hinv * res.gradient);
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      hinv.setIdentity();
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }

    // Until the metric is scaled the raw gradient sets the step length; cap
    // the very first move at unit length so a steep start cannot vault into
    // overflow territory.
    double alpha =
        scaled ? 1.0 : std::min(1.0, 1.0 / std::max(1.0, dir.norm()));
    double f_new = std::numeric_limits<double>::quiet_NaN();
    Eigen::VectorXd x_new;
    bool accepted = false;
    for (int back = 0; back != 40; ++back, alpha *= 0.5) {
      x_new = res.x + alpha * dir;
      f_new = f(x_new);
      ++res.evaluations;
      if (std::isfinite(f_new) && f_new <= res.value + kArmijo * alpha * slope) {
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      res.converged = grad_small(100.0);
      break;
    }

    Eigen::VectorXd const g_new =
        numerical_gradient(f, x_new, opts.grad_step, &res.evaluations);
    Eigen::VectorXd const s = x_new - res.x;
    Eigen::VectorXd const y = g_new - res.gradient;
    double const rel_drop =
        std::fabs(res.value - f_new) / (std::fabs(res.value) + 1.0);
    res.x = std::move(x_new);
    res.value = f_new;
    res.gradient = g_new;
    res.iterations = it + 1;

    double const sy = s.dot(y);
    double const yy = y.squaredNorm();
    if (sy > 1e-10 * s.norm() * y.norm()) {
      if (!scaled) {
        // Rescale the initial metric before the first update (Nocedal-Wright).
        hinv = (sy / yy) * Eigen::MatrixXd::Identity(p, p);
        scaled = true;
      }
      // Inverse-Hessian BFGS update.
      double const rho = 1.0 / sy;
      Eigen::VectorXd const hy = hinv * y;
      double const yhy = y.dot(hy);
      hinv += (rho * rho * yhy + rho) * (s * s.transpose());
      hinv -= rho * (hy * s.transpose() + s * hy.transpose());
    }

    if (rel_drop < opts.tol) {
      if (grad_small(100.0)) {
        res.converged = true;
        break;
      }
      // Objective stalled with a large gradient: the metric is bad; retry
      // from a rescaled identity a few times before giving up.
      if (++stalls >= 3) {
        break;
      }
      double const gamma = sy > 0.0 && yy > 0.0 ? sy / yy : 1.0;
      hinv = gamma * Eigen::MatrixXd::Identity(p, p);
    } else {
      stalls = 0;
    }
  }
  return res;
}

}  // namespace railhaz::opt
