#pragma once

#include <string>
#include <vector>

#include <Eigen/Dense>

namespace railhaz::cox {

// One counting-process interval: the train is observed over distance
// (entry, exit] within its stratum (= event order number), with covariates
// held constant over the interval. event marks the interval whose endpoint
// is an observed primary delay.
struct cox_row {
  std::string train_id;
  int stratum = 1;
  double entry = 0.0;
  double exit = 0.0;
  bool event = false;
  Eigen::VectorXd x;
};

struct cox_dataset {
  std::vector<cox_row> rows;
  std::vector<std::string> covariate_names;
  int k_max = 0;  // largest per-train event count

  std::size_t dim() const {
    return rows.empty() ? covariate_names.size()
                        : static_cast<std::size_t>(rows.front().x.size());
  }
  std::size_t n_events() const;
  void validate() const;
};

// Breslow cumulative baseline hazard of one stratum: a nondecreasing step
// function with steps at the event distances, 0 before the first.
struct baseline_hazard {
  int stratum = 0;
  std::vector<double> knots;
  std::vector<double> cumhaz;

  double at(double t) const;
};

struct cox_fit {
  Eigen::VectorXd beta;
  Eigen::MatrixXd covariance;
  double loglik = 0.0;
  double null_loglik = 0.0;
  std::vector<baseline_hazard> baseline;
  int iterations = 0;
  bool converged = false;
  std::vector<std::string> covariate_names;

  baseline_hazard const* baseline_for(int stratum) const;
};

struct fit_options {
  int max_iter = 100;
  double tol = 1e-9;  // on |dloglik| / (|loglik| + 1)
  double ridge = 0.0;
};

struct survival_curve {
  int stratum = 0;
  std::vector<double> grid;
  std::vector<double> survival;
};

// Log partial likelihood at beta. Risk sets form within each stratum at
// every event distance t as {rows : entry < t <= exit}; tied event
// distances use the Breslow approximation.
double partial_loglik(Eigen::VectorXd const& beta, cox_dataset const& data);

// Analytic first and second derivatives of the log partial likelihood.
// information is the negated Hessian (positive semidefinite).
void score_and_information(Eigen::VectorXd const& beta,
                           cox_dataset const& data, Eigen::VectorXd& gradient,
                           Eigen::MatrixXd& information);

// Newton-Raphson from beta = 0 with step halving. Non-convergence is
// reported through converged=false on the last iterate; a singular
// information matrix throws (suggesting the ridge option).
cox_fit fit_cox(cox_dataset const& data, fit_options const& opts = {});

// S(t) = exp(-H0j(t) * exp(beta' x)) evaluated on the given grid.
survival_curve predict_survival(cox_fit const& fit, Eigen::VectorXd const& x,
                                int stratum, std::vector<double> grid);

}  // namespace railhaz::cox
