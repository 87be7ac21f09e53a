#pragma once

#include <Eigen/Dense>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace railhaz::ctmc {

/** One panel observation; x covers the interval to the next observation. */
struct panel_obs {
  double km = 0.0;
  int state = 1;  // 1..q
  Eigen::VectorXd x;
};

struct panel_path {
  std::string train_id;
  std::vector<panel_obs> observations;
};

struct intensity_spec {
  int q = 2;
  std::vector<std::pair<int, int>> transitions;  // allowed (r,s), 1-based
  std::optional<double> changepoint;             // t0 in km
  bool split_covariates = false;  // separate beta per segment (needs changepoint)
  std::vector<std::string> covariate_names;

  std::size_t n_covariates() const { return covariate_names.size(); }
  std::size_t n_transitions() const { return transitions.size(); }
  std::size_t param_count() const;
  /** Flattened parameter names, e.g. "q12.log_q0", "q12.beta.temperature_c". */
  std::vector<std::string> param_names() const;
  static intensity_spec two_state(std::vector<std::string> covariate_names,
                                  std::optional<double> changepoint,
                                  bool split_covariates = false);
  void validate() const;
};

struct ctmc_params {
  std::vector<double> log_q0;              // per transition
  std::vector<Eigen::VectorXd> beta;       // per transition
  std::vector<Eigen::VectorXd> beta_post;  // per transition, split mode only
  std::vector<double> z;                   // per transition, changepoint only

  Eigen::VectorXd flatten(intensity_spec const& spec) const;
  static ctmc_params unflatten(Eigen::VectorXd const& theta,
                               intensity_spec const& spec);
};

struct ctmc_fit {
  intensity_spec spec;
  ctmc_params params;
  Eigen::MatrixXd covariance;  // 0x0 when omitted (non-PSD Hessian)
  double loglik = 0.0;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::size_t floored_transitions = 0;
  std::vector<std::string> warnings;
};

struct ctmc_fit_options {
  int max_iter = 300;
  double tol = 1e-9;
  unsigned threads = 1;
  bool compute_covariance = true;
  std::optional<ctmc_params> init;
};

struct evolution {
  std::vector<double> grid;
  std::vector<Eigen::VectorXd> occupancy;  // one row vector per grid point
};

/** Intensity matrix at distance t; diagonal is the negative row sum. */
Eigen::MatrixXd build_intensity(ctmc_params const& params,
                                intensity_spec const& spec,
                                Eigen::VectorXd const& x, double t);

/** Transition probabilities over [t_start, t_end], composed across the
    changepoint when the interval straddles it; entries clamped to [0,1]. */
Eigen::MatrixXd interval_probability(ctmc_params const& params,
                                     intensity_spec const& spec,
                                     Eigen::VectorXd const& x, double t_start,
                                     double t_end);

/** Panel log-likelihood; observed transitions with numerically zero
    probability contribute log(1e-300) and bump *floored. */
double panel_loglik(ctmc_params const& params, intensity_spec const& spec,
                    std::vector<panel_path> const& paths, unsigned threads = 1,
                    std::size_t* floored = nullptr);

ctmc_fit fit_ctmc(std::vector<panel_path> const& paths,
                  intensity_spec const& spec, ctmc_fit_options const& opts = {});

evolution evolution_probabilities(ctmc_params const& params,
                                  intensity_spec const& spec,
                                  Eigen::VectorXd const& x,
                                  std::vector<double> grid, int initial_state);

void validate_paths(std::vector<panel_path> const& paths,
                    intensity_spec const& spec);

}  // namespace railhaz::ctmc
