#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "railhaz/ctmc.hpp"
#include "railhaz/schemas.hpp"

namespace railhaz::sim {

/** Rate r(t) = rates[i] on [knots[i], knots[i+1]); knots start at 0 and the
    last rate extends to infinity. */
struct piecewise_rate {
  std::vector<double> knots;
  std::vector<double> rates;

  double at(double t) const;
  void validate() const;
};

enum class covariate_kind {
  weather,  // temperature U(-15,5), humidity U(60,100), snow U(0,20), precip Bern(0.3)
  uniform,  // three U(-1,1) plus Bern(0.3); keeps linear predictors tame
  constant  // constant_x for every section
};

struct sim_config {
  std::uint64_t seed = 1;
  int n_trains = 100;
  double line_length_km = 700.0;
  double spot_spacing = 35.0;
  std::vector<double> spots;  // explicit ascending spot distances; wins over spacing
  covariate_kind covariates = covariate_kind::weather;
  Eigen::VectorXd constant_x;

  // Ground truth for simulate_cox. Stratum j draws from baseline[j-1],
  // strata past the list reuse the last entry.
  Eigen::VectorXd cox_beta;
  std::vector<piecewise_rate> baseline;

  // Ground truth for simulate_ctmc.
  ctmc::intensity_spec ctmc_spec;
  ctmc::ctmc_params ctmc_truth;
  int initial_state = 1;

  std::vector<double> spot_grid() const;
  void validate_cox() const;
  void validate_ctmc() const;
};

/** Recurrent-event section data by cumulative-hazard inversion; events land
    at exact continuous positions, so a section with an interior event splits
    at the event distance. Covariates map onto the standard four columns. */
std::vector<io::section_row> simulate_cox(sim_config const& config);

/** Exact continuous-time chain via competing exponentials, refreshed at
    section boundaries and the changepoint; states recorded at spots only. */
std::vector<ctmc::panel_path> simulate_ctmc(sim_config const& config);

}  // namespace railhaz::sim
