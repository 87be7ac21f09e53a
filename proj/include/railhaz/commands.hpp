#pragma once

#include <optional>
#include <string>
#include <vector>

#include "railhaz/cox.hpp"
#include "railhaz/ctmc.hpp"
#include "railhaz/schemas.hpp"
#include "railhaz/simgen.hpp"

namespace railhaz::cmd {

// Commands throw validation_error (exit 2) or convergence_error (exit 3);
// anything else maps to exit 1. Summary lines go to stdout, warnings to
// stderr, files into out_dir alongside a manifest.json.

struct ingest_args {
  std::string ops_path;
  std::string line_path;
  std::string weather_path;
  std::string out_dir;
};
void cmd_ingest(ingest_args const& args);

struct fit_cox_args {
  std::string sections_path;
  std::string out_dir;
  bool stratified = true;
  io::clock_layout layout = io::clock_layout::gap;
  std::vector<double> at = {-1.2, 85.0, 3.0, 1.0};
  int max_iter = 100;
  double tol = 1e-9;
  double ridge = 0.0;
  unsigned threads = 0;
};
void cmd_fit_cox(fit_cox_args const& args);

struct fit_ctmc_args {
  std::string panel_path;
  std::string out_dir;
  std::optional<double> changepoint;
  bool split_covariates = false;
  std::vector<double> at;  // required; feeds evolution.csv
  int initial_state = 1;
  double grid_step = 1.0;
  int max_iter = 300;
  double tol = 1e-9;
  unsigned threads = 0;
};
void cmd_fit_ctmc(fit_ctmc_args const& args);

struct lrt_args {
  double ll_simple = 0.0;
  double ll_complex = 0.0;
  int df = 1;
  std::string out_dir;  // optional; stdout always gets the JSON
};
void cmd_lrt(lrt_args const& args);

struct simulate_args {
  std::string kind;  // "cox" or "ctmc"
  std::string config_path;
  std::string out_dir;
};
void cmd_simulate(simulate_args const& args);

struct predict_survival_args {
  std::string fit_path;  // cox_fit.json
  std::string out_dir;
  int stratum = 1;
  std::vector<double> at = {-1.2, 85.0, 3.0, 1.0};
  double from = 0.0;
  double to = 0.0;  // 0 = last baseline knot
  double step = 1.0;
};
void cmd_predict_survival(predict_survival_args const& args);

struct predict_evolution_args {
  std::string fit_path;  // ctmc_fit.json
  std::string out_dir;
  std::vector<double> at;
  int initial_state = 1;
  double to = 711.0;
  double step = 1.0;
};
void cmd_predict_evolution(predict_evolution_args const& args);

/** sim_config from the JSON config file (see README for the schema). */
sim::sim_config load_sim_config(std::string const& path);

/** Fit re-readers for the predict subcommands. */
cox::cox_fit cox_fit_from_json(std::string const& path);
std::pair<ctmc::intensity_spec, ctmc::ctmc_params> ctmc_fit_from_json(
    std::string const& path);

}  // namespace railhaz::cmd
