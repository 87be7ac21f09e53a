#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "railhaz/commands.hpp"
#include "railhaz/common.hpp"
#include "railhaz/csv.hpp"

namespace {

using namespace railhaz;

int dispatch(CLI::App const& app, std::function<void()> const& body) {
  (void)app;
  try {
    body();
    return 0;
  } catch (validation_error const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (convergence_error const& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 3;
  } catch (std::exception const& e) {
    std::cerr << "internal error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Recurrent train-delay hazard models: stratified Cox fits for "
               "primary delays and changepoint Markov chains for "
               "punctual/delayed sequences."};
  app.set_version_flag("--version", std::string{"railhaz "} + kVersion);
  app.require_subcommand(1);

  cmd::ingest_args ingest;
  auto* c_ingest = app.add_subcommand(
      "ingest", "Parse operations, line and weather files into model inputs");
  c_ingest->add_option("--ops", ingest.ops_path, "operations.csv")
      ->required();
  c_ingest->add_option("--line", ingest.line_path, "line.csv")->required();
  c_ingest->add_option("--weather", ingest.weather_path, "weather.csv")
      ->required();
  c_ingest->add_option("--out", ingest.out_dir, "output directory")
      ->required();

  cmd::fit_cox_args fc;
  std::string layout = "gap";
  bool unstratified = false;
  auto* c_cox = app.add_subcommand(
      "fit-cox", "Fit the stratified Cox model to section records");
  c_cox->add_option("--sections", fc.sections_path, "sections.csv")
      ->required();
  c_cox->add_option("--out", fc.out_dir, "output directory")->required();
  c_cox->add_flag("--unstratified", unstratified,
                  "single shared baseline instead of per-event-order strata");
  c_cox->add_option("--layout", layout,
                    "distance clock: gap (restart at each event) or calendar")
      ->check(CLI::IsMember({"gap", "calendar"}));
  c_cox->add_option("--at", fc.at,
                    "covariate values for survival curves "
                    "(temperature,humidity,snow,precip)")
      ->delimiter(',')
      ->expected(4);
  c_cox->add_option("--max-iter", fc.max_iter, "Newton iteration cap");
  c_cox->add_option("--tol", fc.tol, "relative loglik tolerance");
  c_cox->add_option("--ridge", fc.ridge, "L2 penalty for separable data");
  c_cox->add_option("--threads", fc.threads, "worker threads (0 = all cores)");

  cmd::fit_ctmc_args ft;
  auto* c_ctmc = app.add_subcommand(
      "fit-ctmc", "Fit the punctual/delayed Markov chain to panel data");
  c_ctmc->add_option("--panel", ft.panel_path, "panel.csv")->required();
  c_ctmc->add_option("--out", ft.out_dir, "output directory")->required();
  auto* cp_opt = c_ctmc->add_option("--changepoint")->expected(0, 1);
  cp_opt->description(
      "distance changepoint km (bare flag means 330); omit for the "
      "homogeneous model");
  c_ctmc->add_flag("--split-covariates", ft.split_covariates,
                   "separate covariate effects per segment");
  c_ctmc->add_option("--at", ft.at,
                     "covariate values for the evolution curve")
      ->delimiter(',')
      ->expected(4)
      ->required();
  c_ctmc->add_option("--initial-state", ft.initial_state,
                     "evolution start state (1 punctual, 2 delayed)");
  c_ctmc->add_option("--grid-step", ft.grid_step, "evolution grid step km");
  c_ctmc->add_option("--max-iter", ft.max_iter, "optimizer iteration cap");
  c_ctmc->add_option("--tol", ft.tol, "relative loglik tolerance");
  c_ctmc->add_option("--threads", ft.threads, "worker threads (0 = all cores)");

  cmd::lrt_args lt;
  auto* c_lrt =
      app.add_subcommand("lrt", "Likelihood ratio test of nested fits");
  c_lrt->add_option("--ll-simple", lt.ll_simple, "loglik of the simpler model")
      ->required();
  c_lrt->add_option("--ll-complex", lt.ll_complex,
                    "loglik of the more complex model")
      ->required();
  c_lrt->add_option("--df", lt.df, "parameter-count difference")->required();
  c_lrt->add_option("--out", lt.out_dir, "optional output directory");

  cmd::simulate_args sa;
  auto* c_sim = app.add_subcommand(
      "simulate", "Generate synthetic section or panel data");
  c_sim->add_option("kind", sa.kind, "cox or ctmc")
      ->required()
      ->check(CLI::IsMember({"cox", "ctmc"}));
  c_sim->add_option("--config", sa.config_path, "config.json")->required();
  c_sim->add_option("--out", sa.out_dir, "output directory")->required();

  cmd::predict_survival_args ps;
  auto* c_psurv = app.add_subcommand(
      "predict-survival", "Survival curve from a saved cox_fit.json");
  c_psurv->add_option("--fit", ps.fit_path, "cox_fit.json")->required();
  c_psurv->add_option("--out", ps.out_dir, "output directory")->required();
  c_psurv->add_option("--stratum", ps.stratum, "event order number");
  c_psurv->add_option("--at", ps.at, "covariate values")
      ->delimiter(',')
      ->expected(4);
  c_psurv->add_option("--from", ps.from, "grid start km");
  c_psurv->add_option("--to", ps.to, "grid end km (0 = last event distance)");
  c_psurv->add_option("--step", ps.step, "grid step km");

  cmd::predict_evolution_args pe;
  auto* c_pevo = app.add_subcommand(
      "predict-evolution", "State-occupancy curve from a saved ctmc_fit.json");
  c_pevo->add_option("--fit", pe.fit_path, "ctmc_fit.json")->required();
  c_pevo->add_option("--out", pe.out_dir, "output directory")->required();
  c_pevo->add_option("--at", pe.at, "covariate values")
      ->delimiter(',')
      ->required();
  c_pevo->add_option("--initial-state", pe.initial_state,
                     "start state (1 punctual, 2 delayed)");
  c_pevo->add_option("--to", pe.to, "grid end km");
  c_pevo->add_option("--step", pe.step, "grid step km");

  try {
    app.parse(argc, argv);
  } catch (CLI::CallForHelp const& e) {
    return app.exit(e);
  } catch (CLI::CallForVersion const& e) {
    return app.exit(e);
  } catch (CLI::ParseError const& e) {
    app.exit(e);
    return 2;
  }

  if (cp_opt->count() > 0) {
    auto const& res = cp_opt->results();
    if (res.empty() || res.front().empty()) {
      ft.changepoint = 330.0;
    } else {
      auto const v = io::parse_double(res.front());
      if (!v) {
        std::cerr << "error: --changepoint needs a number, got '"
                  << res.front() << "'\n";
        return 2;
      }
      ft.changepoint = *v;
    }
  }
  fc.stratified = !unstratified;
  fc.layout =
      layout == "calendar" ? io::clock_layout::calendar : io::clock_layout::gap;

  if (c_ingest->parsed()) {
    return dispatch(app, [&] { cmd::cmd_ingest(ingest); });
  }
  if (c_cox->parsed()) {
    return dispatch(app, [&] { cmd::cmd_fit_cox(fc); });
  }
  if (c_ctmc->parsed()) {
    return dispatch(app, [&] { cmd::cmd_fit_ctmc(ft); });
  }
  if (c_lrt->parsed()) {
    return dispatch(app, [&] { cmd::cmd_lrt(lt); });
  }
  if (c_sim->parsed()) {
    return dispatch(app, [&] { cmd::cmd_simulate(sa); });
  }
  if (c_psurv->parsed()) {
    return dispatch(app, [&] { cmd::cmd_predict_survival(ps); });
  }
  if (c_pevo->parsed()) {
    return dispatch(app, [&] { cmd::cmd_predict_evolution(pe); });
  }
  return 1;
}
