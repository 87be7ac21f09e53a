#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <string>
#include <sys/wait.h>

#include <json.hpp>

#include "railhaz/commands.hpp"
#include "railhaz/common.hpp"
#include "railhaz/cox.hpp"
#include "railhaz/csv.hpp"
#include "railhaz/ctmc.hpp"
#include "railhaz/schemas.hpp"
#include "railhaz/stats.hpp"

using namespace railhaz;
using nlohmann::json;

namespace {

std::string const kFixtures = RAILHAZ_FIXTURE_DIR;
std::string const kBin = RAILHAZ_BIN;

std::string scratch(std::string const& name) {
  auto const dir = std::filesystem::temp_directory_path() / "railhaz_cmd" / name;
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

int run_cli(std::string const& args) {
  auto const cmd = kBin + " " + args + " >/dev/null 2>&1";
  int const status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string write_cox_config(std::string const& dir) {
  auto const path = dir + "/cox_config.json";
  io::write_file(path, R"({
  "seed": 71,
  "n_trains": 120,
  "line_length_km": 700.0,
  "spot_spacing": 35.0,
  "covariates": "uniform",
  "cox": {
    "beta": [0.4, -0.3, 0.2, 0.3],
    "baseline": [{"knots": [0.0], "rates": [0.01]}]
  }
})");
  return path;
}

std::string write_ctmc_config(std::string const& dir) {
  auto const path = dir + "/ctmc_config.json";
  io::write_file(path, R"({
  "seed": 72,
  "n_trains": 120,
  "line_length_km": 700.0,
  "spot_spacing": 35.0,
  "covariates": "weather",
  "ctmc": {
    "log_q0": [-4.4228486291941368, -3.9120230054281461],
    "beta": [[0, 0, 0, 0], [0, 0, 0, 0]]
  }
})");
  return path;
}

}  // namespace

TEST_CASE("cmd_ingest writes the corpus outputs and a manifest") {
  auto const out = scratch("ingest");
  cmd::cmd_ingest({kFixtures + "/ops.csv", kFixtures + "/line.csv",
                   kFixtures + "/weather.csv", out});
  CHECK(io::read_file(out + "/sections.csv") ==
        io::read_file(kFixtures + "/golden_sections.csv"));
  CHECK(io::read_file(out + "/panel.csv") ==
        io::read_file(kFixtures + "/golden_panel.csv"));
  CHECK(io::read_file(out + "/rejects.csv") ==
        io::read_file(kFixtures + "/golden_rejects.csv"));

  auto const manifest = json::parse(io::read_file(out + "/manifest.json"));
  CHECK(manifest.at("subcommand") == "ingest");
  CHECK(manifest.at("inputs").size() == 3);
  CHECK(manifest.at("inputs").at(0).at("path") == kFixtures + "/ops.csv");
  CHECK(manifest.at("inputs").at(0).at("fnv1a64").get<std::string>().size() ==
        16);
  CHECK(manifest.contains("timestamp"));
}

TEST_CASE("load_sim_config reads nested model blocks") {
  auto const dir = scratch("config");
  auto const cox_path = write_cox_config(dir);
  auto const config = cmd::load_sim_config(cox_path);
  CHECK(config.seed == 71);
  CHECK(config.n_trains == 120);
  CHECK(config.covariates == sim::covariate_kind::uniform);
  REQUIRE(config.cox_beta.size() == 4);
  CHECK(config.cox_beta[0] == 0.4);
  CHECK(config.cox_beta[3] == 0.3);
  REQUIRE(config.baseline.size() == 1);
  CHECK(config.baseline[0].rates == std::vector<double>{0.01});

  auto const ctmc_path = dir + "/ctmc_full.json";
  io::write_file(ctmc_path, R"({
  "covariates": "weather",
  "ctmc": {
    "changepoint": 330.0,
    "log_q0": [-4.0, -3.5],
    "z": [0.405, 0.0],
    "initial_state": 2
  }
})");
  auto const cc = cmd::load_sim_config(ctmc_path);
  CHECK(cc.ctmc_spec.changepoint == 330.0);
  CHECK(cc.ctmc_spec.covariate_names == io::kCovariateNames);
  CHECK(cc.ctmc_spec.transitions.size() == 2);
  CHECK(cc.ctmc_truth.z == std::vector<double>{0.405, 0.0});
  // Unstated betas default to zero vectors of the covariate dimension.
  REQUIRE(cc.ctmc_truth.beta.size() == 2);
  CHECK(cc.ctmc_truth.beta[0].size() == 4);
  CHECK(cc.ctmc_truth.beta[0].norm() == 0.0);
  CHECK(cc.initial_state == 2);

  auto const bad_kind = dir + "/bad_kind.json";
  io::write_file(bad_kind, R"({"covariates": "gaussian"})");
  CHECK_THROWS_WITH_AS(cmd::load_sim_config(bad_kind),
                       doctest::Contains("unknown covariate generator"),
                       validation_error);
  auto const bad_json = dir + "/bad.json";
  io::write_file(bad_json, "{nope");
  CHECK_THROWS_WITH_AS(cmd::load_sim_config(bad_json),
                       doctest::Contains("bad.json"), validation_error);
  auto const bad_shape = dir + "/bad_shape.json";
  io::write_file(bad_shape,
                 R"({"ctmc": {"log_q0": [-4.0], "covariate_names": []}})");
  CHECK_THROWS_WITH_AS(cmd::load_sim_config(bad_shape),
                       doctest::Contains("log_q0 needs one value per "
                                         "transition"),
                       validation_error);
}

TEST_CASE("simulate, fit-cox, saved fit and survival prediction round trip") {
  auto const dir = scratch("cox_round");
  auto const config = write_cox_config(dir);
  cmd::cmd_simulate({"cox", config, dir + "/sim"});
  auto const sections_path = dir + "/sim/sections.csv";
  REQUIRE(std::filesystem::exists(sections_path));

  cmd::fit_cox_args fit_args;
  fit_args.sections_path = sections_path;
  fit_args.out_dir = dir + "/fit";
  cmd::cmd_fit_cox(fit_args);

  // The saved fit reproduces an in-process fit of the same data.
  auto const sections = io::sections_from_csv_file(sections_path);
  auto const data = io::build_cox_dataset(sections, io::clock_layout::gap, true);
  auto const direct = cox::fit_cox(data, {});
  auto const saved = cmd::cox_fit_from_json(dir + "/fit/cox_fit.json");
  REQUIRE(saved.beta.size() == 4);
  CHECK(saved.covariate_names == io::kCovariateNames);
  for (Eigen::Index i = 0; i != 4; ++i) {
    CHECK(saved.beta[i] == doctest::Approx(direct.beta[i]).epsilon(1e-12));
    for (Eigen::Index c = 0; c != 4; ++c) {
      CHECK(saved.covariance(i, c) ==
            doctest::Approx(direct.covariance(i, c)).epsilon(1e-12));
    }
  }
  CHECK(saved.loglik == doctest::Approx(direct.loglik).epsilon(1e-12));
  CHECK(saved.null_loglik ==
        doctest::Approx(direct.null_loglik).epsilon(1e-12));
  CHECK(saved.converged);
  REQUIRE(saved.baseline.size() == direct.baseline.size());
  CHECK(saved.baseline[0].knots == direct.baseline[0].knots);
  CHECK(saved.baseline[0].cumhaz == direct.baseline[0].cumhaz);

  // Recovery sanity at 3 standard errors.
  Eigen::Vector4d const truth{0.4, -0.3, 0.2, 0.3};
  for (Eigen::Index i = 0; i != 4; ++i) {
    CHECK(std::fabs(saved.beta[i] - truth[i]) <=
          3.0 * std::sqrt(saved.covariance(i, i)));
  }

  auto const table = io::read_csv(dir + "/fit/cox_table.csv");
  CHECK(table.header[0] == "predictor");
  CHECK(table.rows.size() == 4);

  cmd::predict_survival_args ps;
  ps.fit_path = dir + "/fit/cox_fit.json";
  ps.out_dir = dir + "/surv";
  ps.at = {0.1, -0.2, 0.3, 1.0};
  ps.step = 35.0;
  cmd::cmd_predict_survival(ps);
  auto const curve = io::read_csv(dir + "/surv/survival_curve.csv");
  REQUIRE(curve.header == std::vector<std::string>{"stratum", "km", "survival"});
  REQUIRE(!curve.rows.empty());
  CHECK(curve.rows[0][1] == "0");
  CHECK(curve.rows[0][2] == "1");
  double last = 1.0;
  for (auto const& row : curve.rows) {
    double const s = *io::parse_double(row[2]);
    CHECK(s <= last + 1e-12);
    CHECK(s > 0.0);
    last = s;
  }

  CHECK_THROWS_AS(
      cmd::cmd_predict_survival({ps.fit_path, dir + "/surv2", 99,
                                 ps.at, 0.0, 0.0, 1.0}),
      validation_error);
}

TEST_CASE("fit-ctmc, saved fit and evolution prediction round trip") {
  auto const dir = scratch("ctmc_round");
  auto const config = write_ctmc_config(dir);
  cmd::cmd_simulate({"ctmc", config, dir + "/sim"});
  auto const panel_path = dir + "/sim/panel.csv";
  REQUIRE(std::filesystem::exists(panel_path));

  cmd::fit_ctmc_args fit_args;
  fit_args.panel_path = panel_path;
  fit_args.out_dir = dir + "/fit";
  fit_args.at = {-1.2, 85.0, 3.0, 1.0};
  cmd::cmd_fit_ctmc(fit_args);

  auto const [spec, params] = cmd::ctmc_fit_from_json(dir + "/fit/ctmc_fit.json");
  CHECK(spec.q == 2);
  CHECK(spec.transitions ==
        std::vector<std::pair<int, int>>{{1, 2}, {2, 1}});
  CHECK(!spec.changepoint);
  CHECK(!spec.split_covariates);
  CHECK(spec.covariate_names == io::kCovariateNames);

  auto const fit_json = json::parse(io::read_file(dir + "/fit/ctmc_fit.json"));
  CHECK(fit_json.at("converged").get<bool>());
  auto const theta = fit_json.at("theta").get<std::vector<double>>();
  auto const flat = params.flatten(spec);
  REQUIRE(theta.size() == static_cast<std::size_t>(flat.size()));
  for (std::size_t i = 0; i != theta.size(); ++i) {
    CHECK(flat[static_cast<Eigen::Index>(i)] ==
          doctest::Approx(theta[i]).epsilon(1e-12));
  }
  // The saved parameters reproduce the reported likelihood on the panel.
  auto const paths = io::build_panel_paths(io::panel_from_csv_file(panel_path));
  CHECK(ctmc::panel_loglik(params, spec, paths) ==
        doctest::Approx(fit_json.at("loglik").get<double>()).epsilon(1e-9));

  auto const evo = io::read_csv(dir + "/fit/evolution.csv");
  REQUIRE(evo.header ==
          std::vector<std::string>{"km", "p_punctual", "p_delayed"});
  for (auto const& row : evo.rows) {
    double const p1 = *io::parse_double(row[1]);
    double const p2 = *io::parse_double(row[2]);
    CHECK(p1 + p2 == doctest::Approx(1.0).epsilon(1e-6));
  }

  cmd::predict_evolution_args pe;
  pe.fit_path = dir + "/fit/ctmc_fit.json";
  pe.out_dir = dir + "/evo";
  pe.at = {-5.0, 90.0, 10.0, 1.0};
  pe.initial_state = 2;
  pe.to = 200.0;
  pe.step = 50.0;
  cmd::cmd_predict_evolution(pe);
  auto const evo2 = io::read_csv(dir + "/evo/evolution.csv");
  REQUIRE(evo2.rows.size() == 5);
  CHECK(evo2.rows[0][0] == "0");
  CHECK(evo2.rows[0][1] == "0");  // starts delayed
  CHECK(evo2.rows[0][2] == "1");
  CHECK(evo2.rows.back()[0] == "200");
}

TEST_CASE("cmd_lrt prints and saves the test result") {
  auto const dir = scratch("lrt");
  cmd::cmd_lrt({-100.0, -96.5, 1, dir});
  auto const j = json::parse(io::read_file(dir + "/lrt.json"));
  auto const expected = stats::lr_test(-100.0, -96.5, 1);
  CHECK(j.at("lambda").get<double>() == doctest::Approx(7.0).epsilon(1e-12));
  CHECK(j.at("df").get<int>() == 1);
  CHECK(j.at("p").get<double>() ==
        doctest::Approx(expected.p_value).epsilon(1e-12));
  auto const manifest = json::parse(io::read_file(dir + "/manifest.json"));
  CHECK(manifest.at("subcommand") == "lrt");
  CHECK(manifest.at("options").at("df") == "1");
}

TEST_CASE("resolve_threads prefers the environment override") {
  unsetenv("RAILHAZ_THREADS");
  CHECK(resolve_threads(2) == 2);
  CHECK(resolve_threads(0) >= 1);
  setenv("RAILHAZ_THREADS", "3", 1);
  CHECK(resolve_threads(1) == 3);
  CHECK(resolve_threads(0) == 3);
  unsetenv("RAILHAZ_THREADS");
}

TEST_CASE("the binary maps outcomes onto the exit-code contract") {
  auto const dir = scratch("cli");
  auto const config = write_cox_config(dir);

  CHECK(run_cli("simulate cox --config " + config + " --out " + dir + "/sim") ==
        0);
  CHECK(run_cli("fit-cox --sections " + dir + "/sim/sections.csv --out " + dir +
                "/fit") == 0);
  CHECK(run_cli("lrt --ll-simple -10 --ll-complex -9 --df 1") == 0);

  // Usage and validation problems exit 2.
  CHECK(run_cli("no-such-command") == 2);
  CHECK(run_cli("fit-cox --out " + dir + "/fit2") == 2);
  CHECK(run_cli("lrt --ll-simple -9 --ll-complex -10 --df 1") == 2);
  CHECK(run_cli("simulate cox --config " + dir + "/missing.json --out " + dir +
                "/sim2") == 2);

  // A starved iteration budget exits 3.
  CHECK(run_cli("fit-cox --sections " + dir + "/sim/sections.csv --out " + dir +
                "/fit3 --max-iter 1") == 3);
}
