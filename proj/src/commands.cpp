#include "railhaz/commands.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <iostream>

#include <json.hpp>

#include "railhaz/common.hpp"
#include "railhaz/csv.hpp"
#include "railhaz/ingest.hpp"
#include "railhaz/report.hpp"
#include "railhaz/stats.hpp"

namespace railhaz::cmd {

namespace {

using ordered_json = nlohmann::ordered_json;

void ensure_dir(std::string const& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) {
    throw validation_error{"cannot create output directory " + dir + ": " +
                           ec.message()};
  }
}

std::string joined(std::string const& dir, std::string const& name) {
  return (std::filesystem::path{dir} / name).string();
}

std::string vector_option(std::vector<double> const& v) {
  std::string s;
  for (std::size_t i = 0; i != v.size(); ++i) {
    if (i) {
      s += ',';
    }
    s += io::format_g6(v[i]);
  }
  return s;
}

Eigen::VectorXd to_eigen(std::vector<double> const& v) {
  Eigen::VectorXd x(static_cast<Eigen::Index>(v.size()));
  for (std::size_t i = 0; i != v.size(); ++i) {
    x[static_cast<Eigen::Index>(i)] = v[i];
  }
  return x;
}

std::vector<double> step_grid(double from, double to, double step) {
  if (!(step > 0.0) || !(to > from)) {
    throw validation_error{"grid needs to > from and a positive step"};
  }
  std::vector<double> grid;
  for (double d = from; d < to - 1e-9; d += step) {
    grid.push_back(d);
  }
  grid.push_back(to);
  return grid;
}

ordered_json parse_json_file(std::string const& path) {
  try {
    return ordered_json::parse(io::read_file(path));
  } catch (nlohmann::json::exception const& e) {
    throw validation_error{path + ": " + e.what()};
  }
}

void warn_all(std::vector<std::string> const& warnings) {
  for (auto const& w : warnings) {
    std::cerr << "warning: " << w << '\n';
  }
}

}  // namespace

void cmd_ingest(ingest_args const& args) {
  auto const res =
      ingest::run_pipeline(args.ops_path, args.line_path, args.weather_path);
  ensure_dir(args.out_dir);
  io::write_file(joined(args.out_dir, "sections.csv"),
                 io::sections_to_csv(res.sections));
  io::write_file(joined(args.out_dir, "panel.csv"),
                 io::panel_to_csv(res.panel));
  io::write_file(joined(args.out_dir, "rejects.csv"),
                 io::rejects_to_csv(res.rejects));
  io::write_file(
      joined(args.out_dir, "manifest.json"),
      report::manifest_json(
          "ingest", {args.ops_path, args.line_path, args.weather_path}, {}));
  std::cout << "ingest: " << res.runs_parsed << " runs parsed, "
            << res.runs_kept << " kept, " << res.sections.size()
            << " sections, " << res.panel.size() << " panel rows, "
            << res.rejects.size() << " rejects\n";
  if (res.runs_parsed == 0) {
    throw validation_error{"no runs parsed"};
  }
  if (res.runs_kept == 0) {
    throw validation_error{"no runs survived ingest"};
  }
}

void cmd_fit_cox(fit_cox_args const& args) {
  auto const sections = io::sections_from_csv_file(args.sections_path);
  if (sections.empty()) {
    throw validation_error{"no section rows in " + args.sections_path};
  }
  auto const data =
      io::build_cox_dataset(sections, args.layout, args.stratified);
  cox::fit_options opts;
  opts.max_iter = args.max_iter;
  opts.tol = args.tol;
  opts.ridge = args.ridge;
  auto const fit = cox::fit_cox(data, opts);

  if (args.at.size() != data.dim()) {
    throw validation_error{"--at needs one value per covariate (" +
                           std::to_string(data.dim()) + ")"};
  }
  Eigen::VectorXd const x = to_eigen(args.at);
  std::vector<cox::survival_curve> curves;
  for (auto const& b : fit.baseline) {
    if (b.knots.empty()) {
      continue;
    }
    std::vector<double> grid;
    if (b.knots.front() > 0.0) {
      grid.push_back(0.0);
    }
    grid.insert(grid.end(), b.knots.begin(), b.knots.end());
    curves.push_back(cox::predict_survival(fit, x, b.stratum, grid));
  }

  ensure_dir(args.out_dir);
  io::write_file(joined(args.out_dir, "cox_table.csv"),
                 report::cox_table_csv(fit));
  io::write_file(joined(args.out_dir, "cox_fit.json"),
                 report::cox_fit_json(fit));
  io::write_file(joined(args.out_dir, "survival_curve.csv"),
                 report::survival_curves_csv(curves));
  io::write_file(
      joined(args.out_dir, "manifest.json"),
      report::manifest_json(
          "fit-cox", {args.sections_path},
          {{"stratified", args.stratified ? "true" : "false"},
           {"layout",
            args.layout == io::clock_layout::gap ? "gap" : "calendar"},
           {"at", vector_option(args.at)},
           {"max_iter", std::to_string(args.max_iter)},
           {"tol", io::format_g6(args.tol)},
           {"ridge", io::format_g6(args.ridge)}}));
  std::cout << "fit-cox: loglik " << io::format_g6(fit.loglik) << ", "
            << fit.iterations << " iterations, "
            << (fit.converged ? "converged" : "NOT converged") << ", "
            << data.n_events() << " events in " << data.rows.size()
            << " rows\n";
  if (!fit.converged) {
    throw convergence_error{"Newton iteration did not converge"};
  }
}

void cmd_fit_ctmc(fit_ctmc_args const& args) {
  auto const rows = io::panel_from_csv_file(args.panel_path);
  if (rows.empty()) {
    throw validation_error{"no panel rows in " + args.panel_path};
  }
  auto const paths = io::build_panel_paths(rows);
  auto const spec = ctmc::intensity_spec::two_state(
      io::kCovariateNames, args.changepoint, args.split_covariates);
  if (args.at.size() != spec.n_covariates()) {
    throw validation_error{"--at needs one value per covariate (" +
                           std::to_string(spec.n_covariates()) + ")"};
  }

  ctmc::ctmc_fit_options opts;
  opts.max_iter = args.max_iter;
  opts.tol = args.tol;
  opts.threads = resolve_threads(args.threads);

  if (args.changepoint) {
    // Warm start from the homogeneous submodel so the heterogeneous fit
    // never lands below it.
    auto const homo_spec = ctmc::intensity_spec::two_state(
        io::kCovariateNames, std::nullopt, false);
    ctmc::ctmc_fit_options homo_opts = opts;
    homo_opts.compute_covariance = false;
    auto const homo = ctmc::fit_ctmc(paths, homo_spec, homo_opts);
    ctmc::ctmc_params init;
    init.log_q0 = homo.params.log_q0;
    init.beta = homo.params.beta;
    if (args.split_covariates) {
      init.beta_post = homo.params.beta;
    }
    init.z.assign(spec.n_transitions(), 0.0);
    opts.init = init;
  }

  auto const fit = ctmc::fit_ctmc(paths, spec, opts);
  warn_all(fit.warnings);

  double max_km = 0.0;
  for (auto const& r : rows) {
    max_km = std::max(max_km, r.km);
  }
  auto const evo = ctmc::evolution_probabilities(
      fit.params, spec, to_eigen(args.at),
      step_grid(0.0, max_km, args.grid_step), args.initial_state);

  ensure_dir(args.out_dir);
  io::write_file(joined(args.out_dir, "ctmc_tables.csv"),
                 report::ctmc_tables_csv(fit));
  io::write_file(joined(args.out_dir, "ctmc_fit.json"),
                 report::ctmc_fit_json(fit));
  io::write_file(joined(args.out_dir, "evolution.csv"),
                 report::evolution_csv(evo));
  std::map<std::string, std::string> options = {
      {"split_covariates", args.split_covariates ? "true" : "false"},
      {"at", vector_option(args.at)},
      {"initial_state", std::to_string(args.initial_state)},
      {"grid_step", io::format_g6(args.grid_step)},
      {"max_iter", std::to_string(args.max_iter)},
      {"tol", io::format_g6(args.tol)}};
  if (args.changepoint) {
    options["changepoint"] = io::format_g6(*args.changepoint);
  }
  io::write_file(joined(args.out_dir, "manifest.json"),
                 report::manifest_json("fit-ctmc", {args.panel_path}, options));
  std::cout << "fit-ctmc: loglik " << io::format_g6(fit.loglik) << ", "
            << fit.iterations << " iterations, "
            << (fit.converged ? "converged" : "NOT converged") << ", "
            << paths.size() << " paths\n";
  if (!fit.converged) {
    throw convergence_error{"quasi-Newton iteration did not converge"};
  }
}

void cmd_lrt(lrt_args const& args) {
  auto const r = stats::lr_test(args.ll_simple, args.ll_complex, args.df);
  std::string const json = report::lrt_json(r);
  std::cout << json;
  if (!args.out_dir.empty()) {
    ensure_dir(args.out_dir);
    io::write_file(joined(args.out_dir, "lrt.json"), json);
    io::write_file(
        joined(args.out_dir, "manifest.json"),
        report::manifest_json("lrt", {},
                              {{"ll_simple", io::format_g6(args.ll_simple)},
                               {"ll_complex", io::format_g6(args.ll_complex)},
                               {"df", std::to_string(args.df)}}));
  }
}

sim::sim_config load_sim_config(std::string const& path) {
  auto const j = parse_json_file(path);
  sim::sim_config config;
  try {
    config.seed = j.value("seed", std::uint64_t{1});
    config.n_trains = j.value("n_trains", 100);
    config.line_length_km = j.value("line_length_km", 700.0);
    config.spot_spacing = j.value("spot_spacing", 35.0);
    if (j.contains("spots")) {
      config.spots = j.at("spots").get<std::vector<double>>();
    }
    std::string const kind = j.value("covariates", "weather");
    if (kind == "weather") {
      config.covariates = sim::covariate_kind::weather;
    } else if (kind == "uniform") {
      config.covariates = sim::covariate_kind::uniform;
    } else if (kind == "constant") {
      config.covariates = sim::covariate_kind::constant;
    } else {
      throw validation_error{"unknown covariate generator '" + kind + "'"};
    }
    if (j.contains("constant_x")) {
      config.constant_x =
          to_eigen(j.at("constant_x").get<std::vector<double>>());
    }
    if (j.contains("cox")) {
      auto const& jc = j.at("cox");
      config.cox_beta = to_eigen(jc.at("beta").get<std::vector<double>>());
      for (auto const& jb : jc.at("baseline")) {
        sim::piecewise_rate base;
        base.knots = jb.at("knots").get<std::vector<double>>();
        base.rates = jb.at("rates").get<std::vector<double>>();
        config.baseline.push_back(std::move(base));
      }
    }
    if (j.contains("ctmc")) {
      auto const& jc = j.at("ctmc");
      ctmc::intensity_spec spec;
      spec.q = jc.value("q", 2);
      if (jc.contains("transitions")) {
        for (auto const& jt : jc.at("transitions")) {
          spec.transitions.emplace_back(jt.at(0).get<int>(),
                                        jt.at(1).get<int>());
        }
      } else {
        spec.transitions = {{1, 2}, {2, 1}};
      }
      if (jc.contains("changepoint") && !jc.at("changepoint").is_null()) {
        spec.changepoint = jc.at("changepoint").get<double>();
      }
      spec.split_covariates = jc.value("split_covariates", false);
      spec.covariate_names = jc.value("covariate_names", io::kCovariateNames);
      config.initial_state = jc.value("initial_state", 1);

      auto const n_trans = spec.transitions.size();
      auto const p = static_cast<Eigen::Index>(spec.n_covariates());
      ctmc::ctmc_params truth;
      truth.log_q0 = jc.at("log_q0").get<std::vector<double>>();
      if (truth.log_q0.size() != n_trans) {
        throw validation_error{"log_q0 needs one value per transition"};
      }
      auto const read_betas = [&](char const* key) {
        std::vector<Eigen::VectorXd> out;
        if (jc.contains(key)) {
          for (auto const& row : jc.at(key)) {
            out.push_back(to_eigen(row.get<std::vector<double>>()));
          }
        } else {
          out.assign(n_trans, Eigen::VectorXd::Zero(p));
        }
        if (out.size() != n_trans) {
          throw validation_error{std::string{key} +
                                 " needs one vector per transition"};
        }
        return out;
      };
      truth.beta = read_betas("beta");
      if (spec.split_covariates) {
        truth.beta_post = read_betas("beta_post");
      }
      if (spec.changepoint) {
        if (jc.contains("z")) {
          truth.z = jc.at("z").get<std::vector<double>>();
        } else {
          truth.z.assign(n_trans, 0.0);
        }
        if (truth.z.size() != n_trans) {
          throw validation_error{"z needs one value per transition"};
        }
      }
      config.ctmc_spec = std::move(spec);
      config.ctmc_truth = std::move(truth);
    }
  } catch (nlohmann::json::exception const& e) {
    throw validation_error{path + ": " + e.what()};
  }
  return config;
}

void cmd_simulate(simulate_args const& args) {
  auto const config = load_sim_config(args.config_path);
  ensure_dir(args.out_dir);
  if (args.kind == "cox") {
    auto const rows = sim::simulate_cox(config);
    io::write_file(joined(args.out_dir, "sections.csv"),
                   io::sections_to_csv(rows));
    std::cout << "simulate cox: " << config.n_trains << " trains, "
              << rows.size() << " section rows\n";
  } else if (args.kind == "ctmc") {
    if (config.ctmc_spec.covariate_names != io::kCovariateNames) {
      throw validation_error{
          "panel.csv output needs the four standard covariates"};
    }
    auto const paths = sim::simulate_ctmc(config);
    std::vector<io::panel_row> rows;
    for (auto const& path : paths) {
      for (auto const& o : path.observations) {
        rows.push_back({path.train_id, o.km, o.state, o.x[0], o.x[1], o.x[2],
                        static_cast<int>(o.x[3])});
      }
    }
    io::write_file(joined(args.out_dir, "panel.csv"), io::panel_to_csv(rows));
    std::cout << "simulate ctmc: " << config.n_trains << " trains, "
              << rows.size() << " panel rows\n";
  } else {
    throw validation_error{"simulate kind must be cox or ctmc"};
  }
  io::write_file(joined(args.out_dir, "manifest.json"),
                 report::manifest_json("simulate", {args.config_path},
                                       {{"kind", args.kind}}));
}

cox::cox_fit cox_fit_from_json(std::string const& path) {
  auto const j = parse_json_file(path);
  cox::cox_fit fit;
  try {
    for (auto const& [name, value] : j.at("beta").items()) {
      fit.covariate_names.push_back(name);
      fit.beta.conservativeResize(fit.beta.size() + 1);
      fit.beta[fit.beta.size() - 1] = value.get<double>();
    }
    auto const& jc = j.at("covariance");
    auto const n = static_cast<Eigen::Index>(jc.size());
    fit.covariance.resize(n, n);
    for (Eigen::Index r = 0; r != n; ++r) {
      for (Eigen::Index c = 0; c != n; ++c) {
        fit.covariance(r, c) = jc.at(r).at(c).get<double>();
      }
    }
    fit.loglik = j.at("loglik").get<double>();
    fit.null_loglik = j.at("null_loglik").get<double>();
    fit.iterations = j.at("iterations").get<int>();
    fit.converged = j.at("converged").get<bool>();
    for (auto const& jb : j.at("baseline")) {
      cox::baseline_hazard b;
      b.stratum = jb.at("stratum").get<int>();
      b.knots = jb.at("knots").get<std::vector<double>>();
      b.cumhaz = jb.at("cumhaz").get<std::vector<double>>();
      fit.baseline.push_back(std::move(b));
    }
  } catch (nlohmann::json::exception const& e) {
    throw validation_error{path + ": " + e.what()};
  }
  return fit;
}

std::pair<ctmc::intensity_spec, ctmc::ctmc_params> ctmc_fit_from_json(
    std::string const& path) {
  auto const j = parse_json_file(path);
  ctmc::intensity_spec spec;
  ctmc::ctmc_params params;
  try {
    auto const& js = j.at("spec");
    spec.q = js.at("q").get<int>();
    for (auto const& jt : js.at("transitions")) {
      auto const label = jt.get<std::string>();
      auto const arrow = label.find("->");
      if (arrow == std::string::npos) {
        throw validation_error{"bad transition label '" + label + "'"};
      }
      spec.transitions.emplace_back(std::stoi(label.substr(0, arrow)),
                                    std::stoi(label.substr(arrow + 2)));
    }
    if (!js.at("changepoint").is_null()) {
      spec.changepoint = js.at("changepoint").get<double>();
    }
    spec.split_covariates = js.at("split_covariates").get<bool>();
    spec.covariate_names =
        js.at("covariates").get<std::vector<std::string>>();
    spec.validate();

    auto const theta =
        to_eigen(j.at("theta").get<std::vector<double>>());
    params = ctmc::ctmc_params::unflatten(theta, spec);
  } catch (nlohmann::json::exception const& e) {
    throw validation_error{path + ": " + e.what()};
  }
  return {spec, params};
}

void cmd_predict_survival(predict_survival_args const& args) {
  auto const fit = cox_fit_from_json(args.fit_path);
  if (args.at.size() != static_cast<std::size_t>(fit.beta.size())) {
    throw validation_error{"--at needs one value per covariate (" +
                           std::to_string(fit.beta.size()) + ")"};
  }
  double to = args.to;
  if (to <= args.from) {
    auto const* b = fit.baseline_for(args.stratum);
    if (b == nullptr || b->knots.empty()) {
      throw validation_error{"stratum " + std::to_string(args.stratum) +
                             " has no baseline hazard"};
    }
    to = b->knots.back();
  }
  auto const curve =
      cox::predict_survival(fit, to_eigen(args.at), args.stratum,
                            step_grid(args.from, to, args.step));
  ensure_dir(args.out_dir);
  io::write_file(joined(args.out_dir, "survival_curve.csv"),
                 report::survival_curves_csv({curve}));
  io::write_file(
      joined(args.out_dir, "manifest.json"),
      report::manifest_json("predict-survival", {args.fit_path},
                            {{"stratum", std::to_string(args.stratum)},
                             {"at", vector_option(args.at)},
                             {"from", io::format_g6(args.from)},
                             {"to", io::format_g6(to)},
                             {"step", io::format_g6(args.step)}}));
  std::cout << "predict-survival: " << curve.grid.size() << " grid points\n";
}

void cmd_predict_evolution(predict_evolution_args const& args) {
  auto const [spec, params] = ctmc_fit_from_json(args.fit_path);
  if (args.at.size() != spec.n_covariates()) {
    throw validation_error{"--at needs one value per covariate (" +
                           std::to_string(spec.n_covariates()) + ")"};
  }
  auto const evo = ctmc::evolution_probabilities(
      params, spec, to_eigen(args.at), step_grid(0.0, args.to, args.step),
      args.initial_state);
  ensure_dir(args.out_dir);
  io::write_file(joined(args.out_dir, "evolution.csv"),
                 report::evolution_csv(evo));
  io::write_file(
      joined(args.out_dir, "manifest.json"),
      report::manifest_json("predict-evolution", {args.fit_path},
                            {{"at", vector_option(args.at)},
                             {"initial_state",
                              std::to_string(args.initial_state)},
                             {"to", io::format_g6(args.to)},
                             {"step", io::format_g6(args.step)}}));
  std::cout << "predict-evolution: " << evo.grid.size() << " grid points\n";
}

}  // namespace railhaz::cmd
