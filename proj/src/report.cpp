#include "railhaz/report.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ctime>

#include <json.hpp>

#include "railhaz/common.hpp"
#include "railhaz/csv.hpp"

namespace railhaz::report {

namespace {

using ordered_json = nlohmann::ordered_json;

std::string transition_label(std::pair<int, int> const& t) {
  return std::to_string(t.first) + "->" + std::to_string(t.second);
}

struct table_row {
  std::string transition;
  std::string predictor;
  double estimate;
  double se;  // <= 0 means unknown
};

std::string render_table(std::string const& header,
                         std::vector<table_row> const& rows, bool transitions,
                         double level) {
  std::string out = header;
  for (auto const& r : rows) {
    std::vector<std::string> cells;
    if (transitions) {
      cells.push_back(r.transition);
    }
    cells.push_back(io::csv_escape(r.predictor));
    cells.push_back(format_ratio(std::exp(r.estimate)));
    if (r.se > 0.0 && std::isfinite(r.se)) {
      auto const [lo, hi] = stats::wald_interval(r.estimate, r.se, level);
      cells.push_back(format_ratio(lo));
      cells.push_back(format_ratio(hi));
      cells.push_back(format_p(stats::wald_p(r.estimate, r.se)));
    } else {
      cells.insert(cells.end(), {"", "", ""});
    }
    out += io::join_csv(cells);
    out += '\n';
  }
  return out;
}

ordered_json json_vector(Eigen::VectorXd const& v) {
  ordered_json a = ordered_json::array();
  for (Eigen::Index i = 0; i != v.size(); ++i) {
    a.push_back(v[i]);
  }
  return a;
}

ordered_json json_matrix(Eigen::MatrixXd const& m) {
  ordered_json rows = ordered_json::array();
  for (Eigen::Index i = 0; i != m.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j != m.cols(); ++j) {
      row.push_back(m(i, j));
    }
    rows.push_back(row);
  }
  return rows;
}

std::string dump(ordered_json const& j) { return j.dump(2) + "\n"; }

}  // namespace

std::string format_p(double p) {
  if (p < 1e-4) {
    return "<0.0001";
  }
  return io::format_fixed(p, 4);
}

std::string format_ratio(double v) { return io::format_fixed(v, 3); }

std::string display_name(std::string const& covariate) {
  if (covariate == "temperature_c") {
    return "Temperature";
  }
  if (covariate == "humidity_pct") {
    return "Humidity";
  }
  if (covariate == "snow_depth_cm") {
    return "Snow depth";
  }
  if (covariate == "precip_cat") {
    return "Ice/snow precipitation";
  }
  return covariate;
}

std::string cox_table_csv(cox::cox_fit const& fit, double level) {
  std::vector<table_row> rows;
  for (Eigen::Index i = 0; i != fit.beta.size(); ++i) {
    std::string const name =
        i < static_cast<Eigen::Index>(fit.covariate_names.size())
            ? fit.covariate_names[static_cast<std::size_t>(i)]
            : "x" + std::to_string(i + 1);
    double const var =
        fit.covariance.size() > 0 ? fit.covariance(i, i) : -1.0;
    rows.push_back({"", display_name(name), fit.beta[i],
                    var > 0.0 ? std::sqrt(var) : -1.0});
  }
  return render_table("predictor,hazard_ratio,ci_lower,ci_upper,p_value\n",
                      rows, false, level);
}

std::string survival_curves_csv(
    std::vector<cox::survival_curve> const& curves) {
  std::string out = "stratum,km,survival\n";
  for (auto const& c : curves) {
    for (std::size_t i = 0; i != c.grid.size(); ++i) {
      out += io::join_csv({std::to_string(c.stratum), io::format_g6(c.grid[i]),
                           io::format_g6(c.survival[i])});
      out += '\n';
    }
  }
  return out;
}

std::string cox_fit_json(cox::cox_fit const& fit) {
  ordered_json j;
  ordered_json beta = ordered_json::object();
  ordered_json se = ordered_json::object();
  for (Eigen::Index i = 0; i != fit.beta.size(); ++i) {
    std::string const name =
        i < static_cast<Eigen::Index>(fit.covariate_names.size())
            ? fit.covariate_names[static_cast<std::size_t>(i)]
            : "x" + std::to_string(i + 1);
    beta[name] = fit.beta[i];
    if (fit.covariance.size() > 0 && fit.covariance(i, i) > 0.0) {
      se[name] = std::sqrt(fit.covariance(i, i));
    }
  }
  j["beta"] = beta;
  j["se"] = se;
  j["covariance"] = json_matrix(fit.covariance);
  j["loglik"] = fit.loglik;
  j["null_loglik"] = fit.null_loglik;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  ordered_json baselines = ordered_json::array();
  for (auto const& b : fit.baseline) {
    ordered_json jb;
    jb["stratum"] = b.stratum;
    jb["knots"] = b.knots;
    jb["cumhaz"] = b.cumhaz;
    baselines.push_back(jb);
  }
  j["baseline"] = baselines;
  return dump(j);
}

std::string ctmc_tables_csv(ctmc::ctmc_fit const& fit, double level) {
  auto const& spec = fit.spec;
  auto const p = spec.n_covariates();
  std::size_t const per = spec.param_count() / spec.n_transitions();
  bool const have_cov = fit.covariance.size() > 0;

  auto const se_at = [&](std::size_t idx) {
    if (!have_cov) {
      return -1.0;
    }
    auto const i = static_cast<Eigen::Index>(idx);
    double const var = fit.covariance(i, i);
    return var > 0.0 ? std::sqrt(var) : -1.0;
  };

  std::vector<table_row> rows;
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    std::string const label = transition_label(spec.transitions[k]);
    std::size_t const base = k * per;
    for (std::size_t i = 0; i != p; ++i) {
      std::string name = display_name(spec.covariate_names[i]);
      if (spec.split_covariates) {
        name += ":pre";
      }
      rows.push_back({label, name, fit.params.beta[k][static_cast<Eigen::Index>(i)],
                      se_at(base + 1 + i)});
    }
    if (spec.split_covariates) {
      for (std::size_t i = 0; i != p; ++i) {
        rows.push_back({label,
                        display_name(spec.covariate_names[i]) + ":post",
                        fit.params.beta_post[k][static_cast<Eigen::Index>(i)],
                        se_at(base + 1 + p + i)});
      }
    }
    if (spec.changepoint) {
      std::size_t const z_idx =
          base + 1 + p * (spec.split_covariates ? 2 : 1);
      rows.push_back({label, "segment", fit.params.z[k], se_at(z_idx)});
    }
  }
  return render_table(
      "transition,predictor,hazard_ratio,ci_lower,ci_upper,p_value\n", rows,
      true, level);
}

std::string ctmc_fit_json(ctmc::ctmc_fit const& fit) {
  auto const& spec = fit.spec;
  ordered_json j;
  ordered_json js;
  js["q"] = spec.q;
  ordered_json trans = ordered_json::array();
  for (auto const& t : spec.transitions) {
    trans.push_back(transition_label(t));
  }
  js["transitions"] = trans;
  if (spec.changepoint) {
    js["changepoint"] = *spec.changepoint;
  } else {
    js["changepoint"] = nullptr;
  }
  js["split_covariates"] = spec.split_covariates;
  js["covariates"] = spec.covariate_names;
  j["spec"] = js;

  ordered_json params = ordered_json::object();
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    auto const& [r, s] = spec.transitions[k];
    ordered_json jp;
    jp["log_q0"] = fit.params.log_q0[k];
    ordered_json jb = ordered_json::object();
    for (std::size_t i = 0; i != spec.n_covariates(); ++i) {
      jb[spec.covariate_names[i]] =
          fit.params.beta[k][static_cast<Eigen::Index>(i)];
    }
    jp["beta"] = jb;
    if (spec.split_covariates) {
      ordered_json jbp = ordered_json::object();
      for (std::size_t i = 0; i != spec.n_covariates(); ++i) {
        jbp[spec.covariate_names[i]] =
            fit.params.beta_post[k][static_cast<Eigen::Index>(i)];
      }
      jp["beta_post"] = jbp;
    }
    if (spec.changepoint) {
      jp["z"] = fit.params.z[k];
    }
    params["q" + std::to_string(r) + std::to_string(s)] = jp;
  }
  j["params"] = params;
  j["theta"] = json_vector(fit.params.flatten(spec));
  j["theta_names"] = spec.param_names();
  if (fit.covariance.size() > 0) {
    j["covariance"] = json_matrix(fit.covariance);
  } else {
    j["covariance"] = nullptr;
  }
  j["loglik"] = fit.loglik;
  j["iterations"] = fit.iterations;
  j["converged"] = fit.converged;
  j["floored_transitions"] = fit.floored_transitions;
  j["warnings"] = fit.warnings;
  return dump(j);
}

std::string evolution_csv(ctmc::evolution const& evo) {
  if (!evo.occupancy.empty() && evo.occupancy.front().size() != 2) {
    throw validation_error{"evolution output expects the two-state chain"};
  }
  std::string out = "km,p_punctual,p_delayed\n";
  for (std::size_t i = 0; i != evo.grid.size(); ++i) {
    out += io::join_csv({io::format_g6(evo.grid[i]),
                         io::format_g6(evo.occupancy[i][0]),
                         io::format_g6(evo.occupancy[i][1])});
    out += '\n';
  }
  return out;
}

std::string lrt_json(stats::lrt_result const& r) {
  ordered_json j;
  j["lambda"] = r.statistic;
  j["df"] = r.df;
  j["p"] = r.p_value;
  return dump(j);
}

std::uint64_t fnv1a64(std::string_view data) {
  std::uint64_t h = 14695981039346656037ULL;
  for (unsigned char const c : data) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string manifest_json(std::string const& subcommand,
                          std::vector<std::string> const& inputs,
                          std::map<std::string, std::string> const& options) {
  ordered_json j;
  j["subcommand"] = subcommand;
  j["version"] = kVersion;
  ordered_json ins = ordered_json::array();
  for (auto const& path : inputs) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx",
                  static_cast<unsigned long long>(fnv1a64(io::read_file(path))));
    ordered_json ji;
    ji["path"] = path;
    ji["fnv1a64"] = hex;
    ins.push_back(ji);
  }
  j["inputs"] = ins;
  ordered_json opts = ordered_json::object();
  for (auto const& [k, v] : options) {
    opts[k] = v;
  }
  j["options"] = opts;
  auto const now = std::chrono::system_clock::now();
  std::time_t const tt = std::chrono::system_clock::to_time_t(now);
  std::tm tm_utc{};
  gmtime_r(&tt, &tm_utc);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm_utc);
  j["timestamp"] = buf;
  return dump(j);
}

}  // namespace railhaz::report
