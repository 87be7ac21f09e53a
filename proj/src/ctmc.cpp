#include "railhaz/ctmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "railhaz/bfgs.hpp"
#include "railhaz/common.hpp"
#include "railhaz/expm.hpp"

namespace railhaz::ctmc {

namespace {

constexpr double kProbFloor = 1e-300;

double intensity_entry(ctmc_params const& params, intensity_spec const& spec,
                       Eigen::VectorXd const& x, bool post,
                       std::size_t transition) {
  double lp = params.log_q0[transition];
  Eigen::VectorXd const& b = (post && spec.split_covariates)
                                 ? params.beta_post[transition]
                                 : params.beta[transition];
  if (b.size() > 0) {
    lp += b.dot(x);
  }
  if (post && spec.changepoint) {
    lp += params.z[transition];
  }
  return std::exp(lp);
}

Eigen::MatrixXd intensity_side(ctmc_params const& params,
                               intensity_spec const& spec,
                               Eigen::VectorXd const& x, bool post) {
  Eigen::MatrixXd q_mat = Eigen::MatrixXd::Zero(spec.q, spec.q);
  for (std::size_t k = 0; k != spec.transitions.size(); ++k) {
    auto const [r, s] = spec.transitions[k];
    q_mat(r - 1, s - 1) = intensity_entry(params, spec, x, post, k);
  }
  for (int r = 0; r != spec.q; ++r) {
    q_mat(r, r) = 0.0;
    q_mat(r, r) = -q_mat.row(r).sum();
  }
  return q_mat;
}

// Rows of exp(uQ) sum to one; anything beyond roundoff means the exponential
// lost precision (repeated squaring at extreme norms), and clamping such a
// matrix would mint fake probabilities of one.
Eigen::MatrixXd clamp_probabilities(Eigen::MatrixXd p) {
  constexpr double kSlack = 1e-6;
  for (Eigen::Index i = 0; i != p.rows(); ++i) {
    double row_sum = 0.0;
    for (Eigen::Index j = 0; j != p.cols(); ++j) {
      double const v = p(i, j);
      if (!(v >= -kSlack && v <= 1.0 + kSlack)) {
        throw validation_error{
            "transition rates too extreme: probability matrix overflowed"};
      }
      row_sum += v;
    }
    if (!(std::fabs(row_sum - 1.0) <= kSlack)) {
      throw validation_error{
          "transition rates too extreme: probability matrix overflowed"};
    }
    for (Eigen::Index j = 0; j != p.cols(); ++j) {
      p(i, j) = std::clamp(p(i, j), 0.0, 1.0);
    }
  }
  return p;
}

// The optimizer runs on centered, unit-variance covariates; the parameter map
// between scales is linear and exact, so the reported fit is unaffected.
struct standardization {
  Eigen::VectorXd center;
  Eigen::VectorXd scale;
};

standardization covariate_standardization(std::vector<panel_path> const& paths,
                                          Eigen::Index p) {
  standardization st;
  st.center = Eigen::VectorXd::Zero(p);
  st.scale = Eigen::VectorXd::Ones(p);
  if (p == 0) {
    return st;
  }
  double n = 0.0;
  Eigen::VectorXd sum = Eigen::VectorXd::Zero(p);
  Eigen::VectorXd sum2 = Eigen::VectorXd::Zero(p);
  for (auto const& path : paths) {
    for (std::size_t j = 0; j + 1 < path.observations.size(); ++j) {
      auto const& x = path.observations[j].x;
      sum += x;
      sum2 += x.cwiseProduct(x);
      n += 1.0;
    }
  }
  if (n == 0.0) {
    return st;
  }
  st.center = sum / n;
  for (Eigen::Index i = 0; i != p; ++i) {
    double const var = sum2[i] / n - st.center[i] * st.center[i];
    st.scale[i] = var > 0.0 ? std::sqrt(var) : 1.0;
  }
  return st;
}

std::vector<panel_path> standardize_paths(std::vector<panel_path> const& paths,
                                          standardization const& st) {
  std::vector<panel_path> out = paths;
  for (auto& path : out) {
    for (auto& o : path.observations) {
      o.x = (o.x - st.center).cwiseQuotient(st.scale);
    }
  }
  return out;
}

ctmc_params to_standardized(ctmc_params const& pr, standardization const& st,
                            intensity_spec const& spec) {
  ctmc_params out = pr;
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    out.log_q0[k] = pr.log_q0[k] + pr.beta[k].dot(st.center);
    out.beta[k] = pr.beta[k].cwiseProduct(st.scale);
    if (spec.split_covariates) {
      out.beta_post[k] = pr.beta_post[k].cwiseProduct(st.scale);
      out.z[k] = pr.z[k] + (pr.beta_post[k] - pr.beta[k]).dot(st.center);
    }
  }
  return out;
}

ctmc_params from_standardized(ctmc_params const& pr, standardization const& st,
                              intensity_spec const& spec) {
  ctmc_params out = pr;
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    out.beta[k] = pr.beta[k].cwiseQuotient(st.scale);
    out.log_q0[k] = pr.log_q0[k] - out.beta[k].dot(st.center);
    if (spec.split_covariates) {
      out.beta_post[k] = pr.beta_post[k].cwiseQuotient(st.scale);
      out.z[k] = pr.z[k] - (out.beta_post[k] - out.beta[k]).dot(st.center);
    }
  }
  return out;
}

}  // namespace

std::size_t intensity_spec::param_count() const {
  std::size_t per = 1 + n_covariates() * (split_covariates ? 2 : 1);
  if (changepoint) {
    per += 1;
  }
  return per * n_transitions();
}

std::vector<std::string> intensity_spec::param_names() const {
  std::vector<std::string> names;
  names.reserve(param_count());
  for (auto const& [r, s] : transitions) {
    std::string const prefix =
        "q" + std::to_string(r) + std::to_string(s) + ".";
    names.push_back(prefix + "log_q0");
    for (auto const& c : covariate_names) {
      names.push_back(prefix + "beta." + c);
    }
    if (split_covariates) {
      for (auto const& c : covariate_names) {
        names.push_back(prefix + "beta_post." + c);
      }
    }
    if (changepoint) {
      names.push_back(prefix + "z");
    }
  }
  return names;
}

intensity_spec intensity_spec::two_state(
    std::vector<std::string> covariate_names, std::optional<double> changepoint,
    bool split_covariates) {
  intensity_spec spec;
  spec.q = 2;
  spec.transitions = {{1, 2}, {2, 1}};
  spec.changepoint = changepoint;
  spec.split_covariates = split_covariates;
  spec.covariate_names = std::move(covariate_names);
  spec.validate();
  return spec;
}

void intensity_spec::validate() const {
  if (q < 2) {
    throw validation_error{"intensity spec needs at least two states"};
  }
  if (transitions.empty()) {
    throw validation_error{"intensity spec has no allowed transitions"};
  }
  for (auto const& [r, s] : transitions) {
    if (r < 1 || r > q || s < 1 || s > q || r == s) {
      throw validation_error{"allowed transition (" + std::to_string(r) + "," +
                             std::to_string(s) + ") is out of range"};
    }
  }
  if (split_covariates && !changepoint) {
    throw validation_error{"split covariates require a changepoint"};
  }
}

Eigen::VectorXd ctmc_params::flatten(intensity_spec const& spec) const {
  Eigen::VectorXd theta(spec.param_count());
  Eigen::Index at = 0;
  auto const p = static_cast<Eigen::Index>(spec.n_covariates());
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    theta[at++] = log_q0[k];
    theta.segment(at, p) = beta[k];
    at += p;
    if (spec.split_covariates) {
      theta.segment(at, p) = beta_post[k];
      at += p;
    }
    if (spec.changepoint) {
      theta[at++] = z[k];
    }
  }
  return theta;
}

ctmc_params ctmc_params::unflatten(Eigen::VectorXd const& theta,
                                   intensity_spec const& spec) {
  if (static_cast<std::size_t>(theta.size()) != spec.param_count()) {
    throw validation_error{"parameter vector length mismatch"};
  }
  ctmc_params params;
  Eigen::Index at = 0;
  auto const p = static_cast<Eigen::Index>(spec.n_covariates());
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    params.log_q0.push_back(theta[at++]);
    params.beta.emplace_back(theta.segment(at, p));
    at += p;
    if (spec.split_covariates) {
      params.beta_post.emplace_back(theta.segment(at, p));
      at += p;
    }
    if (spec.changepoint) {
      params.z.push_back(theta[at++]);
    }
  }
  return params;
}

Eigen::MatrixXd build_intensity(ctmc_params const& params,
                                intensity_spec const& spec,
                                Eigen::VectorXd const& x, double t) {
  if (static_cast<std::size_t>(x.size()) != spec.n_covariates()) {
    throw validation_error{"covariate vector does not match intensity spec"};
  }
  bool const post = spec.changepoint && t >= *spec.changepoint;
  return intensity_side(params, spec, x, post);
}

Eigen::MatrixXd interval_probability(ctmc_params const& params,
                                     intensity_spec const& spec,
                                     Eigen::VectorXd const& x, double t_start,
                                     double t_end) {
  if (t_end < t_start) {
    throw validation_error{"interval end precedes its start"};
  }
  if (t_end == t_start) {
    return Eigen::MatrixXd::Identity(spec.q, spec.q);
  }
  double const t0 = spec.changepoint.value_or(
      std::numeric_limits<double>::infinity());
  if (t_end <= t0 || t_start >= t0) {
    bool const post = spec.changepoint && t_start >= t0;
    Eigen::MatrixXd const q_mat = intensity_side(params, spec, x, post);
    return clamp_probabilities(
        matrix_exponential((t_end - t_start) * q_mat));
  }
  Eigen::MatrixXd const pre =
      matrix_exponential((t0 - t_start) * intensity_side(params, spec, x, false));
  Eigen::MatrixXd const post =
      matrix_exponential((t_end - t0) * intensity_side(params, spec, x, true));
  return clamp_probabilities(pre * post);
}

double panel_loglik(ctmc_params const& params, intensity_spec const& spec,
                    std::vector<panel_path> const& paths, unsigned threads,
                    std::size_t* floored) {
  std::vector<double> ll(paths.size(), 0.0);
  std::vector<std::size_t> floors(paths.size(), 0);
  std::vector<char> failed(paths.size(), 0);
  parallel_for(paths.size(), threads, [&](std::size_t i) {
    auto const& obs = paths[i].observations;
    double acc = 0.0;
    try {
      for (std::size_t j = 0; j + 1 < obs.size(); ++j) {
        Eigen::MatrixXd const p = interval_probability(
            params, spec, obs[j].x, obs[j].km, obs[j + 1].km);
        double pij = p(obs[j].state - 1, obs[j + 1].state - 1);
        if (pij < kProbFloor) {
          pij = kProbFloor;
          ++floors[i];
        }
        acc += std::log(pij);
      }
    } catch (std::exception const&) {
      failed[i] = 1;
    }
    ll[i] = acc;
  });
  double total = 0.0;
  std::size_t nfloor = 0;
  bool any_failed = false;
  for (std::size_t i = 0; i != paths.size(); ++i) {
    total += ll[i];
    nfloor += floors[i];
    any_failed = any_failed || failed[i] != 0;
  }
  if (floored) {
    *floored = nfloor;
  }
  if (any_failed || !std::isfinite(total)) {
    return -std::numeric_limits<double>::infinity();
  }
  return total;
}

void validate_paths(std::vector<panel_path> const& paths,
                    intensity_spec const& spec) {
  for (auto const& path : paths) {
    for (std::size_t j = 0; j != path.observations.size(); ++j) {
      auto const& o = path.observations[j];
      if (o.state < 1 || o.state > spec.q) {
        throw validation_error{"train " + path.train_id + ": state " +
                               std::to_string(o.state) + " is out of range"};
      }
      if (static_cast<std::size_t>(o.x.size()) != spec.n_covariates()) {
        throw validation_error{"train " + path.train_id +
                               ": covariate dimension mismatch"};
      }
      if (j > 0 && !(o.km > path.observations[j - 1].km)) {
        throw validation_error{"train " + path.train_id +
                               ": observation distances must increase"};
      }
    }
  }
}

ctmc_fit fit_ctmc(std::vector<panel_path> const& paths,
                  intensity_spec const& spec, ctmc_fit_options const& opts) {
  spec.validate();
  validate_paths(paths, spec);

  std::size_t n_intervals = 0;
  double total_length = 0.0;
  std::vector<std::size_t> change_counts(spec.n_transitions(), 0);
  std::vector<double> state_exposure(static_cast<std::size_t>(spec.q), 0.0);
  for (auto const& path : paths) {
    auto const& obs = path.observations;
    if (obs.size() >= 2) {
      n_intervals += obs.size() - 1;
      total_length += obs.back().km - obs.front().km;
    }
    for (std::size_t j = 0; j + 1 < obs.size(); ++j) {
      state_exposure[static_cast<std::size_t>(obs[j].state - 1)] +=
          obs[j + 1].km - obs[j].km;
      for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
        if (obs[j].state == spec.transitions[k].first &&
            obs[j + 1].state == spec.transitions[k].second) {
          ++change_counts[k];
        }
      }
    }
  }
  if (n_intervals == 0) {
    throw validation_error{"no observation intervals in panel data"};
  }

  ctmc_fit fit;
  fit.spec = spec;
  for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
    if (change_counts[k] == 0) {
      auto const [r, s] = spec.transitions[k];
      fit.warnings.push_back("transition " + std::to_string(r) + "->" +
                             std::to_string(s) +
                             " never observed as a direct state change");
    }
  }

  auto const p = static_cast<Eigen::Index>(spec.n_covariates());
  ctmc_params init;
  if (opts.init) {
    init = *opts.init;
  } else {
    for (std::size_t k = 0; k != spec.n_transitions(); ++k) {
      double const count =
          change_counts[k] > 0 ? static_cast<double>(change_counts[k]) : 0.5;
      // Crude occurrence/exposure rate; time spent in the source state, not the
      // whole path, is the denominator that lands in the right basin.
      double const expo =
          state_exposure[static_cast<std::size_t>(spec.transitions[k].first - 1)];
      init.log_q0.push_back(std::log(count / (expo > 0.0 ? expo : total_length)));
      init.beta.push_back(Eigen::VectorXd::Zero(p));
      if (spec.split_covariates) {
        init.beta_post.push_back(Eigen::VectorXd::Zero(p));
      }
      if (spec.changepoint) {
        init.z.push_back(0.0);
      }
    }
  }

  auto const st = covariate_standardization(paths, p);
  auto const paths_std = standardize_paths(paths, st);

  // Trial points far from the optimum can overflow the intensity exponentials;
  // mapping those to +inf lets the line search back off instead of aborting.
  auto const make_negll = [&](std::vector<panel_path> const& data) {
    return [&spec, &data, &opts](Eigen::VectorXd const& theta) {
      try {
        double const v = -panel_loglik(ctmc_params::unflatten(theta, spec),
                                       spec, data, opts.threads);
        return std::isfinite(v) ? v : std::numeric_limits<double>::infinity();
      } catch (std::exception const&) {
        return std::numeric_limits<double>::infinity();
      }
    };
  };
  opt::objective const negll = make_negll(paths);
  opt::objective const negll_std = make_negll(paths_std);

  opt::bfgs_options bopts;
  bopts.max_iter = opts.max_iter;
  bopts.tol = opts.tol;
  auto const res = opt::minimize(
      negll_std, to_standardized(init, st, spec).flatten(spec), bopts);

  fit.params = from_standardized(ctmc_params::unflatten(res.x, spec), st, spec);
  fit.iterations = res.iterations;
  fit.evaluations = static_cast<int>(res.evaluations);
  fit.converged = res.converged;
  if (!res.converged) {
    fit.warnings.push_back("optimizer did not converge within " +
                           std::to_string(opts.max_iter) + " iterations");
  }
  fit.loglik =
      panel_loglik(fit.params, spec, paths, opts.threads, &fit.floored_transitions);
  if (fit.floored_transitions > 0) {
    fit.warnings.push_back(
        std::to_string(fit.floored_transitions) +
        " observed transitions had numerically zero probability");
  }

  if (opts.compute_covariance) {
    Eigen::MatrixXd const hess =
        opt::numerical_hessian(negll, fit.params.flatten(spec), 1e-4);
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es{hess};
    if (es.info() == Eigen::Success && es.eigenvalues().minCoeff() > 0.0) {
      Eigen::MatrixXd cov = hess.ldlt().solve(
          Eigen::MatrixXd::Identity(hess.rows(), hess.cols()));
      fit.covariance = 0.5 * (cov + cov.transpose());
    } else {
      fit.warnings.push_back(
          "observed information is not positive definite; covariance omitted");
    }
  }
  return fit;
}

evolution evolution_probabilities(ctmc_params const& params,
                                  intensity_spec const& spec,
                                  Eigen::VectorXd const& x,
                                  std::vector<double> grid, int initial_state) {
  if (grid.empty() || grid.front() != 0.0) {
    throw validation_error{"evolution grid must start at 0"};
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw validation_error{"evolution grid must be ascending"};
  }
  if (initial_state < 1 || initial_state > spec.q) {
    throw validation_error{"initial state out of range"};
  }
  evolution evo;
  evo.occupancy.reserve(grid.size());
  for (double const d : grid) {
    Eigen::MatrixXd const p = interval_probability(params, spec, x, 0.0, d);
    evo.occupancy.emplace_back(p.row(initial_state - 1).transpose());
  }
  evo.grid = std::move(grid);
  return evo;
}

}  // namespace railhaz::ctmc
