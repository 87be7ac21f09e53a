#include "railhaz/cox.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>

#include "railhaz/common.hpp"

namespace railhaz::cox {

namespace {

// Below this the swept risk-set mass is rebuilt by direct scan; keeps the
// log of the denominator finite for any finite linear predictor.
constexpr double kSweepFloor = 1e-280;

struct event_group {
  double t;
  int count;
  std::vector<int> rows;  // dataset indices of the tied event rows
};

struct stratum_index {
  int stratum;
  std::vector<int> rows;            // dataset indices
  std::vector<int> by_exit_desc;    // into rows
  std::vector<int> by_entry_desc;   // into rows
  std::vector<event_group> events_desc;
};

std::vector<stratum_index> build_index(cox_dataset const& data) {
  std::map<int, stratum_index> by_stratum;
  for (std::size_t i = 0; i != data.rows.size(); ++i) {
    auto& s = by_stratum[data.rows[i].stratum];
    s.stratum = data.rows[i].stratum;
    s.rows.push_back(static_cast<int>(i));
  }
  std::vector<stratum_index> out;
  out.reserve(by_stratum.size());
  for (auto& [id, s] : by_stratum) {
    auto const n = s.rows.size();
    s.by_exit_desc.resize(n);
    s.by_entry_desc.resize(n);
    std::iota(s.by_exit_desc.begin(), s.by_exit_desc.end(), 0);
    std::iota(s.by_entry_desc.begin(), s.by_entry_desc.end(), 0);
    std::sort(s.by_exit_desc.begin(), s.by_exit_desc.end(),
              [&](int a, int b) {
                return data.rows[s.rows[a]].exit > data.rows[s.rows[b]].exit;
              });
    std::sort(s.by_entry_desc.begin(), s.by_entry_desc.end(),
              [&](int a, int b) {
                return data.rows[s.rows[a]].entry > data.rows[s.rows[b]].entry;
              });
    // Tied event distances collapse into one Breslow group.
    std::vector<int> event_rows;
    for (int const r : s.rows) {
      if (data.rows[r].event) {
        event_rows.push_back(r);
      }
    }
    std::sort(event_rows.begin(), event_rows.end(), [&](int a, int b) {
      return data.rows[a].exit > data.rows[b].exit;
    });
    for (int const r : event_rows) {
      double const t = data.rows[r].exit;
      if (s.events_desc.empty() || s.events_desc.back().t != t) {
        s.events_desc.push_back({t, 0, {}});
      }
      s.events_desc.back().count += 1;
      s.events_desc.back().rows.push_back(r);
    }
    out.push_back(std::move(s));
  }
  return out;
}

struct eval_out {
  double loglik = 0.0;
  Eigen::VectorXd grad;
  Eigen::MatrixXd info;
};

// One pass over all strata: log partial likelihood, optionally its
// derivatives, optionally the Breslow baseline increments. Risk-set sums
// are maintained by a descending sweep over event distances, adding rows as
// the sweep passes their exit and dropping them past their entry; the
// linear predictor is shifted by the stratum maximum before exponentiation.
void evaluate(Eigen::VectorXd const& beta, cox_dataset const& data,
              std::vector<stratum_index> const& index, bool derivs,
              eval_out& out, std::vector<baseline_hazard>* baseline_out) {
  auto const p = beta.size();
  out.loglik = 0.0;
  if (derivs) {
    out.grad = Eigen::VectorXd::Zero(p);
    out.info = Eigen::MatrixXd::Zero(p, p);
  }
  if (baseline_out) {
    baseline_out->clear();
  }

  std::vector<double> lp, w;
  Eigen::VectorXd s1(p), xbar(p);
  Eigen::MatrixXd s2(p, p);

  for (auto const& s : index) {
    auto const n = s.rows.size();
    lp.resize(n);
    w.resize(n);
    double shift = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i != n; ++i) {
      lp[i] = beta.dot(data.rows[s.rows[i]].x);
      shift = std::max(shift, lp[i]);
    }
    for (std::size_t i = 0; i != n; ++i) {
      w[i] = std::exp(lp[i] - shift);
    }

    double s0 = 0.0;
    s1.setZero();
    s2.setZero();
    std::size_t add_ptr = 0, rem_ptr = 0;

    baseline_hazard* bl = nullptr;
    if (baseline_out) {
      baseline_out->push_back({s.stratum, {}, {}});
      bl = &baseline_out->back();
    }

    for (auto const& ev : s.events_desc) {
      while (add_ptr < n &&
             data.rows[s.rows[s.by_exit_desc[add_ptr]]].exit >= ev.t) {
        auto const i = static_cast<std::size_t>(s.by_exit_desc[add_ptr]);
        s0 += w[i];
        if (derivs) {
          s1 += w[i] * data.rows[s.rows[i]].x;
          s2.selfadjointView<Eigen::Lower>().rankUpdate(
              data.rows[s.rows[i]].x, w[i]);
        }
        ++add_ptr;
      }
      while (rem_ptr < n &&
             data.rows[s.rows[s.by_entry_desc[rem_ptr]]].entry >= ev.t) {
        auto const i = static_cast<std::size_t>(s.by_entry_desc[rem_ptr]);
        s0 -= w[i];
        if (derivs) {
          s1 -= w[i] * data.rows[s.rows[i]].x;
          s2.selfadjointView<Eigen::Lower>().rankUpdate(
              data.rows[s.rows[i]].x, -w[i]);
        }
        ++rem_ptr;
      }

      double log_denom;
      double s0_use = s0;
      Eigen::VectorXd const* s1_use = &s1;
      Eigen::MatrixXd const* s2_use = &s2;
      Eigen::VectorXd s1_local;
      Eigen::MatrixXd s2_local;
      if (!(s0 > kSweepFloor)) {
        // Underflow or cancellation: rebuild this risk set exactly.
        double local_shift = -std::numeric_limits<double>::infinity();
        for (std::size_t i = 0; i != n; ++i) {
          auto const& r = data.rows[s.rows[i]];
          if (r.entry < ev.t && ev.t <= r.exit) {
            local_shift = std::max(local_shift, lp[i]);
          }
        }
        if (!std::isfinite(local_shift)) {
          throw validation_error{"empty risk set at an event distance"};
        }
        double l0 = 0.0;
        s1_local = Eigen::VectorXd::Zero(p);
        s2_local = Eigen::MatrixXd::Zero(p, p);
        for (std::size_t i = 0; i != n; ++i) {
          auto const& r = data.rows[s.rows[i]];
          if (r.entry < ev.t && ev.t <= r.exit) {
            double const wi = std::exp(lp[i] - local_shift);
            l0 += wi;
            if (derivs) {
              s1_local += wi * r.x;
              s2_local.selfadjointView<Eigen::Lower>().rankUpdate(r.x, wi);
            }
          }
        }
        log_denom = local_shift + std::log(l0);
        s0_use = l0;
        s1_use = &s1_local;
        s2_use = &s2_local;
      } else {
        log_denom = shift + std::log(s0);
      }

      for (int const r : ev.rows) {
        out.loglik += beta.dot(data.rows[r].x);
      }
      out.loglik -= ev.count * log_denom;

      if (derivs) {
        xbar = *s1_use / s0_use;
        for (int const r : ev.rows) {
          out.grad += data.rows[r].x;
        }
        out.grad -= ev.count * xbar;
        Eigen::MatrixXd full = s2_use->selfadjointView<Eigen::Lower>();
        out.info += ev.count * (full / s0_use - xbar * xbar.transpose());
      }
      if (bl) {
        bl->knots.push_back(ev.t);
        bl->cumhaz.push_back(ev.count * std::exp(-log_denom));
      }
    }

    if (bl) {
      std::reverse(bl->knots.begin(), bl->knots.end());
      std::reverse(bl->cumhaz.begin(), bl->cumhaz.end());
      std::partial_sum(bl->cumhaz.begin(), bl->cumhaz.end(),
                       bl->cumhaz.begin());
    }
  }
}

}  // namespace

std::size_t cox_dataset::n_events() const {
  return static_cast<std::size_t>(
      std::count_if(rows.begin(), rows.end(),
                    [](cox_row const& r) { return r.event; }));
}

void cox_dataset::validate() const {
  auto const p = dim();
  for (auto const& r : rows) {
    if (!(r.exit > r.entry)) {
      throw validation_error{"cox row for train " + r.train_id +
                             ": exit must exceed entry"};
    }
    if (static_cast<std::size_t>(r.x.size()) != p) {
      throw validation_error{"cox row covariate dimension mismatch"};
    }
    if (!r.x.allFinite() || !std::isfinite(r.entry) || !std::isfinite(r.exit)) {
      throw validation_error{"cox row has non-finite values"};
    }
    if (r.stratum < 1) {
      throw validation_error{"cox row stratum must be >= 1"};
    }
  }
  // Disjoint intervals within (train, stratum).
  std::map<std::pair<std::string, int>, std::vector<std::pair<double, double>>>
      spans;
  for (auto const& r : rows) {
    spans[{r.train_id, r.stratum}].emplace_back(r.entry, r.exit);
  }
  for (auto& [key, v] : spans) {
    std::sort(v.begin(), v.end());
    for (std::size_t i = 1; i < v.size(); ++i) {
      if (v[i].first < v[i - 1].second - 1e-9) {
        throw validation_error{"overlapping intervals for train " + key.first +
                               " stratum " + std::to_string(key.second)};
      }
    }
  }
}

double baseline_hazard::at(double t) const {
  auto const it = std::upper_bound(knots.begin(), knots.end(), t);
  if (it == knots.begin()) {
    return 0.0;
  }
  return cumhaz[static_cast<std::size_t>(it - knots.begin()) - 1];
}

baseline_hazard const* cox_fit::baseline_for(int stratum) const {
  for (auto const& b : baseline) {
    if (b.stratum == stratum) {
      return &b;
    }
  }
  return nullptr;
}

double partial_loglik(Eigen::VectorXd const& beta, cox_dataset const& data) {
  if (static_cast<std::size_t>(beta.size()) != data.dim()) {
    throw validation_error{"beta dimension does not match covariates"};
  }
  auto const index = build_index(data);
  eval_out out;
  evaluate(beta, data, index, false, out, nullptr);
  return out.loglik;
}

void score_and_information(Eigen::VectorXd const& beta,
                           cox_dataset const& data, Eigen::VectorXd& gradient,
                           Eigen::MatrixXd& information) {
  if (static_cast<std::size_t>(beta.size()) != data.dim()) {
    throw validation_error{"beta dimension does not match covariates"};
  }
  auto const index = build_index(data);
  eval_out out;
  evaluate(beta, data, index, true, out, nullptr);
  gradient = std::move(out.grad);
  information = std::move(out.info);
}

cox_fit fit_cox(cox_dataset const& data, fit_options const& opts) {
  data.validate();
  if (data.n_events() == 0) {
    throw validation_error{"no events in dataset"};
  }
  auto const p = static_cast<Eigen::Index>(data.dim());
  if (p == 0) {
    throw validation_error{"dataset has no covariates"};
  }
  auto const index = build_index(data);

  auto const penalized = [&](double ll, Eigen::VectorXd const& b) {
    return ll - opts.ridge * b.squaredNorm();
  };

  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  eval_out cur;
  evaluate(beta, data, index, true, cur, nullptr);
  double const null_ll = cur.loglik;

  auto const newton_direction = [&](eval_out const& e,
                                    Eigen::VectorXd const& b) {
    Eigen::MatrixXd h = e.info;
    Eigen::VectorXd g = e.grad;
    if (opts.ridge > 0.0) {
      h.diagonal().array() += 2.0 * opts.ridge;
      g -= 2.0 * opts.ridge * b;
    }
    Eigen::LDLT<Eigen::MatrixXd> ldlt{h};
    auto const d = ldlt.vectorD();
    if (ldlt.info() != Eigen::Success || !(d.minCoeff() > 0.0) ||
        d.minCoeff() < 1e-12 * d.maxCoeff()) {
      throw validation_error{
          "singular information matrix (covariates may be constant within "
          "risk sets or separable); consider a positive ridge option"};
    }
    return Eigen::VectorXd{ldlt.solve(g)};
  };

  bool converged = false;
  int iterations = 0;
  for (int it = 0; it != opts.max_iter && !converged; ++it) {
    Eigen::VectorXd const dir = newton_direction(cur, beta);
    double step = 1.0;
    bool accepted = false;
    for (int half = 0; half <= 10; ++half, step *= 0.5) {
      Eigen::VectorXd cand = beta + step * dir;
      eval_out next;
      evaluate(cand, data, index, true, next, nullptr);
      if (!std::isfinite(next.loglik)) {
        continue;
      }
      double const delta = penalized(next.loglik, cand) -
                           penalized(cur.loglik, beta);
      if (half == 0 &&
          std::fabs(delta) / (std::fabs(cur.loglik) + 1.0) < opts.tol) {
        beta = std::move(cand);
        cur = std::move(next);
        ++iterations;
        converged = true;
        accepted = true;
        break;
      }
      if (delta > 0.0) {
        beta = std::move(cand);
        cur = std::move(next);
        ++iterations;
        accepted = true;
        break;
      }
    }
    if (!accepted) {
      break;
    }
  }

  // The stopping rule fires on the loglik change; a couple of extra Newton
  // steps push the score to the numerical floor.
  for (int polish = 0; converged && polish != 5; ++polish) {
    if (cur.grad.cwiseAbs().maxCoeff() < 1e-8) {
      break;
    }
    Eigen::VectorXd const dir = newton_direction(cur, beta);
    Eigen::VectorXd cand = beta + dir;
    eval_out next;
    evaluate(cand, data, index, true, next, nullptr);
    if (!std::isfinite(next.loglik)) {
      break;
    }
    beta = std::move(cand);
    cur = std::move(next);
    ++iterations;
  }

  cox_fit fit;
  fit.beta = beta;
  fit.loglik = cur.loglik;
  fit.null_loglik = null_ll;
  fit.iterations = iterations;
  fit.converged = converged;
  fit.covariate_names = data.covariate_names;

  Eigen::LDLT<Eigen::MatrixXd> ldlt{cur.info};
  Eigen::MatrixXd cov = ldlt.solve(Eigen::MatrixXd::Identity(p, p));
  fit.covariance = 0.5 * (cov + cov.transpose());

  eval_out final_pass;
  evaluate(beta, data, index, false, final_pass, &fit.baseline);
  return fit;
}

survival_curve predict_survival(cox_fit const& fit, Eigen::VectorXd const& x,
                                int stratum, std::vector<double> grid) {
  if (x.size() != fit.beta.size()) {
    throw validation_error{"covariate vector dimension mismatch"};
  }
  if (!x.allFinite()) {
    throw validation_error{"covariate vector has non-finite values"};
  }
  auto const* bl = fit.baseline_for(stratum);
  if (bl == nullptr || bl->knots.empty()) {
    throw validation_error{"stratum " + std::to_string(stratum) +
                           " has no events; no baseline hazard available"};
  }
  if (!std::is_sorted(grid.begin(), grid.end())) {
    throw validation_error{"survival grid must be ascending"};
  }
  double const scale = std::exp(fit.beta.dot(x));
  survival_curve curve;
  curve.stratum = stratum;
  curve.survival.reserve(grid.size());
  for (double const t : grid) {
    curve.survival.push_back(std::exp(-bl->at(t) * scale));
  }
  curve.grid = std::move(grid);
  return curve;
}

}  // namespace railhaz::cox
