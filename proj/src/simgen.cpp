#include "railhaz/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "railhaz/common.hpp"
#include "railhaz/rng.hpp"

namespace railhaz::sim {

namespace {

Eigen::VectorXd draw_covariates(sim_config const& config, rng::xoshiro256pp& g) {
  switch (config.covariates) {
    case covariate_kind::weather: {
      Eigen::Vector4d x;
      x[0] = g.uniform(-15.0, 5.0);
      x[1] = g.uniform(60.0, 100.0);
      x[2] = g.uniform(0.0, 20.0);
      x[3] = g.bernoulli(0.3) ? 1.0 : 0.0;
      return x;
    }
    case covariate_kind::uniform: {
      Eigen::Vector4d x;
      x[0] = g.uniform(-1.0, 1.0);
      x[1] = g.uniform(-1.0, 1.0);
      x[2] = g.uniform(-1.0, 1.0);
      x[3] = g.bernoulli(0.3) ? 1.0 : 0.0;
      return x;
    }
    case covariate_kind::constant:
      return config.constant_x;
  }
  throw std::logic_error{"unreachable"};
}

piecewise_rate const& baseline_for(sim_config const& config, int stratum) {
  auto const idx = std::min<std::size_t>(static_cast<std::size_t>(stratum) - 1,
                                         config.baseline.size() - 1);
  return config.baseline[idx];
}

// First baseline knot strictly beyond gap distance g, or +inf.
double next_knot(piecewise_rate const& base, double g) {
  for (double const k : base.knots) {
    if (k > g + 1e-12) {
      return k;
    }
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

double piecewise_rate::at(double t) const {
  std::size_t i = 0;
  while (i + 1 < knots.size() && t >= knots[i + 1]) {
    ++i;
  }
  return rates[i];
}

void piecewise_rate::validate() const {
  if (knots.empty() || knots.size() != rates.size()) {
    throw validation_error{"piecewise rate needs matching knots and rates"};
  }
  if (knots.front() != 0.0) {
    throw validation_error{"piecewise rate must start at knot 0"};
  }
  if (!std::is_sorted(knots.begin(), knots.end())) {
    throw validation_error{"piecewise rate knots must be ascending"};
  }
  for (double const r : rates) {
    if (!(r >= 0.0) || !std::isfinite(r)) {
      throw validation_error{"piecewise rates must be finite and nonnegative"};
    }
  }
}

std::vector<double> sim_config::spot_grid() const {
  if (!spots.empty()) {
    if (spots.size() < 2 || !std::is_sorted(spots.begin(), spots.end()) ||
        std::adjacent_find(spots.begin(), spots.end()) != spots.end()) {
      throw validation_error{"explicit spots must be >=2 strictly ascending"};
    }
    return spots;
  }
  if (!(spot_spacing > 0.0) || !(line_length_km > 0.0)) {
    throw validation_error{"spot spacing and line length must be positive"};
  }
  std::vector<double> grid;
  for (double d = 0.0; d < line_length_km - 1e-9; d += spot_spacing) {
    grid.push_back(d);
  }
  grid.push_back(line_length_km);
  return grid;
}

void sim_config::validate_cox() const {
  if (n_trains <= 0) {
    throw validation_error{"n_trains must be positive"};
  }
  if (cox_beta.size() != 4) {
    throw validation_error{"cox simulation uses the four standard covariates"};
  }
  if (covariates == covariate_kind::constant && constant_x.size() != 4) {
    throw validation_error{"constant covariate vector must have length 4"};
  }
  if (baseline.empty()) {
    throw validation_error{"at least one baseline rate function is required"};
  }
  for (auto const& b : baseline) {
    b.validate();
  }
  spot_grid();
}

void sim_config::validate_ctmc() const {
  if (n_trains <= 0) {
    throw validation_error{"n_trains must be positive"};
  }
  ctmc_spec.validate();
  if (initial_state < 1 || initial_state > ctmc_spec.q) {
    throw validation_error{"initial state out of range"};
  }
  if (covariates == covariate_kind::constant &&
      static_cast<std::size_t>(constant_x.size()) !=
          ctmc_spec.n_covariates()) {
    throw validation_error{"constant covariate vector dimension mismatch"};
  }
  spot_grid();
}

std::vector<io::section_row> simulate_cox(sim_config const& config) {
  config.validate_cox();
  auto const grid = config.spot_grid();
  auto const n_sections = grid.size() - 1;
  std::vector<io::section_row> out;
  out.reserve(static_cast<std::size_t>(config.n_trains) * n_sections);

  for (int train = 0; train != config.n_trains; ++train) {
    auto g = rng::xoshiro256pp::for_unit(config.seed,
                                         static_cast<std::uint64_t>(train));
    std::vector<Eigen::VectorXd> x(n_sections);
    for (std::size_t s = 0; s != n_sections; ++s) {
      x[s] = draw_covariates(config, g);
    }
    std::string const id = "sim" + std::to_string(train + 1);

    int stratum = 1;
    double gap_zero = grid.front();
    double target = g.exponential(1.0);  // unit-exponential hazard budget

    for (std::size_t s = 0; s != n_sections; ++s) {
      double const scale = std::exp(config.cox_beta.dot(x[s]));
      double row_start = grid[s];
      double pos = grid[s];
      double const end = grid[s + 1];
      while (pos < end) {
        auto const& base = baseline_for(config, stratum);
        double const gap = pos - gap_zero;
        double const rate = base.at(gap) * scale;
        double const stop =
            std::min(end, gap_zero + next_knot(base, gap));
        double const step = stop - pos;
        if (rate > 0.0 && rate * step >= target) {
          double const event_pos = pos + target / rate;
          io::section_row row;
          row.train_id = id;
          row.stratum = stratum;
          row.start_km = row_start;
          row.stop_km = event_pos;
          row.primary_delay = true;
          row.temperature_c = x[s][0];
          row.humidity_pct = x[s][1];
          row.snow_depth_cm = x[s][2];
          row.precip_cat = static_cast<int>(x[s][3]);
          out.push_back(std::move(row));
          ++stratum;
          gap_zero = event_pos;
          row_start = event_pos;
          pos = event_pos;
          target = g.exponential(1.0);
        } else {
          target -= rate * step;
          pos = stop;
        }
      }
      if (end > row_start) {
        io::section_row row;
        row.train_id = id;
        row.stratum = stratum;
        row.start_km = row_start;
        row.stop_km = end;
        row.primary_delay = false;
        row.temperature_c = x[s][0];
        row.humidity_pct = x[s][1];
        row.snow_depth_cm = x[s][2];
        row.precip_cat = static_cast<int>(x[s][3]);
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

std::vector<ctmc::panel_path> simulate_ctmc(sim_config const& config) {
  config.validate_ctmc();
  auto const grid = config.spot_grid();
  auto const n_sections = grid.size() - 1;
  auto const& spec = config.ctmc_spec;
  double const cp =
      spec.changepoint.value_or(std::numeric_limits<double>::infinity());

  std::vector<ctmc::panel_path> paths;
  paths.reserve(static_cast<std::size_t>(config.n_trains));

  for (int train = 0; train != config.n_trains; ++train) {
    auto g = rng::xoshiro256pp::for_unit(config.seed,
                                         static_cast<std::uint64_t>(train));
    std::vector<Eigen::VectorXd> x(n_sections);
    for (std::size_t s = 0; s != n_sections; ++s) {
      x[s] = draw_covariates(config, g);
    }

    ctmc::panel_path path;
    path.train_id = "sim" + std::to_string(train + 1);
    int state = config.initial_state;

    for (std::size_t s = 0; s != n_sections; ++s) {
      path.observations.push_back({grid[s], state, x[s]});
      double pos = grid[s];
      double const end = grid[s + 1];
      while (pos < end) {
        double const refresh = (pos < cp && cp < end) ? cp : end;
        Eigen::MatrixXd const q_mat =
            ctmc::build_intensity(config.ctmc_truth, spec, x[s], pos);
        double const total = -q_mat(state - 1, state - 1);
        if (!(total > 0.0)) {
          pos = refresh;
          continue;
        }
        double const jump = pos + g.exponential(total);
        if (jump >= refresh) {
          pos = refresh;
          continue;
        }
        double u = g.uniform() * total;
        int dest = state;
        int fallback = state;
        for (int c = 0; c != spec.q; ++c) {
          if (c == state - 1 || !(q_mat(state - 1, c) > 0.0)) {
            continue;
          }
          fallback = c + 1;
          u -= q_mat(state - 1, c);
          if (u <= 0.0) {
            dest = c + 1;
            break;
          }
        }
        state = dest != state ? dest : fallback;
        pos = jump;
      }
    }
    path.observations.push_back({grid.back(), state, x[n_sections - 1]});
    paths.push_back(std::move(path));
  }
  return paths;
}

}  // namespace railhaz::sim
