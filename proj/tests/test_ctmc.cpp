#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include <Eigen/Dense>

#include "railhaz/common.hpp"
#include "railhaz/ctmc.hpp"
#include "railhaz/rng.hpp"
#include "railhaz/simgen.hpp"

using namespace railhaz;
using railhaz::rng::xoshiro256pp;

namespace {

// Closed-form transition matrix of the two-state chain with rates a (1->2)
// and b (2->1) over length u; the oracle for everything below.
Eigen::Matrix2d p_closed(double a, double b, double u) {
  double const c = a + b;
  double const e = std::exp(-c * u);
  Eigen::Matrix2d p;
  p << (b + a * e) / c, a * (1.0 - e) / c, b * (1.0 - e) / c, (a + b * e) / c;
  return p;
}

ctmc::panel_path path_of(std::vector<std::pair<double, int>> const& obs,
                         Eigen::VectorXd const& x) {
  ctmc::panel_path path;
  path.train_id = "p";
  for (auto const& [km, state] : obs) {
    path.observations.push_back({km, state, x});
  }
  return path;
}

ctmc::ctmc_params no_covariate_params(double l0_12, double l0_21) {
  ctmc::ctmc_params params;
  params.log_q0 = {l0_12, l0_21};
  params.beta = {Eigen::VectorXd(0), Eigen::VectorXd(0)};
  return params;
}

}  // namespace

TEST_CASE("param_count and param_names follow the flattening order") {
  auto const plain = ctmc::intensity_spec::two_state({"a", "b"}, std::nullopt);
  CHECK(plain.param_count() == 6);
  CHECK(plain.param_names() ==
        std::vector<std::string>{"q12.log_q0", "q12.beta.a", "q12.beta.b",
                                 "q21.log_q0", "q21.beta.a", "q21.beta.b"});

  auto const change = ctmc::intensity_spec::two_state({"a"}, 330.0);
  CHECK(change.param_count() == 6);
  CHECK(change.param_names() ==
        std::vector<std::string>{"q12.log_q0", "q12.beta.a", "q12.z",
                                 "q21.log_q0", "q21.beta.a", "q21.z"});

  auto const split = ctmc::intensity_spec::two_state({"a"}, 330.0, true);
  CHECK(split.param_count() == 8);
  CHECK(split.param_names() ==
        std::vector<std::string>{"q12.log_q0", "q12.beta.a", "q12.beta_post.a",
                                 "q12.z", "q21.log_q0", "q21.beta.a",
                                 "q21.beta_post.a", "q21.z"});
}

TEST_CASE("intensity_spec validation rejects malformed specs") {
  ctmc::intensity_spec spec;
  spec.q = 1;
  spec.transitions = {{1, 2}};
  CHECK_THROWS_AS(spec.validate(), validation_error);
  spec.q = 2;
  spec.transitions = {};
  CHECK_THROWS_AS(spec.validate(), validation_error);
  spec.transitions = {{1, 3}};
  CHECK_THROWS_AS(spec.validate(), validation_error);
  spec.transitions = {{1, 1}};
  CHECK_THROWS_AS(spec.validate(), validation_error);
  spec.transitions = {{1, 2}};
  spec.split_covariates = true;
  CHECK_THROWS_AS(spec.validate(), validation_error);
  spec.changepoint = 100.0;
  CHECK_NOTHROW(spec.validate());
}

TEST_CASE("flatten and unflatten are inverse in every mode") {
  xoshiro256pp g(1212);
  for (bool with_change : {false, true}) {
    for (bool split : {false, true}) {
      if (split && !with_change) {
        continue;
      }
      auto const spec = ctmc::intensity_spec::two_state(
          {"u", "v", "w"},
          with_change ? std::optional<double>{200.0} : std::nullopt, split);
      Eigen::VectorXd theta(spec.param_count());
      for (Eigen::Index i = 0; i != theta.size(); ++i) {
        theta[i] = g.uniform(-2.0, 2.0);
      }
      auto const params = ctmc::ctmc_params::unflatten(theta, spec);
      CHECK((params.flatten(spec) - theta).cwiseAbs().maxCoeff() == 0.0);
      CHECK(params.log_q0.size() == 2);
      CHECK(params.beta[1].size() == 3);
      CHECK(params.beta_post.size() == (split ? 2 : 0));
      CHECK(params.z.size() == (with_change ? 2 : 0));
    }
  }
}

TEST_CASE("build_intensity exponentiates the linear predictor") {
  auto const spec = ctmc::intensity_spec::two_state({"a", "b"}, std::nullopt);
  ctmc::ctmc_params params;
  params.log_q0 = {std::log(0.1), std::log(0.3)};
  params.beta = {Eigen::Vector2d{0.5, -0.2}, Eigen::Vector2d{0.0, 0.4}};
  Eigen::Vector2d const x{1.0, 2.0};
  Eigen::MatrixXd const q = ctmc::build_intensity(params, spec, x, 50.0);
  CHECK(q(0, 1) == doctest::Approx(0.1 * std::exp(0.5 - 0.4)).epsilon(1e-14));
  CHECK(q(1, 0) == doctest::Approx(0.3 * std::exp(0.8)).epsilon(1e-14));
  CHECK(q(0, 0) == doctest::Approx(-q(0, 1)).epsilon(1e-14));
  CHECK(q.row(0).sum() == doctest::Approx(0.0).epsilon(1.0).scale(1e-15));
  CHECK(q.row(1).sum() == doctest::Approx(0.0).epsilon(1.0).scale(1e-15));
}

TEST_CASE("unit covariate steps scale intensities by exact hazard ratios") {
  auto const spec = ctmc::intensity_spec::two_state({"a", "b"}, std::nullopt);
  ctmc::ctmc_params params;
  params.log_q0 = {-2.0, -1.0};
  params.beta = {Eigen::Vector2d{0.28, -0.17}, Eigen::Vector2d{-0.05, 0.33}};
  Eigen::Vector2d const x{0.7, -1.1};
  for (int j = 0; j != 2; ++j) {
    Eigen::Vector2d stepped = x;
    stepped[j] += 1.0;
    auto const q0 = ctmc::build_intensity(params, spec, x, 0.0);
    auto const q1 = ctmc::build_intensity(params, spec, stepped, 0.0);
    CHECK(q1(0, 1) / q0(0, 1) ==
          doctest::Approx(std::exp(params.beta[0][j])).epsilon(1e-13));
    CHECK(q1(1, 0) / q0(1, 0) ==
          doctest::Approx(std::exp(params.beta[1][j])).epsilon(1e-13));
  }
}

TEST_CASE("the changepoint multiplies intensities by exp(z)") {
  auto const spec = ctmc::intensity_spec::two_state({}, 330.0);
  auto params = no_covariate_params(-2.0, -1.5);
  params.z = {std::log(1.586), std::log(0.7)};
  Eigen::VectorXd const x(0);
  auto const pre = ctmc::build_intensity(params, spec, x, 329.999);
  auto const post = ctmc::build_intensity(params, spec, x, 330.0);
  CHECK(post(0, 1) / pre(0, 1) == doctest::Approx(1.586).epsilon(1e-13));
  CHECK(post(1, 0) / pre(1, 0) == doctest::Approx(0.7).epsilon(1e-13));
}

TEST_CASE("split mode swaps in the post-segment coefficients") {
  auto const spec = ctmc::intensity_spec::two_state({"a"}, 100.0, true);
  ctmc::ctmc_params params;
  params.log_q0 = {-1.0, -1.0};
  params.beta = {Eigen::VectorXd::Constant(1, 0.3),
                 Eigen::VectorXd::Constant(1, 0.1)};
  params.beta_post = {Eigen::VectorXd::Constant(1, -0.6),
                      Eigen::VectorXd::Constant(1, 0.1)};
  params.z = {0.0, 0.0};
  Eigen::VectorXd const x = Eigen::VectorXd::Constant(1, 2.0);
  auto const pre = ctmc::build_intensity(params, spec, x, 0.0);
  auto const post = ctmc::build_intensity(params, spec, x, 100.0);
  CHECK(pre(0, 1) == doctest::Approx(std::exp(-1.0 + 0.6)).epsilon(1e-13));
  CHECK(post(0, 1) == doctest::Approx(std::exp(-1.0 - 1.2)).epsilon(1e-13));
  CHECK(post(1, 0) == doctest::Approx(pre(1, 0)).epsilon(1e-14));
}

TEST_CASE("interval_probability matches the closed form off the changepoint") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  auto const params = no_covariate_params(std::log(0.4), std::log(0.9));
  Eigen::VectorXd const x(0);
  for (double u : {0.1, 1.0, 4.0}) {
    auto const p = ctmc::interval_probability(params, spec, x, 10.0, 10.0 + u);
    CHECK((p - p_closed(0.4, 0.9, u)).cwiseAbs().maxCoeff() < 1e-12);
  }
  // Zero-length interval is the identity.
  auto const p0 = ctmc::interval_probability(params, spec, x, 3.0, 3.0);
  CHECK((p0 - Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() == 0.0);
  CHECK_THROWS_AS(
      (void)ctmc::interval_probability(params, spec, x, 2.0, 1.0),
      validation_error);
}

TEST_CASE("straddling intervals compose the two segment kernels") {
  auto const spec = ctmc::intensity_spec::two_state({}, 5.0);
  auto params = no_covariate_params(std::log(0.4), std::log(0.9));
  params.z = {std::log(2.0), std::log(0.5)};
  Eigen::VectorXd const x(0);
  Eigen::Matrix2d const expected =
      p_closed(0.4, 0.9, 3.0) * p_closed(0.8, 0.45, 4.0);
  auto const p = ctmc::interval_probability(params, spec, x, 2.0, 9.0);
  CHECK((p - expected).cwiseAbs().maxCoeff() < 1e-12);
  // Intervals that merely touch the changepoint use a single segment.
  auto const pre = ctmc::interval_probability(params, spec, x, 1.0, 5.0);
  CHECK((pre - p_closed(0.4, 0.9, 4.0)).cwiseAbs().maxCoeff() < 1e-12);
  auto const post = ctmc::interval_probability(params, spec, x, 5.0, 6.0);
  CHECK((post - p_closed(0.8, 0.45, 1.0)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("panel_loglik reproduces the closed-form worked value") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  auto const params = no_covariate_params(0.0, 0.0);
  Eigen::VectorXd const x(0);
  // Symmetric unit-rate chain over gap ln 2: p11 = (1 + 1/4)/2 = 0.625.
  auto const paths =
      std::vector<ctmc::panel_path>{path_of({{0.0, 1}, {std::log(2.0), 1}}, x)};
  double const ll = ctmc::panel_loglik(params, spec, paths);
  CHECK(ll == doctest::Approx(std::log(0.625)).epsilon(1e-10));
  CHECK(ll == doctest::Approx(-0.470004).epsilon(1e-6));
}

TEST_CASE("panel_loglik adds one closed-form term per interval") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  auto const params = no_covariate_params(std::log(0.7), std::log(1.3));
  Eigen::VectorXd const x(0);
  auto const paths = std::vector<ctmc::panel_path>{
      path_of({{0.0, 1}, {0.8, 2}, {2.1, 2}}, x)};
  double const expected = std::log(p_closed(0.7, 1.3, 0.8)(0, 1)) +
                          std::log(p_closed(0.7, 1.3, 1.3)(1, 1));
  CHECK(ctmc::panel_loglik(params, spec, paths) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("interval covariates come from the left observation") {
  auto const spec = ctmc::intensity_spec::two_state({"a"}, std::nullopt);
  ctmc::ctmc_params params;
  params.log_q0 = {std::log(0.5), std::log(0.5)};
  params.beta = {Eigen::VectorXd::Constant(1, 1.0),
                 Eigen::VectorXd::Constant(1, 1.0)};
  ctmc::panel_path path;
  path.train_id = "p";
  path.observations.push_back({0.0, 1, Eigen::VectorXd::Constant(1, 0.4)});
  path.observations.push_back({1.0, 2, Eigen::VectorXd::Constant(1, -3.0)});
  double const rate = 0.5 * std::exp(0.4);
  double const expected = std::log(p_closed(rate, rate, 1.0)(0, 1));
  CHECK(ctmc::panel_loglik(params, spec, {path}) ==
        doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("impossible observed transitions hit the probability floor") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  // 1->2 rate is numerically zero, yet the panel observes that move.
  auto const params = no_covariate_params(-720.0, 0.0);
  Eigen::VectorXd const x(0);
  auto const paths =
      std::vector<ctmc::panel_path>{path_of({{0.0, 1}, {1.0, 2}}, x)};
  std::size_t floored = 0;
  double const ll = ctmc::panel_loglik(params, spec, paths, 1, &floored);
  CHECK(floored == 1);
  CHECK(ll == doctest::Approx(std::log(1e-300)).epsilon(1e-12));
}

TEST_CASE("overflowing parameters yield -inf instead of throwing") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  auto const params = no_covariate_params(1000.0, 1000.0);
  Eigen::VectorXd const x(0);
  auto const paths = std::vector<ctmc::panel_path>{
      path_of({{0.0, 1}, {1.0, 2}}, x), path_of({{0.0, 2}, {2.0, 1}}, x)};
  for (unsigned threads : {1u, 2u}) {
    double ll = 0.0;
    CHECK_NOTHROW(ll = ctmc::panel_loglik(params, spec, paths, threads));
    CHECK(ll == -std::numeric_limits<double>::infinity());
  }
}

TEST_CASE("panel_loglik is identical across thread counts") {
  xoshiro256pp g(1313);
  auto const spec =
      ctmc::intensity_spec::two_state({"a", "b", "c", "d"}, 50.0);
  ctmc::ctmc_params params;
  params.log_q0 = {-3.0, -2.5};
  params.beta = {Eigen::Vector4d{0.3, -0.1, 0.2, 0.1},
                 Eigen::Vector4d{-0.2, 0.1, 0.0, 0.3}};
  params.z = {0.4, -0.3};
  std::vector<ctmc::panel_path> paths;
  for (int i = 0; i != 40; ++i) {
    ctmc::panel_path path;
    path.train_id = "t" + std::to_string(i);
    double km = 0.0;
    int state = 1;
    for (int j = 0; j != 6; ++j) {
      Eigen::VectorXd x(4);
      for (int s = 0; s != 4; ++s) {
        x[s] = g.uniform(-1.0, 1.0);
      }
      path.observations.push_back({km, state, x});
      km += g.uniform(5.0, 30.0);
      state = 1 + static_cast<int>(g.below(2));
    }
    paths.push_back(std::move(path));
  }
  double const ll1 = ctmc::panel_loglik(params, spec, paths, 1);
  double const ll4 = ctmc::panel_loglik(params, spec, paths, 4);
  CHECK(ll1 == doctest::Approx(ll4).epsilon(1e-15));
}

TEST_CASE("validate_paths rejects malformed panels") {
  auto const spec = ctmc::intensity_spec::two_state({}, std::nullopt);
  Eigen::VectorXd const x(0);
  auto bad_state = std::vector<ctmc::panel_path>{path_of({{0.0, 3}}, x)};
  CHECK_THROWS_AS(ctmc::validate_paths(bad_state, spec), validation_error);
  auto bad_km = std::vector<ctmc::panel_path>{path_of({{1.0, 1}, {1.0, 2}}, x)};
  CHECK_THROWS_AS(ctmc::validate_paths(bad_km, spec), validation_error);
  auto bad_dim = std::vector<ctmc::panel_path>{
      path_of({{0.0, 1}}, Eigen::VectorXd::Constant(1, 0.0))};
  CHECK_THROWS_AS(ctmc::validate_paths(bad_dim, spec), validation_error);
}

TEST_CASE("fit_ctmc recovers a homogeneous chain and nests the changepoint") {
  sim::sim_config config;
  config.seed = 31;
  config.n_trains = 150;
  config.line_length_km = 700.0;
  config.spot_spacing = 50.0;
  config.covariates = sim::covariate_kind::uniform;
  config.ctmc_spec = ctmc::intensity_spec::two_state(
      std::vector<std::string>(io::kCovariateNames.begin(),
                               io::kCovariateNames.end()),
      std::nullopt);
  config.ctmc_truth.log_q0 = {std::log(0.012), std::log(0.02)};
  config.ctmc_truth.beta = {Eigen::Vector4d{0.3, -0.2, 0.1, 0.2},
                            Eigen::Vector4d{-0.1, 0.1, -0.2, 0.1}};
  auto const paths = sim::simulate_ctmc(config);

  ctmc::ctmc_fit_options opts;
  opts.compute_covariance = true;
  auto const fit = ctmc::fit_ctmc(paths, config.ctmc_spec, opts);
  REQUIRE(fit.converged);
  CHECK(fit.loglik >=
        ctmc::panel_loglik(config.ctmc_truth, config.ctmc_spec, paths) - 1e-6);
  CHECK(fit.covariance.rows() ==
        static_cast<Eigen::Index>(config.ctmc_spec.param_count()));
  CHECK(fit.params.log_q0[0] == doctest::Approx(std::log(0.012)).epsilon(0.2));
  CHECK(fit.params.log_q0[1] == doctest::Approx(std::log(0.02)).epsilon(0.2));

  // The changepoint model nests the homogeneous one.
  auto spec_het = config.ctmc_spec;
  spec_het.changepoint = 350.0;
  ctmc::ctmc_fit_options fast;
  fast.compute_covariance = false;
  auto const het = ctmc::fit_ctmc(paths, spec_het, fast);
  CHECK(het.loglik >= fit.loglik - 1e-6);
}

TEST_CASE("covariate shifts relocate the intercept, not the slopes") {
  sim::sim_config config;
  config.seed = 77;
  config.n_trains = 120;
  config.line_length_km = 600.0;
  config.spot_spacing = 60.0;
  config.covariates = sim::covariate_kind::uniform;
  config.ctmc_spec = ctmc::intensity_spec::two_state(
      std::vector<std::string>(io::kCovariateNames.begin(),
                               io::kCovariateNames.end()),
      std::nullopt);
  config.ctmc_truth.log_q0 = {std::log(0.015), std::log(0.02)};
  config.ctmc_truth.beta = {Eigen::Vector4d{0.4, -0.2, 0.1, 0.3},
                            Eigen::Vector4d{-0.2, 0.1, 0.0, 0.2}};
  auto const paths = sim::simulate_ctmc(config);

  double const shift = 25.0;
  auto shifted = paths;
  for (auto& path : shifted) {
    for (auto& o : path.observations) {
      o.x[0] += shift;
    }
  }
  ctmc::ctmc_fit_options opts;
  opts.compute_covariance = false;
  auto const base = ctmc::fit_ctmc(paths, config.ctmc_spec, opts);
  auto const moved = ctmc::fit_ctmc(shifted, config.ctmc_spec, opts);
  REQUIRE(base.converged);
  REQUIRE(moved.converged);
  CHECK(moved.loglik == doctest::Approx(base.loglik).epsilon(1e-7));
  for (std::size_t k = 0; k != 2; ++k) {
    CHECK((moved.params.beta[k] - base.params.beta[k]).cwiseAbs().maxCoeff() <
          1e-3);
    CHECK(moved.params.log_q0[k] ==
          doctest::Approx(base.params.log_q0[k] - base.params.beta[k][0] * shift)
              .epsilon(1e-3));
  }
}

TEST_CASE("evolution occupancy rows are distributions with the right start") {
  auto const spec = ctmc::intensity_spec::two_state({}, 50.0);
  auto params = no_covariate_params(std::log(0.05), std::log(0.05));
  params.z = {std::log(2.0), 0.0};
  Eigen::VectorXd const x(0);
  std::vector<double> grid;
  for (double d = 0.0; d <= 200.0; d += 10.0) {
    grid.push_back(d);
  }
  auto const evo = ctmc::evolution_probabilities(params, spec, x, grid, 1);
  REQUIRE(evo.occupancy.size() == grid.size());
  CHECK(evo.occupancy.front()[0] == 1.0);
  CHECK(evo.occupancy.front()[1] == 0.0);
  for (auto const& row : evo.occupancy) {
    CHECK(row.sum() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(row.minCoeff() >= 0.0);
  }

  // Homogeneous symmetric chain settles at the uniform distribution.
  auto const flat = ctmc::intensity_spec::two_state({}, std::nullopt);
  auto const sym = no_covariate_params(std::log(0.05), std::log(0.05));
  auto const limit =
      ctmc::evolution_probabilities(sym, flat, x, {0.0, 500.0}, 1);
  CHECK(limit.occupancy.back()[0] == doctest::Approx(0.5).epsilon(1e-8));

  CHECK_THROWS_AS((void)ctmc::evolution_probabilities(params, spec, x,
                                                      {10.0, 20.0}, 1),
                  validation_error);
  CHECK_THROWS_AS(
      (void)ctmc::evolution_probabilities(params, spec, x, {0.0, 10.0}, 3),
      validation_error);
}
