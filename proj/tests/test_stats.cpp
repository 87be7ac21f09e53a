#include <doctest.h>

#include <cmath>
#include <stdexcept>

#include "railhaz/common.hpp"
#include "railhaz/stats.hpp"

using namespace railhaz;

namespace {

// Chi-square upper tail for even df has the finite closed form
// e^{-x/2} * sum_{k=0}^{df/2-1} (x/2)^k / k!, independent of the
// incomplete-gamma route the library takes.
double even_df_tail(double x, int df) {
  double const h = x / 2.0;
  double term = 1.0, sum = 0.0;
  for (int k = 0; k != df / 2; ++k) {
    sum += term;
    term *= h / (k + 1);
  }
  return std::exp(-h) * sum;
}

}  // namespace

TEST_CASE("chisq_tail matches the even-df closed form") {
  for (double x : {0.1, 0.5, 1.0, 2.0, 5.0, 10.0, 25.0, 40.0}) {
    for (int df : {2, 4, 6, 8}) {
      CHECK(stats::chisq_tail(x, df) ==
            doctest::Approx(even_df_tail(x, df)).epsilon(1e-12));
    }
  }
}

TEST_CASE("chisq_tail reproduces pinned critical values") {
  CHECK(stats::chisq_tail(2.0 * std::log(2.0), 2) ==
        doctest::Approx(0.5).epsilon(1e-13));
  // 0.95 quantile of chi-square(1) is the squared normal 0.975 quantile.
  CHECK(stats::chisq_tail(3.841458820694124, 1) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::chisq_tail(0.0, 3) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(stats::chisq_tail(1000.0, 2) < 1e-200);
}

TEST_CASE("regularized gamma functions are complementary") {
  for (double a : {0.5, 1.0, 2.5, 10.0}) {
    for (double x : {0.1, 1.0, 5.0, 30.0}) {
      CHECK(stats::gamma_p(a, x) + stats::gamma_q(a, x) ==
            doctest::Approx(1.0).epsilon(1e-13));
    }
  }
  CHECK(stats::gamma_p(2.0, 0.0) == 0.0);
  CHECK(stats::gamma_q(2.0, 0.0) == 1.0);
  // P(1, x) = 1 - e^{-x}; P(1/2, x) = erf(sqrt(x)).
  CHECK(stats::gamma_p(1.0, 1.3) ==
        doctest::Approx(1.0 - std::exp(-1.3)).epsilon(1e-13));
  CHECK(stats::gamma_p(0.5, 1.0) ==
        doctest::Approx(0.8427007929497149).epsilon(1e-13));
}

TEST_CASE("normal_cdf matches pinned reference values") {
  CHECK(stats::normal_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(stats::normal_cdf(1.0) ==
        doctest::Approx(0.8413447460685429).epsilon(1e-13));
  CHECK(stats::normal_cdf(-1.0) ==
        doctest::Approx(0.15865525393145707).epsilon(1e-13));
  CHECK(stats::normal_cdf(2.0) ==
        doctest::Approx(0.9772498680518208).epsilon(1e-13));
  CHECK(stats::normal_cdf(1.959963984540054) ==
        doctest::Approx(0.975).epsilon(1e-12));
}

TEST_CASE("normal_quantile inverts the cdf") {
  CHECK(stats::normal_quantile(0.5) == doctest::Approx(0.0).scale(1e-15));
  CHECK(stats::normal_quantile(0.975) ==
        doctest::Approx(1.959963984540054).epsilon(1e-12));
  CHECK(stats::normal_quantile(0.025) ==
        doctest::Approx(-1.959963984540054).epsilon(1e-12));
  for (double p : {0.001, 0.01, 0.1, 0.3, 0.5, 0.7, 0.9, 0.99, 0.999}) {
    CHECK(stats::normal_cdf(stats::normal_quantile(p)) ==
          doctest::Approx(p).epsilon(1e-12));
  }
}

TEST_CASE("wald_p is two-sided in the z score") {
  CHECK(stats::wald_p(0.0, 1.0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(stats::wald_p(1.959963984540054, 1.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::wald_p(-1.959963984540054, 1.0) ==
        doctest::Approx(0.05).epsilon(1e-9));
  CHECK(stats::wald_p(0.98, 0.5) == stats::wald_p(-0.98, 0.5));
}

TEST_CASE("wald_interval exponentiates estimate -+ z*se") {
  auto const [lo, hi] = stats::wald_interval(0.0, 1.0);
  // The exact 0.975 quantile, not the rounded 1.96 convention.
  CHECK(lo == doctest::Approx(std::exp(-1.959963984540054)).epsilon(1e-12));
  CHECK(hi == doctest::Approx(std::exp(1.959963984540054)).epsilon(1e-12));
  CHECK(lo == doctest::Approx(0.1408634940932175).epsilon(1e-12));
  CHECK(hi == doctest::Approx(7.099071384231335).epsilon(1e-12));
  auto const [lo90, hi90] = stats::wald_interval(0.2, 0.5, 0.90);
  CHECK(lo90 ==
        doctest::Approx(std::exp(0.2 - 1.6448536269514722 * 0.5)).epsilon(1e-12));
  CHECK(hi90 ==
        doctest::Approx(std::exp(0.2 + 1.6448536269514722 * 0.5)).epsilon(1e-12));
}

TEST_CASE("lr_test computes the chi-square p of 2*(llc - lls)") {
  auto const r = stats::lr_test(-104.5, -84.5, 4);
  CHECK(r.statistic == doctest::Approx(40.0).epsilon(1e-14));
  CHECK(r.df == 4);
  // Closed form for df=4: (1 + x/2) e^{-x/2} = 21 e^{-20}.
  CHECK(r.p_value == doctest::Approx(21.0 * std::exp(-20.0)).epsilon(1e-12));
  CHECK(r.p_value == doctest::Approx(4.328422607120966e-08).epsilon(1e-12));
}

TEST_CASE("lr_test clamps rounding-level deficits to zero") {
  auto const r = stats::lr_test(-10.0, -10.0000005, 1);
  CHECK(r.statistic == 0.0);
  CHECK(r.p_value == doctest::Approx(1.0).epsilon(1e-14));
}

TEST_CASE("lr_test rejects invalid inputs") {
  CHECK_THROWS_AS((void)stats::lr_test(-10.0, -9.0, 0), std::invalid_argument);
  CHECK_THROWS_AS((void)stats::lr_test(-10.0, -11.0, 1), validation_error);
}
