#include "railhaz/stats.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "railhaz/common.hpp"

namespace railhaz::stats {

namespace {

constexpr int kMaxIter = 500;
constexpr double kEps = 1e-16;

// Lower regularized gamma by power series.
double gamma_p_series(double a, double x) {
  double ap = a;
  double sum = 1.0 / a;
  double term = sum;
  for (int n = 0; n != kMaxIter; ++n) {
    ap += 1.0;
    term *= x / ap;
    sum += term;
    if (std::fabs(term) < std::fabs(sum) * kEps) {
      break;
    }
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Upper regularized gamma by modified Lentz continued fraction.
double gamma_q_cf(double a, double x) {
  double const tiny = std::numeric_limits<double>::min() / kEps;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i != kMaxIter; ++i) {
    double const an = -static_cast<double>(i) * (static_cast<double>(i) - a);
    b += 2.0;
    d = an * d + b;
    if (std::fabs(d) < tiny) {
      d = tiny;
    }
    c = b + an / c;
    if (std::fabs(c) < tiny) {
      c = tiny;
    }
    d = 1.0 / d;
    double const delta = d * c;
    h *= delta;
    if (std::fabs(delta - 1.0) < kEps) {
      break;
    }
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (x < 0.0 || a <= 0.0) {
    throw std::invalid_argument{"gamma_p: domain"};
  }
  if (x == 0.0) {
    return 0.0;
  }
  return x < a + 1.0 ? gamma_p_series(a, x) : 1.0 - gamma_q_cf(a, x);
}

double gamma_q(double a, double x) {
  if (x < 0.0 || a <= 0.0) {
    throw std::invalid_argument{"gamma_q: domain"};
  }
  if (x == 0.0) {
    return 1.0;
  }
  return x < a + 1.0 ? 1.0 - gamma_p_series(a, x) : gamma_q_cf(a, x);
}

double chisq_tail(double x, int df) {
  if (df < 1) {
    throw std::invalid_argument{"chisq_tail: df must be positive"};
  }
  if (x < 0.0) {
    throw std::invalid_argument{"chisq_tail: x must be nonnegative"};
  }
  return gamma_q(0.5 * df, 0.5 * x);
}

double normal_cdf(double z) {
  return 0.5 * std::erfc(-z / 1.4142135623730950488016887242097);
}

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) {
    throw std::invalid_argument{"normal_quantile: p must be in (0,1)"};
  }
  // Wichura (1988), algorithm AS 241, PPND16.
  double const q = p - 0.5;
  double r;
  if (std::fabs(q) <= 0.425) {
    r = 0.180625 - q * q;
    return q *
           (((((((2.5090809287301226727e+3 * r + 3.3430575583588128105e+4) * r +
                 6.7265770927008700853e+4) * r + 4.5921953931549871457e+4) * r +
               1.3731693765509461125e+4) * r + 1.9715909503065514427e+3) * r +
             1.3314166789178437745e+2) * r + 3.3871328727963666080e+0) /
           (((((((5.2264952788528545610e+3 * r + 2.8729085735721942674e+4) * r +
                 3.9307895800092710610e+4) * r + 2.1213794301586595867e+4) * r +
               5.3941960214247511077e+3) * r + 6.8718700749205790830e+2) * r +
             4.2313330701600911252e+1) * r + 1.0);
  }
  r = q < 0.0 ? p : 1.0 - p;
  r = std::sqrt(-std::log(r));
  double value;
  if (r <= 5.0) {
    r -= 1.6;
    value = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) *
                  r + 2.41780725177450611770e-1) * r +
                 1.27045825245236838258e+0) * r + 3.64784832476320460504e+0) *
               r + 5.76949722146069140550e+0) * r + 4.63033784615654529590e+0) *
             r + 1.42343711074968357734e+0) /
            (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) *
                  r + 1.51986665636164571966e-2) * r +
                 1.48103976427480074590e-1) * r + 6.89767334985100004550e-1) *
               r + 1.67638483018380384940e+0) * r + 2.05319162663775882187e+0) *
             r + 1.0);
  } else {
    r -= 5.0;
    value = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) *
                  r + 1.24266094738807843860e-3) * r +
                 2.65321895265761230930e-2) * r + 2.96560571828504891230e-1) *
               r + 1.78482653991729133580e+0) * r + 5.46378491116411436990e+0) *
             r + 6.65790464350110377720e+0) /
            (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) *
                  r + 1.84631831751005468180e-5) * r +
                 7.86869131145613259100e-4) * r + 1.48753612908506148525e-2) *
               r + 1.36929880922735805310e-1) * r + 5.99832206555887937690e-1) *
             r + 1.0);
  }
  return q < 0.0 ? -value : value;
}

double wald_p(double estimate, double se) {
  if (!(se > 0.0)) {
    throw std::invalid_argument{"wald_p: se must be positive"};
  }
  return 2.0 * (1.0 - normal_cdf(std::fabs(estimate) / se));
}

std::pair<double, double> wald_interval(double estimate, double se,
                                        double level) {
  if (!(se > 0.0)) {
    throw std::invalid_argument{"wald_interval: se must be positive"};
  }
  if (!(level > 0.0 && level < 1.0)) {
    throw std::invalid_argument{"wald_interval: level must be in (0,1)"};
  }
  double const z = normal_quantile(0.5 * (1.0 + level));
  return {std::exp(estimate - z * se), std::exp(estimate + z * se)};
}

lrt_result lr_test(double ll_simple, double ll_complex, int df) {
  if (df < 1) {
    throw std::invalid_argument{"lr_test: df must be positive"};
  }
  if (ll_complex < ll_simple - 1e-6) {
    throw validation_error{
        "lr_test: complex model log-likelihood is below the simple model's; "
        "the nested fit did not converge"};
  }
  double const lambda = std::max(0.0, 2.0 * (ll_complex - ll_simple));
  return {lambda, df, chisq_tail(lambda, df)};
}

}  // namespace railhaz::stats
