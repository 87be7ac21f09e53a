#pragma once

#include <utility>

namespace railhaz::stats {

struct lrt_result {
  double statistic;  // 2 * (ll_complex - ll_simple), clamped at 0
  int df;
  double p_value;
};

// Chi-square upper tail P(X > x) with the given degrees of freedom,
// computed as the regularized upper incomplete gamma Q(df/2, x/2).
double chisq_tail(double x, int df);

// Regularized incomplete gamma functions. Series expansion below a+1,
// Lentz continued fraction above; absolute error well under 1e-12 for the
// df range used here.
double gamma_p(double a, double x);
double gamma_q(double a, double x);

// Standard normal CDF (via erfc) and its inverse (Wichura's PPND16,
// absolute error < 1e-15 in the quantile).
double normal_cdf(double z);
double normal_quantile(double p);

// Two-sided Wald p-value for estimate/se on the linear (log) scale.
double wald_p(double estimate, double se);

// (lower, upper) on the hazard-ratio scale: exp(estimate -+ z * se).
std::pair<double, double> wald_interval(double estimate, double se,
                                        double level = 0.95);

// Likelihood ratio test of nested fits. Throws validation_error when
// ll_complex < ll_simple - 1e-6 (a failed nested fit); smaller negative
// differences clamp the statistic to 0.
lrt_result lr_test(double ll_simple, double ll_complex, int df);

}  // namespace railhaz::stats
