#pragma once

#include <Eigen/Dense>

namespace railhaz::ctmc {

// Dense matrix exponential by scaling and squaring around a degree-6
// diagonal Pade approximant. The squaring count comes from the 1-norm:
// s = max(0, ceil(log2(norm1 / 0.25))), so the scaled argument has 1-norm
// at most 0.25, where the [6/6] approximant is accurate to well below
// double rounding. Small orders (q <= 4, the chain sizes used here) run on
// fixed-size matrices without heap allocation.
//
// Throws std::invalid_argument on non-finite input.
Eigen::MatrixXd matrix_exponential(Eigen::MatrixXd const& m);

}  // namespace railhaz::ctmc
