#include "railhaz/expm.hpp"

#include <cmath>
#include <stdexcept>

namespace railhaz::ctmc {

namespace {

// Pade [6/6] numerator coefficients for exp; the denominator uses the same
// coefficients with alternating signs via the U/V split.
constexpr double kB[7] = {665280.0, 332640.0, 75600.0,
                          10080.0,  840.0,    42.0,
                          1.0};

constexpr double kTheta = 0.25;

// Cap keeps the squaring phase bounded for absurdly scaled inputs (norms beyond
// 2^64*theta ~ 4.6e18); below the cap the count is exactly ceil(log2(norm/theta)).
constexpr int kMaxSquarings = 64;

template <typename Mat>
Mat expm_impl(Mat a, Eigen::Index n) {
  double norm1 = 0.0;
  for (Eigen::Index j = 0; j != n; ++j) {
    norm1 = std::max(norm1, a.col(j).cwiseAbs().sum());
  }

  int squarings = 0;
  if (norm1 > kTheta) {
    // Compare before the int cast: norm1 can overflow to inf even when every
    // entry is finite, and casting inf/huge to int is undefined.
    double const s = std::ceil(std::log2(norm1 / kTheta));
    squarings = s < static_cast<double>(kMaxSquarings) ? static_cast<int>(s)
                                                       : kMaxSquarings;
    a *= std::ldexp(1.0, -squarings);
  }

  Mat const a2 = a * a;
  Mat const a4 = a2 * a2;
  Mat const a6 = a4 * a2;
  Mat const id = Mat::Identity(n, n);
  // U odd part, V even part; approximant = (V + U) / (V - U).
  Mat const u = a * (kB[5] * a4 + kB[3] * a2 + kB[1] * id);
  Mat const v = kB[6] * a6 + kB[4] * a4 + kB[2] * a2 + kB[0] * id;

  Mat result = (v - u).partialPivLu().solve(v + u);
  for (int i = 0; i < squarings; ++i) {
    result = result * result;
  }
  return result;
}

}  // namespace

Eigen::MatrixXd matrix_exponential(Eigen::MatrixXd const& m) {
  if (m.rows() != m.cols()) {
    throw std::invalid_argument{"matrix_exponential: matrix must be square"};
  }
  if (!m.allFinite()) {
    throw std::invalid_argument{"matrix_exponential: non-finite entries"};
  }
  switch (m.rows()) {
    case 0: return Eigen::MatrixXd{0, 0};
    case 1: {
      Eigen::MatrixXd r{1, 1};
      r(0, 0) = std::exp(m(0, 0));
      return r;
    }
    case 2: return expm_impl<Eigen::Matrix2d>(m, 2);
    case 3: return expm_impl<Eigen::Matrix3d>(m, 3);
    case 4: return expm_impl<Eigen::Matrix4d>(m, 4);
    default: return expm_impl<Eigen::MatrixXd>(m, m.rows());
  }
}

}  // namespace railhaz::ctmc
