// Dense math aliases and the log-space helpers shared by the CRF and the
// encoder. All heavy lifting is double precision Eigen.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <string>

#include "spancrf/errors.hpp"

namespace spancrf {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

inline constexpr double kNegInf = -std::numeric_limits<double>::infinity();

// log(sum_i exp(x_i)) over a vector, stable under large magnitudes and
// returning -inf for an all--inf input.
inline double log_sum_exp(const Vector& x) {
  const double m = x.maxCoeff();
  if (!std::isfinite(m)) return m;  // -inf (empty support) or +inf propagates
  double acc = 0.0;
  for (Eigen::Index i = 0; i < x.size(); ++i) acc += std::exp(x[i] - m);
  return m + std::log(acc);
}

inline double log_sum_exp(double a, double b) {
  const double m = a > b ? a : b;
  if (!std::isfinite(m)) return m;
  return m + std::log(std::exp(a - m) + std::exp(b - m));
}

inline void require_finite(const Matrix& m, const std::string& what) {
  if (!m.allFinite()) throw NumericError(what + " contains non-finite values");
}

}  // namespace spancrf
