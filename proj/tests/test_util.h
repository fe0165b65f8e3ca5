#pragma once

#include <algorithm>
#include <cmath>
#include <random>

#include "jointnerf/autodiff.h"

namespace jointnerf::testing {

// Central differences of the scalar `f()` with respect to every entry of
// `x`, perturbing `x` in place.
template <typename F>
Matrix NumericGradient(F&& f, Matrix& x, double step = 1e-6) {
  Matrix g(x.rows(), x.cols());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double saved = x.data()[i];
    x.data()[i] = saved + step;
    const double up = f();
    x.data()[i] = saved - step;
    const double down = f();
    x.data()[i] = saved;
    g.data()[i] = (up - down) / (2 * step);
  }
  return g;
}

inline double RelativeError(const Matrix& a, const Matrix& b) {
  const double scale = std::max({a.norm(), b.norm(), 1e-12});
  return (a - b).norm() / scale;
}

inline Matrix RandomMatrix(Eigen::Index rows, Eigen::Index cols,
                           std::mt19937_64& rng, double lo = -2.0,
                           double hi = 2.0) {
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
  return m;
}

}  // namespace jointnerf::testing
