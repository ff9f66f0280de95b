// qce-rkpm: log-log least-squares convergence rates.
// SPDX-License-Identifier: MIT
#pragma once

#include <cmath>
#include <vector>

#include "qce/common.hpp"

namespace qce::conv {

struct RateFit {
  Real rate = 0.0;       // slope of log(err) vs log(h)
  Real intercept = 0.0;  // log(err) at log(h) = 0
};

inline RateFit fit_rate(const std::vector<Real>& h, const std::vector<Real>& err) {
  const int n = static_cast<int>(h.size());
  if (n < 2 || err.size() != h.size())
    throw InvalidArgument("fit_rate: need at least two (h, err) pairs");
  Real sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (int i = 0; i < n; ++i) {
    if (h[i] <= 0.0 || err[i] <= 0.0)
      throw InvalidArgument("fit_rate: h and err must be positive");
    const Real x = std::log(h[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  const Real det = n * sxx - sx * sx;
  if (std::abs(det) < 1e-30) throw InvalidArgument("fit_rate: degenerate h sequence");
  RateFit fit;
  fit.rate = (n * sxy - sx * sy) / det;
  fit.intercept = (sy - fit.rate * sx) / n;
  return fit;
}

}  // namespace qce::conv
