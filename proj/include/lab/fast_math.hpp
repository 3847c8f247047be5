#pragma once

#include <cmath>

namespace lab {

// sin and cos of 2*pi*t, with t in cycles. Quadrant reduction plus Taylor
// polynomials on |x| <= pi/4; absolute error ~1e-15 + |t|*2^-52.
inline void sincos_cycles(double t, double& s, double& c) {
  double r = t - std::nearbyint(t);
  double q = std::nearbyint(r * 4.0);
  double x = (r - q * 0.25) * 6.283185307179586476925286766559;
  double x2 = x * x;
  double sp = x * (1 + x2 * (-1.0 / 6 + x2 * (1.0 / 120 + x2 * (-1.0 / 5040 + x2 * (1.0 / 362880 +
              x2 * (-1.0 / 39916800 + x2 * (1.0 / 6227020800)))))));
  double cp = 1 + x2 * (-0.5 + x2 * (1.0 / 24 + x2 * (-1.0 / 720 + x2 * (1.0 / 40320 +
              x2 * (-1.0 / 3628800 + x2 * (1.0 / 479001600 + x2 * (-1.0 / 87178291200)))))));
  int qi = static_cast<int>(q) & 3;
  s = (qi == 0) ? sp : (qi == 1) ? cp : (qi == 2) ? -sp : -cp;
  c = (qi == 0) ? cp : (qi == 1) ? -sp : (qi == 2) ? -cp : sp;
}

}  // namespace lab
