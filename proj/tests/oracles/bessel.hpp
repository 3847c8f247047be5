#pragma once

#include <cmath>
#include <vector>

namespace oracle {

// J0 by power series, |x| <= 12.
inline double bessel_j0_series(double x) {
  double term = 1.0, sum = 1.0, q = -0.25 * x * x;
  for (int k = 1; k < 200; ++k) {
    term *= q / (double(k) * k);
    sum += term;
    if (std::abs(term) < 1e-18 * std::abs(sum) && k > 5) break;
  }
  return sum;
}

// J0 by Miller's downward recurrence normalised with
// 1 = J0 + 2 sum_k J_{2k}. Any x >= 0.
inline double bessel_j0_miller(double x) {
  if (x == 0.0) return 1.0;
  int start = 2 * (static_cast<int>(x + 30.0 + 8.0 * std::cbrt(x)) / 2 + 1);
  std::vector<double> j(start + 2, 0.0);
  j[start + 1] = 0.0;
  j[start] = 1e-300;
  double norm = 0.0;
  for (int k = start; k >= 1; --k) {
    j[k - 1] = 2.0 * k / x * j[k] - j[k + 1];
    if (std::abs(j[k - 1]) > 1e250) {
      for (int i = k - 1; i <= start; ++i) j[i] *= 1e-250;
      norm *= 1e-250;
    }
    if ((k - 1) % 2 == 0 && k - 1 > 0) norm += 2.0 * j[k - 1];
  }
  norm += j[0];
  return j[0] / norm;
}

inline double bessel_j0(double x) {
  x = std::abs(x);
  return x <= 8.0 ? bessel_j0_series(x) : bessel_j0_miller(x);
}

}  // namespace oracle
