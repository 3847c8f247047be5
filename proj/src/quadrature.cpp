#include "lab/quadrature.hpp"

#include <cmath>
#include <map>
#include <mutex>

namespace lab {

GaussRule gauss_legendre(int m) {
  require(m >= 1, "gauss_legendre: need at least one node");
  static std::mutex mu;
  static std::map<int, GaussRule> cache;
  {
    std::lock_guard<std::mutex> lock(mu);
    auto it = cache.find(m);
    if (it != cache.end()) return it->second;
  }
  GaussRule r{Vec(m), Vec(m)};
  for (int i = 0; i < (m + 1) / 2; ++i) {
    // Tricomi initial guess, then Newton on P_m
    double z = std::cos(kPi * (i + 0.75) / (m + 0.5));
    double dp = 1.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (m == 1) p0 = 1.0, p1 = z;
      dp = m * (z * p1 - p0) / (z * z - 1.0);
      double dz = p1 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    {
      double p0 = 1.0, p1 = z;
      for (int k = 2; k <= m; ++k) {
        double p2 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = m * (z * p1 - p0) / (z * z - 1.0);
    }
    double w = 2.0 / ((1.0 - z * z) * dp * dp);
    r.x(i) = -z;
    r.x(m - 1 - i) = z;
    r.w(i) = r.w(m - 1 - i) = w;
  }
  if (m % 2 == 1) r.x(m / 2) = 0.0;
  std::lock_guard<std::mutex> lock(mu);
  cache.emplace(m, r);
  return r;
}

}  // namespace lab
