#pragma once

#include "lab/common.hpp"

namespace lab {

// Gauss-Legendre rule on [-1,1].
struct GaussRule {
  Vec x, w;
};
GaussRule gauss_legendre(int m);

// Smooth even bump eta(t) = exp(1 - 1/(1-t^2)) on (-1,1), zero outside.
struct BumpProfile {
  int derivative_bound_order = 8;
  double operator()(double t) const {
    double u = 1.0 - t * t;
    return u > 0.0 ? std::exp(1.0 - 1.0 / u) : 0.0;
  }
};

}  // namespace lab
