#pragma once

#include <Eigen/Sparse>
#include <vector>

#include "lab/sphere_caps.hpp"

namespace lab {

// One extension channel: the density
//   coeff * phi_cap(xi) * psi_fine(xi) * exp(2 pi i lambda.xi)
// where either factor may be absent (index -1).
struct Channel {
  int cap = -1;
  int fine = -1;
  cplx coeff = 1.0;
  Vec lambda;
};

enum class Backend { Auto, Global, Local };

// Extension of every channel at every point, P x C. `fine` is needed when any
// channel names a fine cap. Global: product quadrature of the owning system
// (upgraded to the needed bandwidth). Local: per-channel polar rule about the
// cap center, resolution chosen per point from |x - lambda| (n = 3).
// far_cutoff > 0 lets the local backend return 0 for an unmodulated channel
// when 2 pi |x| sin(dist(+-x/|x|, support)) * support_radius exceeds it.
CMat evaluate_channels(const CapSystem& caps, const CapSystem* fine, const std::vector<Channel>& channels,
                       const Mat& points, Backend backend = Backend::Auto, double far_cutoff = 0);

// Quadrature sum of arbitrary node values at the points.
CVec extend_nodes(const SphereQuadrature& q, const CVec& values, const Mat& points);

// Bandwidth a channel set needs at these points: max |x - lambda|.
double required_bandwidth(const std::vector<Channel>& channels, const Mat& points);

}  // namespace lab
