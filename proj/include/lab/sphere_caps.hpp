#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "lab/common.hpp"
#include "lab/quadrature.hpp"

namespace lab {

struct Cap {
  int index = 0;
  Vec center;
  double angular_scale = 0;   // s of the owning system
  double cell_radius = 0;     // max distance from center to its cell
  double support_radius = 0;  // bump support, 1.5 * cell_radius
};

// Nodes on the sphere with positive weights and, per node, the caps whose
// normalized bump is nonzero there (CSR).
struct SphereQuadrature {
  RowMat nodes;  // n x M
  Vec weights;
  double bandwidth = 0;
  std::vector<int> ptr;  // size M + 1
  std::vector<int> cap;
  std::vector<double> phi;
  std::vector<int> owner;  // cap with the largest bump at the node

  Eigen::Index size() const { return weights.size(); }
};

class CapSystem {
 public:
  CapSystem(int n, double s, std::vector<Cap> caps, BumpProfile profile = {});

  int dim() const { return n_; }
  double scale() const { return s_; }
  int size() const { return static_cast<int>(caps_.size()); }
  const std::vector<Cap>& caps() const { return caps_; }
  const Cap& cap(int a) const { return caps_.at(a); }
  const BumpProfile& profile() const { return profile_; }

  // Unnormalized eta(d/rho) for one cap.
  double raw_bump(int a, const Eigen::Ref<const Vec>& xi) const;
  // All (cap, phi) with phi > 0 at xi; phi sums to 1.
  void bumps(const Eigen::Ref<const Vec>& xi, std::vector<std::pair<int, double>>& out) const;
  double bump(int a, const Eigen::Ref<const Vec>& xi) const;
  std::vector<int> neighbors(const Eigen::Ref<const Vec>& xi) const;

  bool has_quadrature() const { return bool(quad_); }
  const SphereQuadrature& quadrature() const;

  bool has_parent() const { return bool(parent_sys_); }
  const CapSystem& parent_system() const;
  const std::vector<int>& parent_map() const { return parent_; }
  std::vector<std::vector<int>> children() const;

  // Set for n = 2 systems of equal arcs: center k sits at offset + k*2pi/K.
  bool equal_arcs() const { return equal_arcs_; }
  double arc_offset() const { return arc_offset_; }

 private:
  friend CapSystem cap_decompose(int, double, BumpProfile, double);
  friend CapSystem refine(const CapSystem&, double);
  friend CapSystem quadrature_for_bandwidth(const CapSystem&, double);
  friend CapSystem caps_from_arcs(int, double, double, BumpProfile);

  void build_index();

  int n_;
  double s_;
  std::vector<Cap> caps_;
  BumpProfile profile_;
  bool equal_arcs_ = false;
  double arc_offset_ = 0;
  std::shared_ptr<const SphereQuadrature> quad_;
  std::shared_ptr<const CapSystem> parent_sys_;
  std::vector<int> parent_;
  double max_support_ = 0;
  // uniform bucket grid over [-1,1]^n for neighbor lookup
  int cells_ = 1;
  double cell_ = 2;
  std::vector<int> bucket_ptr_, bucket_cap_;
};

// Equal arcs (n = 2) or equal-area zonal cells (n = 3). `rotation` turns an
// n = 2 system (caps and quadrature nodes) by that angle.
CapSystem cap_decompose(int n, double s, BumpProfile profile = {}, double rotation = 0);

// K equal arcs on the circle starting at `offset`.
CapSystem caps_from_arcs(int K, double offset, double s, BumpProfile profile = {});

// Caps from explicit centers and cell radii (support 1.5 * cell radius).
CapSystem caps_from_cells(int n, double s, const Mat& centers, const Vec& cell_radii,
                          BumpProfile profile = {});

CapSystem refine(const CapSystem& coarse, double fine_scale);

CapSystem quadrature_for_bandwidth(const CapSystem& system, double max_frequency);

// Equal-area zonal cells at scale s: centers (3 x K) and cell radii. With
// `hemisphere` only the cells covering z >= 0 are produced.
struct ZonalCells {
  Mat centers;
  Vec radii;
};
ZonalCells zonal_cells(double s, bool hemisphere);

// Invariant measurements for one system. `samples` random points are used
// for the partition and covering checks.
struct CapAudit {
  int caps = 0;
  int expected = 0;          // equal-measure count ceil(2pi/s) or ceil(4pi/s^2)
  double partition_error = 0;
  double support_ratio = 0;  // max over quadrature support of d / (2 * cell radius)
  double weight_error = 0;   // |sum w - sigma(S^{n-1})| / sigma
  int uncovered = 0;
  double min_separation = 0;  // smallest center distance over s
  bool parent_ok = true;
  bool ok() const;
};
CapAudit audit_caps(const CapSystem& sys, int samples = 10000, std::uint64_t seed = 1);

// Integral of u over the sphere with the system's quadrature.
template <class F>
double integrate(const SphereQuadrature& q, F&& u) {
  double acc = 0;
  Vec xi(q.nodes.rows());
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    xi = q.nodes.col(j);
    acc += q.weights(j) * u(xi);
  }
  return acc;
}

// Product-rule resolution: M trapezoid nodes (n = 2) or m Gauss-Legendre
// nodes in z times 2m azimuths (n = 3).
int quadrature_resolution(int n, double max_frequency, double min_support);
// The product rule itself, without a cap table. `offset` turns n = 2 nodes.
SphereQuadrature product_rule(int n, int resolution, double offset = 0);
// Sum of e^{-2 pi i x.xi} over the product rule, nodes generated on the fly.
cplx plane_wave_integral(int n, int resolution, const Vec& x);

}  // namespace lab
