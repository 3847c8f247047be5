#pragma once

#include <string>
#include <vector>

#include "lab/extension_field.hpp"
#include "lab/report.hpp"

namespace lab {

// lambda x ... x lambda x lambda*N box with square cross-section. frame.col(0)
// is the axis, the other columns span the orthogonal complement.
struct Tube {
  Vec center;
  Mat frame;
  double width = 1;   // lambda
  double length = 1;  // lambda * N

  static Tube make(const Vec& direction, const Vec& center, double width, double length);
  Vec direction() const { return frame.col(0); }
  bool contains(const Eigen::Ref<const Vec>& x) const;
  double volume() const { return std::pow(width, frame.rows() - 1) * length; }
  // Axis-aligned bounding box.
  void bounds(Vec& lo, Vec& hi) const;
};

struct DirectionNet {
  int n = 2;
  double N = 2;
  Mat directions;  // n x K, upper half circle / upper hemisphere

  int size() const { return static_cast<int>(directions.cols()); }
};

// n = 2: ceil(pi N) equally spaced directions on a half circle.
// n = 3: equal-area hemisphere cells at scale sqrt(pi)/N.
DirectionNet direction_net(int n, double N);
// Smallest pairwise angle between lines (directions modulo sign).
double min_separation(const DirectionNet& net);

struct TubeFamily {
  DirectionNet net;
  std::vector<Tube> tubes;  // tube a has direction net.directions.col(a)
  Vec c;
  double lambda = 1;
  double N = 2;

  int size() const { return static_cast<int>(tubes.size()); }
  int dim() const { return net.n; }
  // Radius of the smallest origin-centred ball holding every tube.
  double bounding_radius() const;
  // sum_a c_a chi_{T_a}(x), by brute force.
  double superposition(const Eigen::Ref<const Vec>& x) const;
  void validate() const;
};

TubeFamily make_family(const DirectionNet& net, const Mat& centers, const Vec& c, double lambda, double N);
// All tubes through `center` (origin when empty), c = 1.
TubeFamily bush(int n, double N, double lambda = 1, const Vec& center = Vec());
// Centers uniform in the ball of radius `radius` minus the tube half-length,
// rounded to multiples of `snap` when positive; c = 1.
TubeFamily random_family(int n, double N, double lambda, double radius, std::uint64_t seed, double snap = 0);

// Cell-centred lattice: points (k + 1/2) h for k in [-K, K) per axis, row-major.
struct CellGrid {
  int n = 2;
  double h = 0.125;
  int K = 1;

  Eigen::Index count() const;
  int side() const { return 2 * K; }
};

// sum_a c_a chi_{T_a} sampled on a cell grid covering the family.
Vec rasterize(const TubeFamily& family, const CellGrid& grid);
// Number of cell-grid points inside one tube.
long long raster_count(const Tube& t, double h);

struct DualNorm {
  double value = 0;
  double stderr = 0;
  std::string method;  // "grid", "montecarlo", "exact"
  bool fallback = false;
};

struct DualNormOptions {
  enum Kind { Auto, Grid, MonteCarlo, Exact } kind = Auto;
  double h = 0;               // grid spacing, default lambda/8
  int samples_per_tube = 64;  // Monte Carlo starting count
  double target_stderr = 0.02;
  std::uint64_t seed = 1;
};

// ||sum_a c_a chi_{T_a}||_r.
DualNorm dual_norm(const TubeFamily& family, double r, const DualNormOptions& opts = {});
// Exact n = 2 evaluation by slab decomposition of the rectangle arrangement.
double exact_dual_norm(const TubeFamily& family, double r);

// sum_a c_a^r, with r = n/(n-1) evaluated without pow where possible.
double coefficient_sum(const Vec& c, double r);

// dual_norm / (N^{1/r} lambda^{n/r} (sum c^r)^{1/r}).
RatioReport cov_ratio(const TubeFamily& family, double r, const DualNormOptions& opts = {});
// r = n/(n-1); rhs = (log N)^{(n-1)/n} N^{(n-1)/n} lambda^{n/r} (sum c^r)^{1/r}.
RatioReport bush_bound_check(const TubeFamily& family, const DualNormOptions& opts = {});

// Mean of the superposition over `samples` points on each sphere |x - c| = r.
Vec bush_profile(const TubeFamily& family, const Vec& radii, int samples, std::uint64_t seed);

struct KakeyaMax {
  Vec values;           // per net direction
  double stride = 0.5;  // translate lattice used
  double refined_stride = 0;
  double worst_ratio = 1;  // min over checked directions of coarse / refined
  std::vector<int> checked;
};

// For each net direction the largest average of f over rasterized
// width x width*N tubes centred on the stride lattice inside the box. The
// translate search is certified against a stride/4 lattice (or the grid
// spacing when finer) on 5 random directions.
KakeyaMax kakeya_max(const RealField& f, const DirectionNet& net, double stride = 0.5, double width = 1,
                     std::uint64_t seed = 1);

// Average of f over the rasterized tube (grid points of f inside it).
double tube_average(const RealField& f, const Tube& t);

struct DualityCheck {
  double pairing = 0;  // sum_a c_a |T_a| avg_{T_a} f
  double bound = 0;    // ||f||_{r'} ||sum c chi||_r
  bool holder_ok = false;
  double worst_maximal = 0;  // max_a avg_{T_a} f / M_N f(omega_a)
  bool maximal_ok = false;
};

// Both sides on the grid of f; M_N is taken over every grid translate so
// tubes centred on grid points are among the candidates.
DualityCheck maximal_duality_check(const RealField& f, const TubeFamily& family, double r);

}  // namespace lab
