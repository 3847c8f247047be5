#include "lab/sphere_caps.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "lab/fast_math.hpp"

namespace lab {

namespace {

constexpr double kSupportFactor = 1.5;

double chord(double angle) { return 2.0 * std::sin(std::min(angle, kPi) / 2.0); }

Vec polar_point(double theta, double phi) {
  Vec v(3);
  v << std::sin(theta) * std::cos(phi), std::sin(theta) * std::sin(phi), std::cos(theta);
  return v;
}

}  // namespace

CapSystem::CapSystem(int n, double s, std::vector<Cap> caps, BumpProfile profile)
    : n_(n), s_(s), caps_(std::move(caps)), profile_(profile) {
  require(n == 2 || n == 3, "unsupported dimension " + std::to_string(n));
  require(s > 0 && s <= kPi, "angular scale out of range");
  require(!caps_.empty(), "empty cap system");
  for (std::size_t i = 0; i < caps_.size(); ++i) {
    Cap& c = caps_[i];
    require(c.center.size() == n, "cap center has wrong dimension");
    require(std::abs(c.center.norm() - 1.0) <= 1e-12, "cap center not unit");
    c.index = static_cast<int>(i);
    max_support_ = std::max(max_support_, c.support_radius);
  }
  build_index();
}

void CapSystem::build_index() {
  cell_ = std::max(chord(max_support_), 1e-3);
  cells_ = std::max(1, static_cast<int>(std::ceil(2.0 / cell_)));
  cell_ = 2.0 / cells_;
  std::size_t nb = 1;
  for (int d = 0; d < n_; ++d) nb *= cells_;
  std::vector<int> count(nb + 1, 0);
  auto key = [&](const Vec& c) {
    std::size_t k = 0;
    for (int d = 0; d < n_; ++d) {
      int i = std::clamp(static_cast<int>((c(d) + 1.0) / cell_), 0, cells_ - 1);
      k = k * cells_ + i;
    }
    return k;
  };
  for (const Cap& c : caps_) count[key(c.center) + 1]++;
  for (std::size_t k = 0; k < nb; ++k) count[k + 1] += count[k];
  bucket_ptr_ = count;
  bucket_cap_.assign(caps_.size(), 0);
  std::vector<int> fill(count.begin(), count.end() - 1);
  for (const Cap& c : caps_) bucket_cap_[fill[key(c.center)]++] = c.index;
}

std::vector<int> CapSystem::neighbors(const Eigen::Ref<const Vec>& xi) const {
  std::vector<int> out;
  int lo[3] = {0, 0, 0}, hi[3] = {0, 0, 0};
  for (int d = 0; d < n_; ++d) {
    int i = std::clamp(static_cast<int>((xi(d) + 1.0) / cell_), 0, cells_ - 1);
    lo[d] = std::max(0, i - 1);
    hi[d] = std::min(cells_ - 1, i + 1);
  }
  auto visit = [&](std::size_t k) {
    for (int p = bucket_ptr_[k]; p < bucket_ptr_[k + 1]; ++p) {
      const Cap& c = caps_[bucket_cap_[p]];
      if (c.center.dot(xi) > std::cos(c.support_radius)) out.push_back(c.index);
    }
  };
  if (n_ == 2) {
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int b = lo[1]; b <= hi[1]; ++b) visit(static_cast<std::size_t>(a) * cells_ + b);
  } else {
    for (int a = lo[0]; a <= hi[0]; ++a)
      for (int b = lo[1]; b <= hi[1]; ++b)
        for (int c = lo[2]; c <= hi[2]; ++c)
          visit((static_cast<std::size_t>(a) * cells_ + b) * cells_ + c);
  }
  std::sort(out.begin(), out.end());
  return out;
}

double CapSystem::raw_bump(int a, const Eigen::Ref<const Vec>& xi) const {
  const Cap& c = caps_[a];
  double d = 2.0 * std::atan2((xi - c.center).norm(), (xi + c.center).norm());
  return profile_(d / c.support_radius);
}

void CapSystem::bumps(const Eigen::Ref<const Vec>& xi, std::vector<std::pair<int, double>>& out) const {
  out.clear();
  double total = 0;
  for (int a : neighbors(xi)) {
    double v = raw_bump(a, xi);
    if (v > 0) {
      out.emplace_back(a, v);
      total += v;
    }
  }
  if (total <= 0) throw CertificationError("cap system does not cover the sphere");
  for (auto& p : out) p.second /= total;
}

double CapSystem::bump(int a, const Eigen::Ref<const Vec>& xi) const {
  std::vector<std::pair<int, double>> v;
  bumps(xi, v);
  for (auto& p : v)
    if (p.first == a) return p.second;
  return 0.0;
}

const SphereQuadrature& CapSystem::quadrature() const {
  if (!quad_) throw DomainError("cap system has no quadrature");
  return *quad_;
}

const CapSystem& CapSystem::parent_system() const {
  if (!parent_sys_) throw DomainError("cap system has no parent map");
  return *parent_sys_;
}

std::vector<std::vector<int>> CapSystem::children() const {
  std::vector<std::vector<int>> out(has_parent() ? parent_sys_->size() : 0);
  for (std::size_t b = 0; b < parent_.size(); ++b) out[parent_[b]].push_back(static_cast<int>(b));
  return out;
}

ZonalCells zonal_cells(double s, bool hemisphere) {
  double area = s * s;
  double tc = std::acos(std::max(-1.0, 1.0 - area / kTwoPi));
  double top = tc, bottom = hemisphere ? kPi / 2 : kPi - tc;
  int bands = std::max(1, static_cast<int>(std::lround((bottom - top) / s)));
  double dt = (bottom - top) / bands;

  std::vector<Vec> centers;
  std::vector<double> radii;
  centers.push_back(polar_point(0, 0));
  radii.push_back(tc);
  auto edge_radius = [](const Vec& c, double ta, double tb, double pa, double pb) {
    double r = 0;
    for (int i = 0; i <= 8; ++i) {
      double u = i / 8.0;
      for (auto [t, p] : {std::pair{ta, pa + u * (pb - pa)}, std::pair{tb, pa + u * (pb - pa)},
                          std::pair{ta + u * (tb - ta), pa}, std::pair{ta + u * (tb - ta), pb}}) {
        Vec q = polar_point(t, p);
        r = std::max(r, 2.0 * std::atan2((q - c).norm(), (q + c).norm()));
      }
    }
    return r;
  };
  for (int j = 0; j < bands; ++j) {
    double ta = top + j * dt, tb = top + (j + 1) * dt;
    double band_area = kTwoPi * (std::cos(ta) - std::cos(tb));
    int k = std::max(1, static_cast<int>(std::lround(band_area / area)));
    double off = (j % 2) ? kPi / k : 0.0;
    double tm = std::acos(0.5 * (std::cos(ta) + std::cos(tb)));
    for (int i = 0; i < k; ++i) {
      double pa = off + kTwoPi * i / k, pb = off + kTwoPi * (i + 1) / k;
      Vec c = polar_point(tm, 0.5 * (pa + pb));
      centers.push_back(c);
      radii.push_back(edge_radius(c, ta, tb, pa, pb));
    }
  }
  if (!hemisphere) {
    centers.push_back(polar_point(kPi, 0));
    radii.push_back(tc);
  }
  ZonalCells z{Mat(3, centers.size()), Vec(radii.size())};
  for (std::size_t i = 0; i < centers.size(); ++i) {
    z.centers.col(i) = centers[i] / centers[i].norm();
    z.radii(i) = radii[i];
  }
  return z;
}

int quadrature_resolution(int n, double f, double min_support) {
  if (n == 2)
    return static_cast<int>(std::max(std::ceil(16.0 * kPi * f), std::ceil(64.0 * kPi / min_support)));
  return static_cast<int>(std::max({std::ceil(8.0 * kPi * f), std::ceil(12.0 * kPi / min_support), 8.0}));
}

cplx plane_wave_integral(int n, int res, const Vec& x) {
  double re = 0, im = 0, s, c;
  if (n == 2) {
    double w = kTwoPi / res;
    for (int j = 0; j < res; ++j) {
      double th = kTwoPi * j / res;
      sincos_cycles(x(0) * std::cos(th) + x(1) * std::sin(th), s, c);
      re += w * c;
      im -= w * s;
    }
    return {re, im};
  }
  GaussRule g = gauss_legendre(res);
  int na = 2 * res;
  for (int i = 0; i < res; ++i) {
    double z = g.x(i), rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    double w = g.w(i) * kTwoPi / na;
    for (int k = 0; k < na; ++k) {
      double ph = kTwoPi * k / na;
      sincos_cycles(rho * (x(0) * std::cos(ph) + x(1) * std::sin(ph)) + z * x(2), s, c);
      re += w * c;
      im -= w * s;
    }
  }
  return {re, im};
}

SphereQuadrature product_rule(int n, int res, double offset) {
  require(n == 2 || n == 3, "unsupported dimension");
  require(res >= 1, "resolution must be positive");
  SphereQuadrature out;
  if (n == 2) {
    out.nodes.resize(2, res);
    out.weights = Vec::Constant(res, kTwoPi / res);
    for (int j = 0; j < res; ++j) {
      double th = offset + kTwoPi * j / res;
      out.nodes(0, j) = std::cos(th);
      out.nodes(1, j) = std::sin(th);
    }
    return out;
  }
  GaussRule g = gauss_legendre(res);
  int na = 2 * res;
  out.nodes.resize(3, static_cast<Eigen::Index>(res) * na);
  out.weights.resize(static_cast<Eigen::Index>(res) * na);
  Eigen::Index j = 0;
  for (int i = 0; i < res; ++i) {
    double z = g.x(i), rho = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int k = 0; k < na; ++k, ++j) {
      double ph = kTwoPi * k / na;
      out.nodes(0, j) = rho * std::cos(ph);
      out.nodes(1, j) = rho * std::sin(ph);
      out.nodes(2, j) = z;
      out.weights(j) = g.w(i) * kTwoPi / na;
    }
  }
  return out;
}

CapSystem quadrature_for_bandwidth(const CapSystem& system, double f) {
  require(f > 0, "max_frequency must be positive");
  int n = system.dim();
  double rho_min = kPi;
  for (const Cap& c : system.caps()) rho_min = std::min(rho_min, c.support_radius);
  int res = quadrature_resolution(n, f, rho_min);
  double count = n == 2 ? res : 2.0 * res * res;
  // coordinates, weight, owner, ptr and ~4 table entries per node
  check_budget(count * (8.0 * n + 8 + 4 + 4 + 4 * 12), "quadrature with " +
               std::to_string(static_cast<long long>(count)) + " nodes");

  auto q = std::make_shared<SphereQuadrature>(product_rule(n, res, system.equal_arcs() ? system.arc_offset() : 0.0));
  q->bandwidth = f;
  Eigen::Index M = q->size();

  std::vector<int> cnt(M + 1, 0);
  std::vector<std::vector<std::pair<int, double>>> scratch;
#pragma omp parallel
  {
    std::vector<std::pair<int, double>> b;
#pragma omp for schedule(static)
    for (Eigen::Index j = 0; j < M; ++j) {
      system.bumps(q->nodes.col(j), b);
      cnt[j + 1] = static_cast<int>(b.size());
    }
  }
  for (Eigen::Index j = 0; j < M; ++j) cnt[j + 1] += cnt[j];
  q->ptr = cnt;
  q->cap.resize(cnt[M]);
  q->phi.resize(cnt[M]);
  q->owner.resize(M);
#pragma omp parallel
  {
    std::vector<std::pair<int, double>> b;
#pragma omp for schedule(static)
    for (Eigen::Index j = 0; j < M; ++j) {
      system.bumps(q->nodes.col(j), b);
      int p = cnt[j], best = b[0].first;
      double bv = -1;
      for (auto& e : b) {
        q->cap[p] = e.first;
        q->phi[p++] = e.second;
        if (e.second > bv) bv = e.second, best = e.first;
      }
      q->owner[j] = best;
    }
  }

  // plane waves at 10 frequencies against the doubled rule
  std::mt19937_64 gen(0x5eedULL + n);
  for (int t = 0; t < 10; ++t) {
    Vec x(n);
    double r = f * uniform01(gen);
    double a = kTwoPi * uniform01(gen), z = 2 * uniform01(gen) - 1;
    if (n == 2) x << r * std::cos(a), r * std::sin(a);
    else x << r * std::sqrt(1 - z * z) * std::cos(a), r * std::sqrt(1 - z * z) * std::sin(a), r * z;
    cplx v1 = plane_wave_integral(n, res, x), v2 = plane_wave_integral(n, 2 * res, x);
    if (std::abs(v1 - v2) > 1e-6 * sphere_area(n))
      throw CertificationError("quadrature fails plane-wave check at |x| = " + std::to_string(r));
  }

  CapSystem out = system;
  out.quad_ = std::move(q);
  return out;
}

CapSystem caps_from_arcs(int K, double offset, double s, BumpProfile profile) {
  require(K >= 2, "need at least two arcs");
  double delta = kTwoPi / K;
  std::vector<Cap> caps(K);
  for (int k = 0; k < K; ++k) {
    double th = offset + delta * k;
    caps[k].center = Vec(2);
    caps[k].center << std::cos(th), std::sin(th);
    caps[k].angular_scale = s;
    caps[k].cell_radius = delta / 2;
    caps[k].support_radius = kSupportFactor * delta / 2;
  }
  CapSystem sys(2, s, std::move(caps), profile);
  sys.equal_arcs_ = true;
  sys.arc_offset_ = offset;
  return sys;
}

CapSystem caps_from_cells(int n, double s, const Mat& centers, const Vec& radii, BumpProfile profile) {
  require(centers.cols() == radii.size(), "centers and radii disagree");
  std::vector<Cap> caps(centers.cols());
  for (Eigen::Index i = 0; i < centers.cols(); ++i) {
    caps[i].center = centers.col(i);
    caps[i].angular_scale = s;
    caps[i].cell_radius = radii(i);
    caps[i].support_radius = kSupportFactor * radii(i);
  }
  return CapSystem(n, s, std::move(caps), profile);
}

CapSystem cap_decompose(int n, double s, BumpProfile profile, double rotation) {
  require(n == 2 || n == 3, "unsupported dimension " + std::to_string(n));
  require(s > 0 && s <= kPi / 4, "scale out of range (0, pi/4]");
  CapSystem sys = [&] {
    if (n == 2) return caps_from_arcs(static_cast<int>(std::ceil(kTwoPi / s)), rotation, s, profile);
    ZonalCells z = zonal_cells(s, false);
    return caps_from_cells(3, s, z.centers, z.radii, profile);
  }();
  return quadrature_for_bandwidth(sys, 1.0 / s);
}

CapSystem refine(const CapSystem& coarse, double fine_scale) {
  require(fine_scale > 0 && fine_scale < coarse.scale(), "fine scale must be below the coarse scale");
  int n = coarse.dim();
  std::vector<int> parent;
  CapSystem fine = [&] {
    if (n == 2 && coarse.equal_arcs()) {
      int K = coarse.size();
      double delta = kTwoPi / K;
      int m = static_cast<int>(std::ceil(delta / fine_scale * (1 - 1e-12)));
      double step = delta / m;
      // children tile the parent's cell [center - delta/2, center + delta/2]
      CapSystem f = caps_from_arcs(K * m, coarse.arc_offset() - delta / 2 + step / 2, fine_scale,
                                   coarse.profile());
      parent.resize(K * m);
      for (int b = 0; b < K * m; ++b) parent[b] = b / m;
      return f;
    }
    require(n == 3, "refine of a non-uniform circle system is not supported");
    ZonalCells z = zonal_cells(fine_scale, false);
    CapSystem f = caps_from_cells(3, fine_scale, z.centers, z.radii, coarse.profile());
    parent.resize(f.size());
    for (int b = 0; b < f.size(); ++b) {
      const Vec& c = f.cap(b).center;
      int best = -1;
      double bd = 1e9;
      for (int a : coarse.neighbors(c)) {
        double d = geodesic_distance(c, coarse.cap(a).center);
        if (d < bd) bd = d, best = a;
      }
      if (best < 0) throw CertificationError("fine cap without a parent");
      parent[b] = best;
    }
    return f;
  }();
  for (int b = 0; b < fine.size(); ++b) {
    const Cap& p = coarse.cap(parent[b]);
    double d = geodesic_distance(fine.cap(b).center, p.center);
    if (d + fine.cap(b).cell_radius > 2 * p.cell_radius + 1e-12)
      throw CertificationError("fine cap " + std::to_string(b) + " escapes the dilate of its parent");
  }
  double f = coarse.has_quadrature() ? std::max(coarse.quadrature().bandwidth, 1.0 / fine_scale)
                                     : 1.0 / fine_scale;
  CapSystem out = quadrature_for_bandwidth(fine, f);
  out.parent_sys_ = std::make_shared<const CapSystem>(coarse);
  out.parent_ = std::move(parent);
  return out;
}

}  // namespace lab

namespace lab {

bool CapAudit::ok() const {
  return caps * 2 >= expected && caps <= 2 * expected && partition_error <= 1e-8 && support_ratio < 1 &&
         weight_error <= 1e-9 && uncovered == 0 && parent_ok;
}

CapAudit audit_caps(const CapSystem& sys, int samples, std::uint64_t seed) {
  const int n = sys.dim();
  const double s = sys.scale();
  CapAudit a;
  a.caps = sys.size();
  a.expected = static_cast<int>(std::ceil(n == 2 ? kTwoPi / s : 4 * kPi / (s * s)));
  std::mt19937_64 g(derive_seed(seed, 0xca95));
  std::vector<std::pair<int, double>> b;
  for (int i = 0; i < samples; ++i) {
    double u = uniform01(g), v = uniform01(g);
    Vec xi(n);
    if (n == 2) {
      xi << std::cos(kTwoPi * u), std::sin(kTwoPi * u);
    } else {
      double z = 2 * u - 1, r = std::sqrt(std::max(0.0, 1 - z * z));
      xi << r * std::cos(kTwoPi * v), r * std::sin(kTwoPi * v), z;
    }
    sys.bumps(xi, b);
    double sum = 0;
    for (auto& p : b) sum += p.second;
    a.partition_error = std::max(a.partition_error, std::abs(sum - 1));
    bool in = false;
    for (int c : sys.neighbors(xi))
      in = in || geodesic_distance(xi, sys.cap(c).center) <= sys.cap(c).cell_radius + 1e-12;
    a.uncovered += !in;
  }
  Mat C(n, sys.size());
  for (int c = 0; c < sys.size(); ++c) C.col(c) = sys.cap(c).center;
  double best = -1;
  for (int c = 0; c < sys.size(); ++c)
    for (int d = c + 1; d < sys.size(); ++d) best = std::max(best, C.col(c).dot(C.col(d)));
  a.min_separation = std::acos(std::clamp(best, -1.0, 1.0)) / s;
  if (sys.has_quadrature()) {
    const SphereQuadrature& q = sys.quadrature();
    for (Eigen::Index j = 0; j < q.size(); ++j)
      for (int p = q.ptr[j]; p < q.ptr[j + 1]; ++p) {
        const Cap& c = sys.cap(q.cap[p]);
        a.support_ratio = std::max(a.support_ratio, geodesic_distance(q.nodes.col(j), c.center) / (2 * c.cell_radius));
      }
    a.weight_error = std::abs(q.weights.sum() - sphere_area(n)) / sphere_area(n);
  }
  if (sys.has_parent()) {
    const CapSystem& P = sys.parent_system();
    const auto& pm = sys.parent_map();
    a.parent_ok = static_cast<int>(pm.size()) == sys.size();
    for (int c = 0; c < sys.size() && a.parent_ok; ++c) {
      int p = pm[c];
      a.parent_ok = p >= 0 && p < P.size() &&
                    geodesic_distance(sys.cap(c).center, P.cap(p).center) + sys.cap(c).cell_radius <=
                        2 * P.cap(p).cell_radius + 1e-12;
    }
  }
  return a;
}

}  // namespace lab
