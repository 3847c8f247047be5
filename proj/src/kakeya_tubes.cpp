#include "lab/kakeya_tubes.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <random>

#include "lab/fft.hpp"

namespace lab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Points (k + shift) h, k in [lo, hi] on every axis, row-major.
struct Lattice {
  int n;
  double h;
  double shift;
  int lo, hi;

  int side() const { return hi - lo + 1; }
  Eigen::Index count() const {
    Eigen::Index c = 1;
    for (int d = 0; d < n; ++d) c *= side();
    return c;
  }
};

// Calls fn(flat index) for every lattice point inside the tube. Columns run
// along the axis most aligned with the tube, with exact endpoint checks.
template <class Fn>
void for_each_in_tube(const Tube& t, const Lattice& L, Fn&& fn) {
  const int n = L.n;
  Vec lo, hi;
  t.bounds(lo, hi);
  int a = 0;
  for (int d = 1; d < n; ++d)
    if (std::abs(t.frame(d, 0)) > std::abs(t.frame(a, 0))) a = d;
  int klo[3], khi[3];
  for (int d = 0; d < n; ++d) {
    klo[d] = std::max(L.lo, static_cast<int>(std::floor(lo(d) / L.h - L.shift)) - 1);
    khi[d] = std::min(L.hi, static_cast<int>(std::ceil(hi(d) / L.h - L.shift)) + 1);
    if (klo[d] > khi[d]) return;
  }
  int others[2], no = 0;
  for (int d = 0; d < n; ++d)
    if (d != a) others[no++] = d;
  Eigen::Index stride[3];
  stride[n - 1] = 1;
  for (int d = n - 2; d >= 0; --d) stride[d] = stride[d + 1] * L.side();
  double bound[3];
  bound[0] = t.length / 2;
  for (int i = 1; i < n; ++i) bound[i] = t.width / 2;

  Vec p(n);
  auto column = [&](const int* k) {
    // p_d fixed for d != a; solve the slab constraints along axis a
    double tlo = -1e300, thi = 1e300;
    for (int i = 0; i < n; ++i) {
      double alpha = -t.center(a) * t.frame(a, i);
      for (int j = 0; j < n - 1; ++j) {
        int d = others[j];
        alpha += ((k[j] + L.shift) * L.h - t.center(d)) * t.frame(d, i);
      }
      double u = t.frame(a, i);
      if (std::abs(u) < 1e-14) {
        if (std::abs(alpha) > bound[i] * (1 + 1e-12)) return;
        continue;
      }
      double x0 = (-bound[i] - alpha) / u, x1 = (bound[i] - alpha) / u;
      if (x0 > x1) std::swap(x0, x1);
      tlo = std::max(tlo, x0);
      thi = std::min(thi, x1);
    }
    if (tlo > thi + L.h) return;
    for (int j = 0; j < n - 1; ++j) p(others[j]) = (k[j] + L.shift) * L.h;
    auto inside = [&](int ka) {
      p(a) = (ka + L.shift) * L.h;
      return t.contains(p);
    };
    int kmin = std::max(klo[a], static_cast<int>(std::ceil(tlo / L.h - L.shift)) - 1);
    int kmax = std::min(khi[a], static_cast<int>(std::floor(thi / L.h - L.shift)) + 1);
    while (kmin <= kmax && !inside(kmin)) ++kmin;
    while (kmax >= kmin && !inside(kmax)) --kmax;
    if (kmin > kmax) return;
    Eigen::Index base = 0;
    for (int j = 0; j < n - 1; ++j) base += Eigen::Index(k[j] - L.lo) * stride[others[j]];
    for (int ka = kmin; ka <= kmax; ++ka) fn(base + Eigen::Index(ka - L.lo) * stride[a]);
  };
  int k[2];
  if (n == 2) {
    for (k[0] = klo[others[0]]; k[0] <= khi[others[0]]; ++k[0]) column(k);
  } else {
    for (k[0] = klo[others[0]]; k[0] <= khi[others[0]]; ++k[0])
      for (k[1] = klo[others[1]]; k[1] <= khi[others[1]]; ++k[1]) column(k);
  }
}

Lattice node_lattice(const GridSpec& g) { return Lattice{g.n, g.h, 0.0, -g.K(), g.K()}; }
Lattice cell_lattice(const CellGrid& g) { return Lattice{g.n, g.h, 0.5, -g.K, g.K - 1}; }

CellGrid cover_grid(const TubeFamily& fam, double h) {
  double ext = 0;
  Vec lo, hi;
  for (const Tube& t : fam.tubes) {
    t.bounds(lo, hi);
    ext = std::max({ext, lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()});
  }
  return CellGrid{fam.dim(), h, static_cast<int>(std::ceil(ext / h)) + 1};
}

// c^r for the dual exponents in use, exact where possible.
double pow_r(double c, double r) {
  if (r == 2) return c * c;
  if (r == 1.5) return c * std::sqrt(c);
  if (r == 1) return c;
  return std::pow(c, r);
}

}  // namespace

Tube Tube::make(const Vec& direction, const Vec& center, double width, double length) {
  const int n = static_cast<int>(direction.size());
  require(n == 2 || n == 3, "tube dimension must be 2 or 3");
  require(center.size() == n, "tube center dimension mismatch");
  require(width > 0 && length > 0, "tube dimensions must be positive");
  require(std::abs(direction.norm() - 1) < 1e-9, "tube direction must be a unit vector");
  Tube t;
  t.center = center;
  t.width = width;
  t.length = length;
  t.frame.resize(n, n);
  t.frame.col(0) = direction;
  if (n == 2) {
    t.frame.col(1) << -direction(1), direction(0);
  } else {
    int k = 0;
    for (int d = 1; d < 3; ++d)
      if (std::abs(direction(d)) < std::abs(direction(k))) k = d;
    Vec e = Vec::Zero(3);
    e(k) = 1;
    Vec e1 = cross(e, direction).normalized();
    t.frame.col(1) = e1;
    t.frame.col(2) = cross(direction, e1);
  }
  return t;
}

bool Tube::contains(const Eigen::Ref<const Vec>& x) const {
  const int n = static_cast<int>(frame.rows());
  for (int i = 0; i < n; ++i) {
    double s = 0;
    for (int d = 0; d < n; ++d) s += (x(d) - center(d)) * frame(d, i);
    if (std::abs(s) > (i == 0 ? length : width) / 2) return false;
  }
  return true;
}

void Tube::bounds(Vec& lo, Vec& hi) const {
  const int n = static_cast<int>(frame.rows());
  Vec half = frame.col(0).cwiseAbs() * (length / 2);
  for (int i = 1; i < n; ++i) half += frame.col(i).cwiseAbs() * (width / 2);
  lo = center - half;
  hi = center + half;
}

DirectionNet direction_net(int n, double N) {
  require(n == 2 || n == 3, "direction net dimension must be 2 or 3");
  require(N >= 2, "direction net needs N >= 2");
  DirectionNet net;
  net.n = n;
  net.N = N;
  if (n == 2) {
    int K = static_cast<int>(std::ceil(kPi * N - 1e-9));
    net.directions.resize(2, K);
    for (int k = 0; k < K; ++k) net.directions.col(k) << std::cos(kPi * k / K), std::sin(kPi * k / K);
  } else {
    net.directions = zonal_cells(std::sqrt(kPi) / N, true).centers;
  }
  return net;
}

double min_separation(const DirectionNet& net) {
  double best = kPi;
  for (int a = 0; a < net.size(); ++a)
    for (int b = a + 1; b < net.size(); ++b) {
      double d = geodesic_distance(net.directions.col(a), net.directions.col(b));
      best = std::min({best, d, kPi - d});
    }
  return best;
}

double TubeFamily::bounding_radius() const {
  double r = 0;
  for (const Tube& t : tubes)
    r = std::max(r, t.center.norm() + std::sqrt(t.length * t.length / 4 + (dim() - 1) * t.width * t.width / 4));
  return r;
}

double TubeFamily::superposition(const Eigen::Ref<const Vec>& x) const {
  double s = 0;
  for (int a = 0; a < size(); ++a)
    if (c(a) != 0 && tubes[a].contains(x)) s += c(a);
  return s;
}

void TubeFamily::validate() const {
  require(static_cast<int>(tubes.size()) == net.size(), "one tube per net direction");
  require(c.size() == net.size(), "one coefficient per tube");
  require((c.array() >= 0).all(), "tube coefficients must be nonnegative");
  for (int a = 0; a < size(); ++a)
    require((tubes[a].direction() - net.directions.col(a)).norm() < 1e-12, "tube direction differs from the net");
}

TubeFamily make_family(const DirectionNet& net, const Mat& centers, const Vec& c, double lambda, double N) {
  require(centers.rows() == net.n && centers.cols() == net.size(), "one center per net direction");
  TubeFamily f;
  f.net = net;
  f.c = c;
  f.lambda = lambda;
  f.N = N;
  for (int a = 0; a < net.size(); ++a)
    f.tubes.push_back(Tube::make(net.directions.col(a), centers.col(a), lambda, lambda * N));
  f.validate();
  return f;
}

TubeFamily bush(int n, double N, double lambda, const Vec& center) {
  DirectionNet net = direction_net(n, N);
  Vec y = center.size() ? center : Vec::Zero(n);
  Mat C = y.replicate(1, net.size());
  return make_family(net, C, Vec::Ones(net.size()), lambda, N);
}

TubeFamily random_family(int n, double N, double lambda, double radius, std::uint64_t seed, double snap) {
  DirectionNet net = direction_net(n, N);
  double room = std::max(0.0, radius - std::sqrt(lambda * N * lambda * N / 4 + (n - 1) * lambda * lambda / 4));
  std::mt19937_64 gen(derive_seed(seed, 0x7b5));
  Mat C(n, net.size());
  for (int a = 0; a < net.size(); ++a) {
    double u = uniform01(gen), v = uniform01(gen), w = uniform01(gen);
    Vec y = room * std::pow(u, 1.0 / n) * unit_from_uniforms(n, v, w);
    if (snap > 0) {
      y = (y / snap).array().round().matrix() * snap;
      // rounding may push past the room; pull back along the lattice
      while (y.norm() > room && y.norm() > 0) y -= (y.array().sign() * snap).matrix();
    }
    C.col(a) = y;
  }
  return make_family(net, C, Vec::Ones(net.size()), lambda, N);
}

Eigen::Index CellGrid::count() const {
  Eigen::Index c = 1;
  for (int d = 0; d < n; ++d) c *= side();
  return c;
}

Vec rasterize(const TubeFamily& fam, const CellGrid& grid) {
  require(grid.n == fam.dim(), "grid dimension differs from the family");
  check_budget(8.0 * grid.count(), "tube raster");
  Vec F = Vec::Zero(grid.count());
  Lattice L = cell_lattice(grid);
  for (int a = 0; a < fam.size(); ++a) {
    double c = fam.c(a);
    if (c == 0) continue;
    for_each_in_tube(fam.tubes[a], L, [&](Eigen::Index i) { F(i) += c; });
  }
  return F;
}

long long raster_count(const Tube& t, double h) {
  const int n = static_cast<int>(t.frame.rows());
  Vec lo, hi;
  t.bounds(lo, hi);
  double ext = std::max(lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff());
  int K = static_cast<int>(std::ceil(ext / h)) + 1;
  long long cnt = 0;
  for_each_in_tube(t, Lattice{n, h, 0.5, -K, K - 1}, [&](Eigen::Index) { ++cnt; });
  return cnt;
}

double coefficient_sum(const Vec& c, double r) {
  double s = 0;
  for (Eigen::Index a = 0; a < c.size(); ++a) s += pow_r(std::abs(c(a)), r);
  return s;
}

namespace {

DualNorm grid_dual_norm(const TubeFamily& fam, double r, double h) {
  CellGrid g = cover_grid(fam, h);
  Vec F = rasterize(fam, g);
  double acc = 0;
  const Eigen::Index B = 4096;
  for (Eigen::Index b = 0; b < F.size(); b += B) {
    double part = 0;
    for (Eigen::Index i = b; i < std::min(F.size(), b + B); ++i)
      if (F(i) > 0) part += pow_r(F(i), r);
    acc += part;
  }
  DualNorm d;
  d.value = std::pow(acc * std::pow(h, fam.dim()), 1.0 / r);
  d.method = "grid";
  return d;
}

// int F^r = sum_a c_a |T_a| E_{x ~ T_a} F(x)^{r-1}, one stratum per tube.
DualNorm mc_dual_norm(const TubeFamily& fam, double r, const DualNormOptions& opts) {
  const int n = fam.dim();
  int m = std::max(8, opts.samples_per_tube);
  for (int round = 0;; ++round) {
    double I = 0, var = 0;
    Vec x(n);
    for (int a = 0; a < fam.size(); ++a) {
      if (fam.c(a) == 0) continue;
      const Tube& t = fam.tubes[a];
      std::mt19937_64 gen(derive_seed(opts.seed, a, 0x3c + round));
      double s1 = 0, s2 = 0;
      for (int i = 0; i < m; ++i) {
        x = t.center + (uniform01(gen) - 0.5) * t.length * t.frame.col(0);
        for (int j = 1; j < n; ++j) x += (uniform01(gen) - 0.5) * t.width * t.frame.col(j);
        double v = std::pow(fam.superposition(x), r - 1);
        s1 += v;
        s2 += v * v;
      }
      double mean = s1 / m, sd2 = std::max(0.0, s2 / m - mean * mean) * m / (m - 1);
      double wgt = fam.c(a) * t.volume();
      I += wgt * mean;
      var += wgt * wgt * sd2 / m;
    }
    DualNorm d;
    d.method = "montecarlo";
    d.value = std::pow(I, 1.0 / r);
    d.stderr = I > 0 ? d.value * std::sqrt(var) / (r * I) : 0.0;
    if (d.stderr <= opts.target_stderr * d.value || m >= (1 << 16)) {
      if (d.stderr > opts.target_stderr * d.value)
        throw CertificationError("dual_norm Monte Carlo stderr above target");
      return d;
    }
    m *= 4;
  }
}

}  // namespace

double exact_dual_norm(const TubeFamily& fam, double r) {
  require(fam.dim() == 2, "exact dual norm is for n = 2");
  struct Seg {
    double x0, y0, x1, y1;
  };
  std::vector<Seg> segs;
  std::vector<double> xs;
  for (int a = 0; a < fam.size(); ++a) {
    if (fam.c(a) == 0) continue;
    const Tube& t = fam.tubes[a];
    Vec u = t.frame.col(0) * (t.length / 2), v = t.frame.col(1) * (t.width / 2);
    Vec p[4] = {t.center + u + v, t.center - u + v, t.center - u - v, t.center + u - v};
    for (int i = 0; i < 4; ++i) {
      segs.push_back({p[i](0), p[i](1), p[(i + 1) % 4](0), p[(i + 1) % 4](1)});
      xs.push_back(p[i](0));
    }
  }
  // edge crossings split the plane into slabs with no vertex inside
  for (std::size_t i = 0; i < segs.size(); ++i)
    for (std::size_t j = i + 1; j < segs.size(); ++j) {
      const Seg &s = segs[i], &q = segs[j];
      double dx1 = s.x1 - s.x0, dy1 = s.y1 - s.y0, dx2 = q.x1 - q.x0, dy2 = q.y1 - q.y0;
      double den = dx1 * dy2 - dy1 * dx2;
      if (std::abs(den) < 1e-15) continue;
      double ta = ((q.x0 - s.x0) * dy2 - (q.y0 - s.y0) * dx2) / den;
      double tb = ((q.x0 - s.x0) * dy1 - (q.y0 - s.y0) * dx1) / den;
      if (ta >= 0 && ta <= 1 && tb >= 0 && tb <= 1) xs.push_back(s.x0 + ta * dx1);
    }
  std::sort(xs.begin(), xs.end());
  // vertical section of tube a at x: [lo, hi] or empty
  auto section = [&](const Tube& t, double x, double& lo, double& hi) {
    lo = -1e300;
    hi = 1e300;
    for (int i = 0; i < 2; ++i) {
      double b = (i == 0 ? t.length : t.width) / 2;
      double alpha = (x - t.center(0)) * t.frame(0, i) - t.center(1) * t.frame(1, i);
      double u = t.frame(1, i);
      if (std::abs(u) < 1e-14) {
        if (std::abs(alpha) > b) return false;
        continue;
      }
      double y0 = (-b - alpha) / u, y1 = (b - alpha) / u;
      if (y0 > y1) std::swap(y0, y1);
      lo = std::max(lo, y0);
      hi = std::min(hi, y1);
    }
    return lo < hi;
  };
  double acc = 0;
  struct End {
    double at_a, at_b, mid;
    double dc;
  };
  std::vector<End> ends;
  for (std::size_t k = 0; k + 1 < xs.size(); ++k) {
    double xa = xs[k], xb = xs[k + 1], w = xb - xa;
    if (w < 1e-12) continue;
    double x1 = xa + 0.25 * w, x2 = xb - 0.25 * w, xm = 0.5 * (xa + xb);
    ends.clear();
    for (int a = 0; a < fam.size(); ++a) {
      if (fam.c(a) == 0) continue;
      double l1, h1, l2, h2;
      if (!section(fam.tubes[a], x1, l1, h1) || !section(fam.tubes[a], x2, l2, h2)) continue;
      // endpoints are linear across the slab
      auto lin = [&](double y1, double y2, double x) { return y1 + (y2 - y1) * (x - x1) / (x2 - x1); };
      ends.push_back({lin(l1, l2, xa), lin(l1, l2, xb), lin(l1, l2, xm), fam.c(a)});
      ends.push_back({lin(h1, h2, xa), lin(h1, h2, xb), lin(h1, h2, xm), -fam.c(a)});
    }
    std::sort(ends.begin(), ends.end(), [](const End& p, const End& q) {
      return p.mid < q.mid || (p.mid == q.mid && p.dc < q.dc);
    });
    double F = 0;
    for (std::size_t i = 0; i + 1 < ends.size(); ++i) {
      F += ends[i].dc;
      if (F <= 1e-12) continue;
      double area = 0.5 * w * ((ends[i + 1].at_a - ends[i].at_a) + (ends[i + 1].at_b - ends[i].at_b));
      if (area > 0) acc += area * pow_r(F, r);
    }
  }
  return std::pow(acc, 1.0 / r);
}

DualNorm dual_norm(const TubeFamily& fam, double r, const DualNormOptions& opts) {
  fam.validate();
  require(r >= 1, "dual_norm needs r >= 1");
  if ((fam.c.array() == 0).all()) return DualNorm{0, 0, "grid", false};
  double h = opts.h > 0 ? opts.h : fam.lambda / 8;
  switch (opts.kind) {
    case DualNormOptions::Grid:
      return grid_dual_norm(fam, r, h);
    case DualNormOptions::MonteCarlo:
      return mc_dual_norm(fam, r, opts);
    case DualNormOptions::Exact: {
      DualNorm d;
      d.value = exact_dual_norm(fam, r);
      d.method = "exact";
      return d;
    }
    case DualNormOptions::Auto:
      break;
  }
  CellGrid g = cover_grid(fam, h);
  if (8.0 * g.count() <= memory_budget() / 2) return grid_dual_norm(fam, r, h);
  DualNorm d = mc_dual_norm(fam, r, opts);
  d.fallback = true;
  return d;
}

RatioReport cov_ratio(const TubeFamily& fam, double r, const DualNormOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  const int n = fam.dim();
  DualNorm d = dual_norm(fam, r, opts);
  RatioReport rep;
  rep.module = "kakeya_tubes";
  rep.op = "cov_ratio";
  rep.n = n;
  rep.R = fam.N;
  rep.r = r;
  rep.seed = opts.seed;
  rep.lhs = d.value;
  rep.rhs = std::pow(fam.N, 1.0 / r) * std::pow(fam.lambda, n / r) * std::pow(coefficient_sum(fam.c, r), 1.0 / r);
  rep.finish();
  rep.stderr = rep.rhs > 0 ? d.stderr / rep.rhs : 0.0;
  rep.method = d.method + (d.fallback ? "/fallback" : "");
  rep.runtime_s = seconds_since(t0);
  return rep;
}

RatioReport bush_bound_check(const TubeFamily& fam, const DualNormOptions& opts) {
  const int n = fam.dim();
  const double r = n / (n - 1.0);
  RatioReport rep = cov_ratio(fam, r, opts);
  rep.op = "bush_bound_check";
  double lg = std::pow(std::log(fam.N), (n - 1.0) / n);
  rep.rhs *= lg;
  rep.stderr = lg > 0 ? rep.stderr / lg : 0.0;
  rep.finish();
  return rep;
}

Vec bush_profile(const TubeFamily& fam, const Vec& radii, int samples, std::uint64_t seed) {
  const int n = fam.dim();
  Vec center = Vec::Zero(n);
  for (const Tube& t : fam.tubes) center += t.center;
  center /= std::max(1, fam.size());
  Vec out(radii.size());
  std::mt19937_64 gen(derive_seed(seed, 0xb5));
  for (Eigen::Index k = 0; k < radii.size(); ++k) {
    double s = 0;
    for (int i = 0; i < samples; ++i) {
      double u = uniform01(gen), v = uniform01(gen);
      s += fam.superposition(center + radii(k) * unit_from_uniforms(n, u, v));
    }
    out(k) = s / samples;
  }
  return out;
}

double tube_average(const RealField& f, const Tube& t) {
  double s = 0;
  long long cnt = 0;
  for_each_in_tube(t, node_lattice(f.grid), [&](Eigen::Index i) {
    s += std::abs(f.values(i));
    ++cnt;
  });
  return cnt ? s / cnt : 0.0;
}

KakeyaMax kakeya_max(const RealField& f, const DirectionNet& net, double stride, double width, std::uint64_t seed) {
  const GridSpec& g = f.grid;
  g.validate();
  require(net.n == g.n, "net dimension differs from the grid");
  require(f.values.size() == g.count(), "field value count mismatch");
  require(stride > 0 && stride <= 0.5 + 1e-12, "translate stride must be in (0, 1/2]");
  const int n = g.n, Kf = g.K(), S = static_cast<int>(g.side());
  const int sm = std::max(1, static_cast<int>(std::lround(stride / g.h)));
  if (std::abs(sm * g.h - stride) > 1e-9 * stride)
    throw CertificationError("stride too coarse to certify: not a multiple of the grid spacing");
  int fm = 1;
  for (int d = sm / 4; d >= 1; --d)
    if (sm % d == 0) {
      fm = d;
      break;
    }
  KakeyaMax out;
  out.stride = sm * g.h;
  out.refined_stride = fm * g.h;
  out.values = Vec::Zero(net.size());

  const double len = width * net.N;
  const int Kt = static_cast<int>(std::ceil(std::sqrt(len * len / 4 + (n - 1) * width * width / 4) / g.h)) + 1;
  const int M = fft_size(S + 2 * Kt);
  double cells = std::pow(double(M), n);
  check_budget(16.0 * 2 * cells, "kakeya correlation grid");
  std::vector<int> dims(n, M);
  auto flat = [&](const int* k) {
    Eigen::Index i = 0;
    for (int d = 0; d < n; ++d) i = i * M + ((k[d] % M) + M) % M;
    return i;
  };
  std::vector<cplx> F(static_cast<std::size_t>(cells), 0.0);
  {
    int k[3];
    for (Eigen::Index i = 0; i < g.count(); ++i) {
      Eigen::Index r = i;
      for (int d = n - 1; d >= 0; --d) {
        k[d] = static_cast<int>(r % S);
        r /= S;
      }
      F[flat(k)] = std::abs(f.values(i));
    }
  }
  fft_inplace(F.data(), dims, -1);

  std::vector<int> check;
  {
    std::vector<int> all(net.size());
    for (int a = 0; a < net.size(); ++a) all[a] = a;
    std::mt19937_64 gen(derive_seed(seed, 0x6b6d));
    for (int i = 0; i < std::min(5, net.size()); ++i) {
      int j = i + static_cast<int>(uniform01(gen) * (net.size() - i));
      std::swap(all[i], all[j]);
      check.push_back(all[i]);
    }
  }
  out.checked = check;

  Lattice kern{n, g.h, 0.0, -Kt, Kt};
  std::vector<cplx> C(F.size());
  for (int a = 0; a < net.size(); ++a) {
    Tube t = Tube::make(net.directions.col(a), Vec::Zero(n), width, len);
    std::fill(C.begin(), C.end(), cplx(0, 0));
    long long cnt = 0;
    for_each_in_tube(t, kern, [&](Eigen::Index i) {
      int k[3];
      for (int d = n - 1; d >= 0; --d) {
        k[d] = -(static_cast<int>(i % kern.side()) + kern.lo);
        i /= kern.side();
      }
      C[flat(k)] = 1.0;
      ++cnt;
    });
    require(cnt > 0, "tube misses every grid point");
    fft_inplace(C.data(), dims, -1);
    for (std::size_t i = 0; i < C.size(); ++i) C[i] *= F[i];
    fft_inplace(C.data(), dims, +1);
    const double norm = 1.0 / (cells * cnt);
    bool refine = std::find(check.begin(), check.end(), a) != check.end();
    double coarse = 0, fine = 0;
    int k[3] = {0, 0, 0};
    for (Eigen::Index i = 0; i < g.count(); ++i) {
      Eigen::Index r = i;
      bool on_coarse = true, on_fine = true;
      for (int d = n - 1; d >= 0; --d) {
        k[d] = static_cast<int>(r % S);
        r /= S;
        int off = k[d] - Kf;
        on_coarse = on_coarse && off % sm == 0;
        on_fine = on_fine && off % fm == 0;
      }
      if (!on_coarse && !(refine && on_fine)) continue;
      double v = std::max(0.0, C[flat(k)].real() * norm);
      if (on_coarse) coarse = std::max(coarse, v);
      if (on_fine) fine = std::max(fine, v);
    }
    out.values(a) = coarse;
    if (refine && fine > 0) out.worst_ratio = std::min(out.worst_ratio, coarse / fine);
  }
  if (out.worst_ratio < 0.85)
    throw CertificationError("stride too coarse to certify: translate max changes by " +
                             std::to_string(1 - out.worst_ratio) + " under refinement");
  return out;
}

DualityCheck maximal_duality_check(const RealField& f, const TubeFamily& fam, double r) {
  fam.validate();
  require(r > 1, "duality check needs r > 1");
  const GridSpec& g = f.grid;
  require(fam.dim() == g.n, "family dimension differs from the grid");
  const double hn = std::pow(g.h, g.n), rp = r / (r - 1);
  Lattice L = node_lattice(g);
  Vec F = Vec::Zero(g.count());
  DualityCheck out;
  std::vector<double> avg(fam.size(), 0.0);
  for (int a = 0; a < fam.size(); ++a) {
    double s = 0;
    long long cnt = 0;
    for_each_in_tube(fam.tubes[a], L, [&](Eigen::Index i) {
      F(i) += fam.c(a);
      s += std::abs(f.values(i));
      ++cnt;
    });
    avg[a] = cnt ? s / cnt : 0.0;
    out.pairing += fam.c(a) * cnt * hn * avg[a];
  }
  double nF = 0, nf = 0;
  for (Eigen::Index i = 0; i < g.count(); ++i) {
    nF += std::pow(F(i), r);
    nf += std::pow(std::abs(f.values(i)), rp);
  }
  out.bound = std::pow(nF * hn, 1 / r) * std::pow(nf * hn, 1 / rp);
  out.holder_ok = out.pairing <= out.bound * 1.01;
  KakeyaMax M = kakeya_max(f, fam.net, g.h, fam.lambda);
  out.worst_maximal = 0;
  for (int a = 0; a < fam.size(); ++a) {
    if (avg[a] == 0) continue;
    out.worst_maximal = std::max(out.worst_maximal, M.values(a) > 0 ? avg[a] / M.values(a) : std::numeric_limits<double>::infinity());
  }
  out.maximal_ok = out.worst_maximal <= 1.01;
  return out;
}

}  // namespace lab
