#include "lab/channels.hpp"

#include <algorithm>
#include <cmath>

#include "lab/fast_math.hpp"

namespace lab {

namespace {

using SpMat = Eigen::SparseMatrix<cplx, Eigen::RowMajor>;

// Node-major direct sums: Y(p, c) = sum_j W(c, j) exp(-2 pi i x_p . xi_j).
CMat direct_sums(const RowMat& nodes, const SpMat& W, const Mat& points) {
  const int n = static_cast<int>(nodes.rows());
  const Eigen::Index M = nodes.cols(), P = points.cols(), C = W.rows();
  CMat Y(P, C);
#pragma omp parallel
  {
    std::vector<double> re(M), im(M);
#pragma omp for schedule(static)
    for (Eigen::Index p = 0; p < P; ++p) {
      const double x0 = points(0, p), x1 = points(1, p), x2 = n == 3 ? points(2, p) : 0.0;
      const double* a = nodes.row(0).data();
      const double* b = nodes.row(1).data();
      const double* c = n == 3 ? nodes.row(2).data() : nullptr;
      if (n == 2) {
        for (Eigen::Index j = 0; j < M; ++j) sincos_cycles(x0 * a[j] + x1 * b[j], im[j], re[j]);
      } else {
        for (Eigen::Index j = 0; j < M; ++j) sincos_cycles(x0 * a[j] + x1 * b[j] + x2 * c[j], im[j], re[j]);
      }
      for (Eigen::Index r = 0; r < C; ++r) {
        double sr = 0, si = 0;
        for (SpMat::InnerIterator it(W, r); it; ++it) {
          const double wr = it.value().real(), wi = it.value().imag();
          const Eigen::Index j = it.index();
          // w * (cos - i sin)
          sr += wr * re[j] + wi * im[j];
          si += wi * re[j] - wr * im[j];
        }
        Y(p, r) = cplx(sr, si);
      }
    }
  }
  return Y;
}

cplx modulation(const Vec& lambda, const Eigen::Ref<const Vec>& xi) {
  if (lambda.size() == 0) return 1.0;
  double s, c;
  sincos_cycles(lambda.dot(xi), s, c);
  return {c, s};
}

CMat global_backend(const CapSystem& caps, const CapSystem* fine, const std::vector<Channel>& ch,
                    const Mat& points) {
  bool pairs = std::any_of(ch.begin(), ch.end(), [](const Channel& c) { return c.fine >= 0; });
  const CapSystem& owner = pairs ? *fine : caps;
  double f = std::max(required_bandwidth(ch, points), 1.0);
  CapSystem sys = owner.has_quadrature() && owner.quadrature().bandwidth >= f
                      ? owner
                      : quadrature_for_bandwidth(owner, f * 1.0001);
  const SphereQuadrature& q = sys.quadrature();
  const Eigen::Index M = q.size();
  const int C = static_cast<int>(ch.size());

  // channels keyed by the cap of the owning system
  std::vector<std::vector<int>> by_cap(sys.size());
  std::vector<int> free_channels;
  for (int c = 0; c < C; ++c) {
    int key = pairs ? ch[c].fine : ch[c].cap;
    if (key >= 0) by_cap.at(key).push_back(c);
    else free_channels.push_back(c);
  }
  std::vector<Eigen::Triplet<cplx>> trip;
  std::vector<std::pair<int, double>> coarse;
  std::vector<char> used(M, 0);
  for (Eigen::Index j = 0; j < M; ++j) {
    Vec xi = q.nodes.col(j);
    if (pairs) caps.bumps(xi, coarse);
    auto coarse_phi = [&](int a) {
      for (auto& e : coarse)
        if (e.first == a) return e.second;
      return 0.0;
    };
    for (int p = q.ptr[j]; p < q.ptr[j + 1]; ++p)
      for (int c : by_cap[q.cap[p]]) {
        double b = q.phi[p];
        if (pairs && ch[c].cap >= 0) b *= coarse_phi(ch[c].cap);
        if (b == 0) continue;
        trip.emplace_back(c, static_cast<int>(j), ch[c].coeff * b * q.weights(j) * modulation(ch[c].lambda, xi));
        used[j] = 1;
      }
    for (int c : free_channels) {
      double b = ch[c].cap >= 0 && pairs ? coarse_phi(ch[c].cap) : 1.0;
      if (b == 0) continue;
      trip.emplace_back(c, static_cast<int>(j), ch[c].coeff * b * q.weights(j) * modulation(ch[c].lambda, xi));
      used[j] = 1;
    }
  }
  // keep only nodes some channel touches
  std::vector<int> remap(M, -1);
  int Mu = 0;
  for (Eigen::Index j = 0; j < M; ++j)
    if (used[j]) remap[j] = Mu++;
  RowMat nodes(q.nodes.rows(), Mu);
  for (Eigen::Index j = 0; j < M; ++j)
    if (used[j]) nodes.col(remap[j]) = q.nodes.col(j);
  for (auto& t : trip) t = Eigen::Triplet<cplx>(t.row(), remap[t.col()], t.value());
  SpMat W(C, Mu);
  W.setFromTriplets(trip.begin(), trip.end());
  return direct_sums(nodes, W, points);
}

// Frame (e1, e2, v) with v the cap center.
void frame(const Vec& v, Vec& e1, Vec& e2) {
  Vec t = std::abs(v(2)) < 0.9 ? Vec::Unit(3, 2) : Vec::Unit(3, 0);
  e1 = (t - t.dot(v) * v).normalized();
  e2 = cross(v, e1);
}

int level_of(double f) {
  int l = 0;
  while (std::ldexp(1.0, l) < f) ++l;
  return l;
}

CMat local_backend(const CapSystem& caps, const CapSystem* fine, const std::vector<Channel>& ch,
                   const Mat& points, double far_cutoff) {
  require(caps.dim() == 3, "local backend is for n = 3");
  const Eigen::Index P = points.cols();
  const int C = static_cast<int>(ch.size());
  CMat Y = CMat::Zero(P, C);
  for (const Channel& c : ch) require(c.fine >= 0 || c.cap >= 0, "local backend needs a cap per channel");

#pragma omp parallel for schedule(dynamic, 1)
  for (int c = 0; c < C; ++c) {
    const Channel& chn = ch[c];
    const bool pair = chn.fine >= 0;
    const Cap& home = pair ? fine->cap(chn.fine) : caps.cap(chn.cap);
    const Vec& v = home.center;
    const double rho = home.support_radius;
    Vec e1, e2;
    frame(v, e1, e2);
    // caps that can overlap the home support, for normalizing phi
    std::vector<int> nb;
    if (chn.cap >= 0) {
      const Vec& cc = caps.cap(chn.cap).center;
      for (const Cap& o : caps.caps())
        if (geodesic_distance(o.center, cc) < o.support_radius + caps.cap(chn.cap).support_radius) nb.push_back(o.index);
    }
    std::vector<int> fnb;
    if (pair) {
      for (const Cap& o : fine->caps())
        if (geodesic_distance(o.center, v) < o.support_radius + rho) fnb.push_back(o.index);
    }
    auto weight = [&](const Vec& xi) -> double {
      double w = 1.0;
      if (chn.cap >= 0) {
        double own = caps.raw_bump(chn.cap, xi);
        if (own == 0) return 0.0;
        double tot = 0;
        for (int b : nb) tot += caps.raw_bump(b, xi);
        w *= own / tot;
      }
      if (pair) {
        double own = fine->raw_bump(chn.fine, xi);
        if (own == 0) return 0.0;
        double tot = 0;
        for (int b : fnb) tot += fine->raw_bump(b, xi);
        w *= own / tot;
      }
      return w;
    };
    // group points by resolution level
    std::vector<std::vector<Eigen::Index>> levels;
    const bool may_skip = far_cutoff > 0 && chn.lambda.size() == 0;
    for (Eigen::Index p = 0; p < P; ++p) {
      Vec x = points.col(p);
      double f = chn.lambda.size() ? (x - chn.lambda).norm() : x.norm();
      if (may_skip && f > 0) {
        // tangential phase gradient 2 pi |x| sin(angle to +-x) across a bump of width rho
        double th = std::acos(std::min(1.0, std::abs(v.dot(x)) / f)) - rho;
        if (th > 0 && kTwoPi * f * std::sin(th) * rho > far_cutoff) continue;
      }
      int l = level_of(std::max(f, 1.0));
      if (l >= static_cast<int>(levels.size())) levels.resize(l + 1);
      levels[l].push_back(p);
    }
    std::vector<double> nx, ny, nz, wr, wi, re, im;
    for (std::size_t l = 0; l < levels.size(); ++l) {
      if (levels[l].empty()) continue;
      double f = std::ldexp(1.0, static_cast<int>(l));
      int nt = static_cast<int>(std::ceil(0.75 * kPi * f * rho)) + 24;
      double A = kTwoPi * f * std::sin(rho);
      int np = static_cast<int>(std::ceil(A + 10 * std::cbrt(A))) + 48;
      GaussRule g = gauss_legendre(nt);
      nx.clear(), ny.clear(), nz.clear(), wr.clear(), wi.clear();
      for (int i = 0; i < nt; ++i) {
        double th = 0.5 * rho * (g.x(i) + 1);
        double jac = 0.5 * rho * g.w(i) * std::sin(th) * kTwoPi / np;
        for (int k = 0; k < np; ++k) {
          double ps = kTwoPi * k / np;
          Vec xi = std::cos(th) * v + std::sin(th) * (std::cos(ps) * e1 + std::sin(ps) * e2);
          double w = weight(xi);
          if (w == 0) continue;
          cplx z = chn.coeff * w * jac * modulation(chn.lambda, xi);
          nx.push_back(xi(0)), ny.push_back(xi(1)), nz.push_back(xi(2));
          wr.push_back(z.real()), wi.push_back(z.imag());
        }
      }
      const std::size_t M = nx.size();
      re.resize(M), im.resize(M);
      for (Eigen::Index p : levels[l]) {
        const double x0 = points(0, p), x1 = points(1, p), x2 = points(2, p);
        for (std::size_t j = 0; j < M; ++j) sincos_cycles(x0 * nx[j] + x1 * ny[j] + x2 * nz[j], im[j], re[j]);
        double sr = 0, si = 0;
        for (std::size_t j = 0; j < M; ++j) {
          sr += wr[j] * re[j] + wi[j] * im[j];
          si += wi[j] * re[j] - wr[j] * im[j];
        }
        Y(p, c) = cplx(sr, si);
      }
    }
  }
  return Y;
}

}  // namespace

double required_bandwidth(const std::vector<Channel>& ch, const Mat& points) {
  double f = 0;
  Vec zero;
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    double r = points.col(p).norm();
    for (const Channel& c : ch) f = std::max(f, c.lambda.size() ? (points.col(p) - c.lambda).norm() : r);
  }
  return f;
}

CMat evaluate_channels(const CapSystem& caps, const CapSystem* fine, const std::vector<Channel>& ch,
                       const Mat& points, Backend backend, double far_cutoff) {
  require(points.rows() == caps.dim(), "points have the wrong dimension");
  for (const Channel& c : ch) {
    require(c.fine < 0 || fine != nullptr, "channel names a fine cap but no fine system given");
    require(c.lambda.size() == 0 || c.lambda.size() == caps.dim(), "modulation has the wrong dimension");
  }
  if (ch.empty() || points.cols() == 0) return CMat::Zero(points.cols(), ch.size());
  if (backend == Backend::Auto) {
    backend = Backend::Global;
    if (caps.dim() == 3) {
      double f = required_bandwidth(ch, points);
      double m = 8 * kPi * f;
      if (2 * m * m > 2e6) backend = Backend::Local;
    }
  }
  check_budget(16.0 * points.cols() * ch.size(), "channel matrix");
  return backend == Backend::Global ? global_backend(caps, fine, ch, points) : local_backend(caps, fine, ch, points, far_cutoff);
}

CVec extend_nodes(const SphereQuadrature& q, const CVec& values, const Mat& points) {
  require(values.size() == q.size(), "node values do not match the quadrature");
  std::vector<Eigen::Triplet<cplx>> t;
  for (Eigen::Index j = 0; j < q.size(); ++j)
    if (values(j) != 0.0) t.emplace_back(0, static_cast<int>(j), values(j) * q.weights(j));
  SpMat W(1, q.size());
  W.setFromTriplets(t.begin(), t.end());
  return direct_sums(q.nodes, W, points).col(0);
}

}  // namespace lab
