#include "lab/extension_field.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "lab/fast_math.hpp"
#include "lab/nufft.hpp"

namespace lab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

void certify_bandwidth(const CapSystem& sys, double need) {
  if (!sys.has_quadrature() || sys.quadrature().bandwidth < need * (1 - 1e-12))
    throw CertificationError("uncertified quadrature: bandwidth " +
                             std::to_string(sys.has_quadrature() ? sys.quadrature().bandwidth : 0.0) +
                             " below required " + std::to_string(need));
}

std::string method_tag(bool direct, bool sampled) {
  return std::string(direct ? "direct" : "gridded") + (sampled ? "/sampled" : "/full");
}

}  // namespace

void evaluate_until_certified(int n, double radius, const EvalOptions& opts,
                              const std::function<bool(const EvaluationSet&)>& measure) {
  SamplingPolicy pol = opts.sampling;
  for (;;) {
    EvaluationSet set = choose_evaluation(n, radius, opts.h, pol);
    if (measure(set)) return;
    if (pol.samples * 4 > opts.max_samples)
      throw CertificationError("sampled norm stderr above " + std::to_string(opts.target_stderr) + " at " +
                               std::to_string(pol.samples) + " samples");
    pol.samples *= 4;
  }
}

bool stderr_ok(const NormEstimate& e, double target) {
  return !e.sampled || e.value == 0 || e.stderr <= target * e.value;
}

Eigen::Index GridSpec::count() const {
  Eigen::Index s = side(), c = 1;
  for (int d = 0; d < n; ++d) c *= s;
  return c;
}

Vec GridSpec::point(Eigen::Index i) const {
  Vec x(n);
  Eigen::Index s = side();
  for (int d = n - 1; d >= 0; --d) {
    x(d) = h * static_cast<double>(i % s - K());
    i /= s;
  }
  return x;
}

Mat GridSpec::points() const {
  check_budget(8.0 * n * count(), "grid points");
  Mat P(n, count());
  for (Eigen::Index i = 0; i < count(); ++i) P.col(i) = point(i);
  return P;
}

void GridSpec::validate() const {
  require(n == 2 || n == 3, "grid dimension must be 2 or 3");
  require(h > 0 && h <= 0.25, "grid spacing must be in (0, 1/4]");
  require(L > 0, "grid box radius must be positive");
  require(std::abs(L / h - K()) < 1e-9, "box radius must be a multiple of the spacing");
}

Density Density::make(std::shared_ptr<const CapSystem> caps, Vec c, Vec signs, Mat lambda) {
  require(caps != nullptr, "density needs a cap system");
  const int K = caps->size();
  require(c.size() == K, "one coefficient per cap required");
  require(signs.size() == K, "one sign per cap required");
  require(lambda.cols() == 0 || (lambda.cols() == K && lambda.rows() == caps->dim()),
          "modulations must be n x caps");
  for (int a = 0; a < K; ++a) {
    require(c(a) >= 0, "coefficients must be nonnegative");
    require(signs(a) == 1 || signs(a) == -1, "signs must be +-1");
  }
  Density g{std::move(caps), std::move(c), std::move(signs), std::move(lambda), CVec()};
  g.node_values = g.values_at(g.caps->quadrature());
  return g;
}

cplx Density::value(const Eigen::Ref<const Vec>& xi) const {
  thread_local std::vector<std::pair<int, double>> b;
  caps->bumps(xi, b);
  cplx v = 0;
  for (auto& [a, phi] : b) {
    if (c(a) == 0) continue;
    cplx m = 1.0;
    if (lambda.cols()) {
      double s, co;
      sincos_cycles(lambda.col(a).dot(xi), s, co);
      m = cplx(co, s);
    }
    v += amplitude(a) * m * phi;
  }
  return v;
}

CVec Density::values_at(const SphereQuadrature& q) const {
  CVec out(q.size());
  if (q.ptr.empty()) {
    for (Eigen::Index j = 0; j < q.size(); ++j) out(j) = value(q.nodes.col(j));
    return out;
  }
  for (Eigen::Index j = 0; j < q.size(); ++j) {
    cplx v = 0;
    for (int p = q.ptr[j]; p < q.ptr[j + 1]; ++p) {
      int a = q.cap[p];
      if (c(a) == 0) continue;
      cplx m = 1.0;
      if (lambda.cols()) {
        double s, co;
        sincos_cycles(lambda.col(a).dot(Vec(q.nodes.col(j))), s, co);
        m = cplx(co, s);
      }
      v += amplitude(a) * m * q.phi[p];
    }
    out(j) = v;
  }
  return out;
}

std::vector<Channel> Density::channels() const {
  std::vector<Channel> ch;
  for (int a = 0; a < caps->size(); ++a) {
    if (c(a) == 0) continue;
    ch.push_back(Channel{a, -1, amplitude(a), modulation(a)});
  }
  return ch;
}

double Density::max_modulation() const {
  double m = 0;
  for (Eigen::Index a = 0; a < lambda.cols(); ++a) m = std::max(m, lambda.col(a).norm());
  return m;
}

CVec extend_at(const CapSystem& sys, const CVec& values, const Mat& points, double extra) {
  double r = 0;
  for (Eigen::Index p = 0; p < points.cols(); ++p) r = std::max(r, points.col(p).norm());
  certify_bandwidth(sys, r + extra);
  return extend_nodes(sys.quadrature(), values, points);
}

Field extend(const CapSystem& sys, const CVec& values, const GridSpec& grid, Method method, double extra) {
  grid.validate();
  require(grid.n == sys.dim(), "grid and cap system dimensions differ");
  certify_bandwidth(sys, grid.L * std::sqrt(double(grid.n)) + extra);
  const SphereQuadrature& q = sys.quadrature();
  require(values.size() == q.size(), "node values do not match the quadrature");
  Field f{grid, CVec()};
  if (method == Method::Direct) {
    f.values = extend_nodes(q, values, grid.points());
    return f;
  }
  CVec strengths = values.cwiseProduct(q.weights.cast<cplx>());
  f.values = nufft_type1(q.nodes, strengths, grid.h, grid.K());
  // self-check against direct sums at 100 random grid points
  std::mt19937_64 gen(0xc0ffeeULL + grid.K());
  Mat pts(grid.n, 100);
  std::vector<Eigen::Index> idx(100);
  for (int i = 0; i < 100; ++i) {
    idx[i] = static_cast<Eigen::Index>(uniform01(gen) * grid.count());
    pts.col(i) = grid.point(idx[i]);
  }
  CVec ref = extend_nodes(q, values, pts);
  double scale = f.values.cwiseAbs().maxCoeff(), err = 0;
  for (int i = 0; i < 100; ++i) err = std::max(err, std::abs(ref(i) - f.values(idx[i])));
  if (err > 1e-6 * std::max(scale, 1e-300))
    throw CertificationError("gridded extension disagrees with direct sums: " + std::to_string(err / scale));
  return f;
}

Field extend(const Density& g, const GridSpec& grid, Method method) {
  return extend(*g.caps, g.node_values, grid, method, g.max_modulation());
}

RealField square_function(const Density& g, const GridSpec& grid, Method method) {
  grid.validate();
  certify_bandwidth(*g.caps, grid.L * std::sqrt(double(grid.n)) + g.max_modulation());
  RealField out{grid, Vec::Zero(grid.count())};
  if (method == Method::Direct) {
    CMat Y = evaluate_channels(*g.caps, nullptr, g.channels(), grid.points(), Backend::Global);
    out.values = Y.cwiseAbs2().rowwise().sum().cwiseSqrt();
    return out;
  }
  const SphereQuadrature& q = g.caps->quadrature();
  for (int a = 0; a < g.caps->size(); ++a) {
    if (g.c(a) == 0) continue;
    CVec v = CVec::Zero(q.size());
    for (Eigen::Index j = 0; j < q.size(); ++j)
      for (int p = q.ptr[j]; p < q.ptr[j + 1]; ++p)
        if (q.cap[p] == a) {
          cplx m = 1.0;
          if (g.lambda.cols()) {
            double s, c;
            sincos_cycles(g.lambda.col(a).dot(Vec(q.nodes.col(j))), s, c);
            m = cplx(c, s);
          }
          v(j) = g.amplitude(a) * m * q.phi[p];
        }
    Field f = extend(*g.caps, v, grid, Method::Gridded, g.max_modulation());
    out.values += f.values.cwiseAbs2();
  }
  out.values = out.values.cwiseSqrt();
  return out;
}

RealField square_function(const std::vector<Field>& parts) {
  require(!parts.empty(), "square_function: no parts");
  const GridSpec& g = parts[0].grid;
  RealField out{g, Vec::Zero(parts[0].values.size())};
  for (const Field& f : parts) {
    require(f.grid.n == g.n && f.grid.L == g.L && f.grid.h == g.h && f.values.size() == out.values.size(),
            "square_function: mismatched grids");
    out.values += f.values.cwiseAbs2();
  }
  out.values = out.values.cwiseSqrt();
  return out;
}

namespace {

NormEstimate grid_norm(const GridSpec& grid, const Vec& absval, double radius, double q, const SamplingPolicy& pol) {
  require(radius > 0 && radius <= grid.L + 1e-12, "lq_norm: ball exceeds box");
  require(q >= 1, "lq_norm: q must be >= 1");
  const int n = grid.n;
  EvaluationSet set;
  set.n = n;
  set.radius = radius;
  set.h = grid.h;
  double r2 = radius * radius * (1 + 1e-14), hn = std::pow(grid.h, n);
  std::vector<Eigen::Index> inside;
  for (Eigen::Index i = 0; i < grid.count(); ++i)
    if (grid.point(i).squaredNorm() <= r2) inside.push_back(i);
  Vec vals;
  if (pol.kind != SamplingPolicy::Stratified) {
    vals.resize(inside.size());
    for (std::size_t k = 0; k < inside.size(); ++k) vals(k) = absval(inside[k]);
    set.weights = Vec::Constant(inside.size(), hn);
    set.group.assign(inside.size(), 0);
    set.shell.assign(inside.size(), 0);
    set.shell_volume = {hn * inside.size()};
    return lq_norm(set, vals, q);
  }
  // stratified: geometric shells of grid points, uniform draws within each
  int shells = std::max(1, static_cast<int>(std::ceil(std::log2(std::max(radius, 2.0)))));
  std::vector<std::vector<Eigen::Index>> byshell(shells);
  for (Eigen::Index i : inside) {
    double r = grid.point(i).norm();
    int k = r <= radius * std::ldexp(1.0, 1 - shells)
                ? 0
                : std::min(shells - 1, static_cast<int>(std::ceil(std::log2(r / radius) + shells - 1e-12)) - 1);
    k = std::clamp(k, 0, shells - 1);
    byshell[k].push_back(i);
  }
  const int G = 16;
  int per = std::max(G, pol.samples / shells / G * G);
  std::mt19937_64 gen(derive_seed(pol.seed, 0x6e0b));
  set.sampled = true;
  set.groups = G;
  std::vector<double> v, w;
  for (int k = 0; k < shells; ++k) {
    const auto& pts = byshell[k];
    set.shell_volume.push_back(hn * pts.size());
    if (pts.empty()) continue;
    for (int i = 0; i < per; ++i) {
      Eigen::Index pick = pts[std::min<std::size_t>(pts.size() - 1, uniform01(gen) * pts.size())];
      v.push_back(absval(pick));
      w.push_back(hn * pts.size() / per);
      set.group.push_back(i % G);
      set.shell.push_back(k);
    }
  }
  set.weights = Eigen::Map<Vec>(w.data(), w.size());
  return lq_norm(set, Eigen::Map<Vec>(v.data(), v.size()), q);
}

}  // namespace

NormEstimate lq_norm(const Field& f, double radius, double q, const SamplingPolicy& policy) {
  return grid_norm(f.grid, f.values.cwiseAbs(), radius, q, policy);
}

NormEstimate lq_norm(const RealField& f, double radius, double q, const SamplingPolicy& policy) {
  return grid_norm(f.grid, f.values.cwiseAbs(), radius, q, policy);
}

std::vector<RatioReport> rlp_extension_ratios(const CapSystem& caps, const Mat& lambda,
                                              const std::vector<CapCoefficients>& dens, double delta,
                                              const EvalOptions& opts) {
  require(delta > 0 && delta < 1, "delta must be in (0,1)");
  const int n = caps.dim(), K = caps.size();
  const double q = 2.0 * n / (n - 1);
  auto t0 = std::chrono::steady_clock::now();
  std::vector<Channel> ch(K);
  for (int a = 0; a < K; ++a) ch[a] = Channel{a, -1, 1.0, lambda.cols() ? Vec(lambda.col(a)) : Vec()};
  std::vector<RatioReport> out(dens.size());
  evaluate_until_certified(n, 1.0 / delta, opts, [&](const EvaluationSet& set) {
    CMat Y = evaluate_channels(caps, nullptr, ch, set.points, opts.backend);
    Mat A = Y.cwiseAbs2();
    bool ok = true;
    for (std::size_t d = 0; d < dens.size(); ++d) {
      const Vec& c = dens[d].c;
      require(c.size() == K && dens[d].signs.size() == K, "coefficients must have one entry per cap");
      CVec a = (dens[d].signs.array() * c.array().sqrt()).matrix().cast<cplx>();
      NormEstimate lhs = lq_norm(set, (Y * a).cwiseAbs(), q);
      NormEstimate rhs = lq_norm(set, (A * c).cwiseSqrt(), q);
      ok = ok && stderr_ok(lhs, opts.target_stderr) && stderr_ok(rhs, opts.target_stderr);
      RatioReport& r = out[d];
      r.module = "extension_field";
      r.op = "rlp_extension_ratio";
      r.n = n;
      r.delta = delta;
      r.q = q;
      r.seed = opts.sampling.seed;
      r.lhs = lhs.value;
      r.rhs = rhs.value;
      r.finish();
      r.stderr = ratio_stderr(lhs, rhs);
      r.method = method_tag(true, set.sampled);
    }
    return ok;
  });
  double el = seconds_since(t0) / std::max<std::size_t>(1, dens.size());
  for (auto& r : out) r.runtime_s = el;
  return out;
}

RatioReport rlp_extension_ratio(const Density& g, double delta, const EvalOptions& opts) {
  return rlp_extension_ratios(*g.caps, g.lambda, {CapCoefficients{g.c, g.signs}}, delta, opts).front();
}

RatioReport restriction_ratio(const Density& g, double R, const EvalOptions& opts, double q) {
  require(R >= 4, "R must be at least 4");
  const int n = g.caps->dim();
  if (q <= 0) q = 2.0 * n / (n - 1);
  auto t0 = std::chrono::steady_clock::now();
  RatioReport r;
  r.module = "extension_field";
  r.op = "restriction_ratio";
  r.n = n;
  r.R = R;
  r.q = q;
  r.seed = opts.sampling.seed;
  const SphereQuadrature& sq = g.caps->quadrature();
  double gq = 0;
  for (Eigen::Index j = 0; j < sq.size(); ++j) gq += sq.weights(j) * std::pow(std::abs(g.node_values(j)), q);
  r.rhs = std::pow(std::log(R), (n - 1.0) / (2.0 * n)) * std::pow(gq, 1.0 / q);
  std::vector<Channel> ch = g.channels();
  if (ch.empty()) {
    r.lhs = 0;
    r.finish();
    return r;
  }
  evaluate_until_certified(n, R, opts, [&](const EvaluationSet& set) {
    CMat Y = evaluate_channels(*g.caps, nullptr, ch, set.points, opts.backend);
    NormEstimate lhs = lq_norm(set, Y.rowwise().sum().cwiseAbs(), q);
    r.lhs = lhs.value;
    r.stderr = lhs.value > 0 && r.rhs > 0 ? lhs.stderr / r.rhs : 0.0;
    r.method = method_tag(true, set.sampled);
    return stderr_ok(lhs, opts.target_stderr);
  });
  r.finish();
  r.runtime_s = seconds_since(t0);
  return r;
}

std::vector<NormEstimate> square_function_norms(const CapSystem& caps, const std::vector<Vec>& cs, double R,
                                                double q, const EvalOptions& opts) {
  const int n = caps.dim(), K = caps.size();
  std::vector<Channel> ch(K);
  for (int a = 0; a < K; ++a) ch[a] = Channel{a, -1, 1.0, Vec()};
  std::vector<NormEstimate> out(cs.size());
  evaluate_until_certified(n, R, opts, [&](const EvaluationSet& set) {
    Mat A = evaluate_channels(caps, nullptr, ch, set.points, opts.backend, opts.far_cutoff).cwiseAbs2();
    bool ok = true;
    for (std::size_t i = 0; i < cs.size(); ++i) {
      require(cs[i].size() == K, "coefficients must have one entry per cap");
      out[i] = lq_norm(set, (A * cs[i]).cwiseSqrt(), q);
      ok = ok && stderr_ok(out[i], opts.target_stderr);
    }
    return ok;
  });
  return out;
}

Vec at_average(const SphereQuadrature& q, const Vec& u, double t) {
  require(q.nodes.rows() == 2, "node-value cap averages need the uniform circle rule");
  require(t > 0 && t <= kPi, "t must be in (0, pi]");
  const Eigen::Index M = q.size();
  require(u.size() == M, "values do not match the quadrature");
  const double step = kTwoPi / M, off = std::atan2(q.nodes(1, 0), q.nodes(0, 0));
  // prefix integrals of the piecewise linear interpolant
  Vec pre(M + 1);
  pre(0) = 0;
  for (Eigen::Index j = 0; j < M; ++j) pre(j + 1) = pre(j) + 0.5 * step * (u(j) + u((j + 1) % M));
  const double period = pre(M);
  auto U = [&](double theta) {
    double y = (theta - off) / step;
    double k = std::floor(y), fr = y - k;
    long long kk = static_cast<long long>(k);
    long long wraps = kk >= 0 ? kk / M : -((-kk + M - 1) / M);
    Eigen::Index j = static_cast<Eigen::Index>(kk - wraps * M);
    double a = u(j), b = u((j + 1) % M);
    return wraps * period + pre(j) + step * (a * fr + 0.5 * (b - a) * fr * fr);
  };
  Vec out(M);
  for (Eigen::Index i = 0; i < M; ++i) {
    double th = off + step * i;
    out(i) = (U(th + t) - U(th - t)) / (2 * t);
  }
  return out;
}

SphereQuadrature plain_quadrature(int n, double spacing) {
  require(spacing > 0, "spacing must be positive");
  int res = n == 2 ? static_cast<int>(std::ceil(kTwoPi / spacing)) : static_cast<int>(std::ceil(kPi / spacing));
  return product_rule(n, std::max(res, 8));
}

namespace {

using ManyFn = std::function<void(const Vec&, double*)>;

ManyFn u_many(const std::function<double(const Vec&)>& u) {
  return [&u](const Vec& xi, double* out) { out[0] = u(xi); };
}

// Cap averages of `count` functions at once, polar rule about each outer node.
Mat cap_averages(const ManyFn& u, int count, const SphereQuadrature& outer, double t, double res) {
  const Eigen::Index M = outer.size();
  const double area = cap_area(3, t);
  int nt = std::max(6, static_cast<int>(std::ceil(0.6 * t / res)) + 4);
  int np = std::max(12, static_cast<int>(std::ceil(kTwoPi * std::sin(std::min(t, kPi / 2)) / res)) + 8);
  GaussRule g = gauss_legendre(nt);
  Mat out(M, count);
#pragma omp parallel
  {
    std::vector<double> val(count), acc(count);
#pragma omp for schedule(static)
    for (Eigen::Index i = 0; i < M; ++i) {
      Vec v = outer.nodes.col(i);
      Vec tref = std::abs(v(2)) < 0.9 ? Vec::Unit(3, 2) : Vec::Unit(3, 0);
      Vec e1 = (tref - tref.dot(v) * v).normalized();
      Vec e2 = cross(v, e1);
      std::fill(acc.begin(), acc.end(), 0.0);
      Vec xi(3);
      for (int a = 0; a < nt; ++a) {
        double th = 0.5 * t * (g.x(a) + 1);
        double w = 0.5 * t * g.w(a) * std::sin(th) * kTwoPi / np;
        for (int k = 0; k < np; ++k) {
          double ps = kTwoPi * k / np;
          xi = std::cos(th) * v + std::sin(th) * (std::cos(ps) * e1 + std::sin(ps) * e2);
          u(xi, val.data());
          for (int j = 0; j < count; ++j) acc[j] += w * val[j];
        }
      }
      for (int j = 0; j < count; ++j) out(i, j) = acc[j] / area;
    }
  }
  return out;
}

}  // namespace

Vec at_average(int n, const std::function<double(const Vec&)>& u, const SphereQuadrature& outer, double t,
               double res) {
  require(t > 0 && t <= kPi, "t must be in (0, pi]");
  require(res > 0, "resolution must be positive");
  if (n == 2) {
    const Eigen::Index M = outer.size();
    Vec out(M);
    const double area = cap_area(n, t);
    int m = std::max(8, static_cast<int>(std::ceil(0.6 * 2 * t / res)) + 6);
    GaussRule g = gauss_legendre(m);
#pragma omp parallel for schedule(static)
    for (Eigen::Index i = 0; i < M; ++i) {
      double th0 = std::atan2(outer.nodes(1, i), outer.nodes(0, i)), s = 0;
      Vec xi(2);
      for (int k = 0; k < m; ++k) {
        double th = th0 + t * g.x(k);
        xi << std::cos(th), std::sin(th);
        s += t * g.w(k) * u(xi);
      }
      out(i) = s / area;
    }
    return out;
  }
  Mat m = cap_averages(u_many(u), 1, outer, t, res);
  return m.col(0);
}

std::vector<RemarkValue> remark_rhs(const std::vector<Density>& gs, double R) {
  require(R >= 4, "R must be at least 4");
  if (gs.empty()) return {};
  const CapSystem& caps = *gs[0].caps;
  for (const Density& g : gs) require(g.caps.get() == &caps, "densities must share one cap system");
  const int n = caps.dim(), G = static_cast<int>(gs.size());
  const double p = double(n) / (n - 1), half_log = 0.5 * std::log(R);
  const int J = std::max(1, static_cast<int>(std::lround(0.5 * std::log2(R))));
  const double s = caps.scale();
  std::vector<Vec> cache(2 * J + 1);

  // |g|^2 for every density from one bump lookup
  ManyFn u = [&](const Vec& xi, double* out) {
    thread_local std::vector<std::pair<int, double>> b;
    caps.bumps(xi, b);
    for (int j = 0; j < G; ++j) {
      const Density& g = gs[j];
      cplx v = 0;
      for (auto& [a, phi] : b) {
        if (g.c(a) == 0) continue;
        cplx m = 1.0;
        if (g.lambda.cols()) {
          double sn, co;
          sincos_cycles(g.lambda.col(a).dot(xi), sn, co);
          m = cplx(co, sn);
        }
        v += g.amplitude(a) * m * phi;
      }
      out[j] = std::norm(v);
    }
  };
  // integral over the sphere of (A_t |g|^2)^p at t = exp(-half_log + k * half_log / (2J))
  auto level = [&](int k) -> const Vec& {
    if (cache[k].size()) return cache[k];
    double t = std::min(kPi, std::exp(-half_log + k * half_log / (2.0 * J)));
    Vec v = Vec::Zero(G);
    if (n == 2) {
      const SphereQuadrature& q = caps.quadrature();
      for (int j = 0; j < G; ++j) {
        Vec a = at_average(q, gs[j].node_values.cwiseAbs2(), t);
        for (Eigen::Index i = 0; i < q.size(); ++i) v(j) += q.weights(i) * std::pow(std::max(a(i), 0.0), p);
      }
    } else {
      // A_t|g|^2 varies on scale t, |g|^2 on scale s
      SphereQuadrature outer = plain_quadrature(3, std::max(t, s) / 4);
      Mat a = cap_averages(u, G, outer, t, s / 4);
      for (int j = 0; j < G; ++j)
        for (Eigen::Index i = 0; i < outer.size(); ++i) v(j) += outer.weights(i) * std::pow(std::max(a(i, j), 0.0), p);
    }
    return cache[k] = v;
  };
  auto trapezoid = [&](int stride) {
    int intervals = 2 * J / stride;
    double h = half_log / intervals;
    Vec acc = Vec::Zero(G);
    for (int i = 0; i <= intervals; ++i) acc += (i == 0 || i == intervals ? 0.5 : 1.0) * h * level(i * stride);
    return acc;
  };
  const double e = (n - 1.0) / (2.0 * n);
  Vec coarse = trapezoid(2), fine = trapezoid(1);
  std::vector<RemarkValue> out(G);
  for (int j = 0; j < G; ++j) {
    RemarkValue& r = out[j];
    r.levels = J + 1;
    r.value = std::pow(coarse(j), e);
    r.refined = std::pow(fine(j), e);
    r.rel_change = r.value > 0 ? std::abs(r.refined - r.value) / r.value : 0.0;
  }
  return out;
}

RemarkValue remark_rhs(const Density& g, double R) { return remark_rhs(std::vector<Density>{g}, R).front(); }

}  // namespace lab
