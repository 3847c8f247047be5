#include "lab/two_scale_chain.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <random>

namespace lab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Grid over the central `fraction` of a tube, in tube coordinates.
Mat tube_grid(const Tube& t, double fraction, int along, int across) {
  const int n = static_cast<int>(t.frame.rows());
  const int side = n == 2 ? across : across * across;
  Mat pts(n, along * side);
  auto coord = [&](int i, int count, double len) {
    return count == 1 ? 0.0 : fraction * len * (double(i) / (count - 1) - 0.5);
  };
  Eigen::Index k = 0;
  for (int i = 0; i < along; ++i)
    for (int j = 0; j < side; ++j) {
      Vec x = t.center + coord(i, along, t.length) * t.frame.col(0);
      x += coord(j % across, across, t.width) * t.frame.col(1);
      if (n == 3) x += coord(j / across, across, t.width) * t.frame.col(2);
      pts.col(k++) = x;
    }
  return pts;
}

// Sample points covering one fine cap: the center first, then rings.
std::vector<Vec> cap_probe(const Cap& cap) {
  const Vec& c = cap.center;
  std::vector<Vec> out{c};
  const double r = cap.cell_radius;
  if (c.size() == 2) {
    double th = std::atan2(c(1), c(0));
    for (int i = 1; i <= 4; ++i)
      for (int s : {-1, 1}) {
        double t = th + s * r * i / 4;
        Vec v(2);
        v << std::cos(t), std::sin(t);
        out.push_back(v);
      }
    return out;
  }
  Vec t = std::abs(c(2)) < 0.9 ? Vec::Unit(3, 2) : Vec::Unit(3, 0);
  Vec e1 = (t - t.dot(c) * c).normalized();
  Vec e2 = cross(c, e1);
  for (double rho : {0.5 * r, r})
    for (int k = 0; k < 8; ++k) {
      double phi = kTwoPi * k / 8;
      out.push_back(std::cos(rho) * c + std::sin(rho) * (std::cos(phi) * e1 + std::sin(phi) * e2));
    }
  return out;
}

}  // namespace

SignVector rademacher(int K, std::uint64_t seed) {
  SignVector s;
  s.seed = seed;
  s.eps.resize(K);
  for (int a = 0; a < K; ++a) s.eps(a) = (derive_seed(seed, a, 0x5167) >> 63) ? 1.0 : -1.0;
  return s;
}

CapSystem net_caps(const DirectionNet& net) {
  const int K = net.size();
  if (net.n == 2) {
    // net direction k sits at pi k / K, which is arc k of 2K equal arcs
    return caps_from_arcs(2 * K, 0, 1.0 / net.N);
  }
  ZonalCells z = zonal_cells(std::sqrt(kPi) / net.N, true);
  require(z.centers.cols() == K, "net does not match its hemisphere cells");
  Mat C(3, 2 * K);
  C << z.centers, -z.centers;
  Vec r(2 * K);
  r << z.radii, z.radii;
  return caps_from_cells(3, std::sqrt(kPi) / net.N, C, r);
}

CapSystem chain_fine_caps(const CapSystem& coarse, double delta) {
  return refine(coarse, coarse.scale() * std::sqrt(delta));
}

Density build_test_density(const TubeFamily& fam, const SignVector& signs, std::shared_ptr<const CapSystem> caps,
                           double delta) {
  require(delta > 0 && delta < 1, "delta must be in (0,1)");
  require(caps != nullptr, "test density needs a cap system");
  const int n = fam.dim(), A = fam.size(), K = caps->size();
  const double s = std::pow(delta, -0.5);
  require(std::abs(fam.lambda - s) <= 1e-9 * s && std::abs(fam.N - s) <= 1e-9 * s,
          "family must have lambda = N = delta^{-1/2}");
  require(caps->dim() == n && K >= A, "cap system does not match the family");
  require(signs.eps.size() == K, "one sign per cap required");
  Vec c = Vec::Zero(K);
  Mat lambda = Mat::Zero(n, K);
  for (int a = 0; a < A; ++a) {
    if ((caps->cap(a).center - fam.net.directions.col(a)).norm() > 1e-9)
      throw DomainError("cap " + std::to_string(a) + " is not centred on its tube direction");
    require(fam.tubes[a].center.norm() <= 2 / delta, "tube center beyond 2/delta");
    c(a) = fam.c(a);
    lambda.col(a) = fam.tubes[a].center;
  }
  return Density::make(std::move(caps), c, signs.eps, lambda);
}

double ft_lower_bound(const CapSystem& caps, int a, const Vec& lambda, double delta, double fraction, int along,
                      int across) {
  require(fraction > 0 && fraction <= 1, "fraction must be in (0,1]");
  const int n = caps.dim();
  const double w = std::pow(delta, -0.5);
  Tube t = Tube::make(caps.cap(a).center, lambda, w, 1 / delta);
  Mat pts = tube_grid(t, fraction, along, across);
  CMat Y = evaluate_channels(caps, nullptr, {Channel{a, -1, 1.0, lambda}}, pts);
  return Y.cwiseAbs().minCoeff() / std::pow(delta, (n - 1) / 2.0);
}

FtBound ft_lower_bound(const Density& g, double delta, double fraction) {
  const CapSystem& caps = *g.caps;
  const int K = caps.size();
  FtBound out;
  out.per_cap = Vec::Constant(K, kNaN);
  out.c_ft = std::numeric_limits<double>::infinity();
  // one upgrade covers every tube: |x - lambda| <= length/2 + width
  double need = 0.5 / delta + std::sqrt(caps.dim()) * std::pow(delta, -0.5);
  CapSystem sys = caps.has_quadrature() && caps.quadrature().bandwidth >= need
                      ? caps
                      : quadrature_for_bandwidth(caps, need);
  for (int a = 0; a < K; ++a) {
    if (g.c(a) == 0) continue;
    Vec lam = g.lambda.cols() ? Vec(g.lambda.col(a)) : Vec::Zero(caps.dim());
    out.per_cap(a) = ft_lower_bound(sys, a, lam, delta, fraction);
    if (out.per_cap(a) < out.c_ft) out.c_ft = out.per_cap(a), out.worst_cap = a;
  }
  if (out.worst_cap < 0) out.c_ft = 0;
  return out;
}

Refinement refine_density(const Density& g, const CapSystem& fine) {
  require(fine.has_parent(), "fine system needs a parent map");
  require(fine.parent_system().size() == g.caps->size(), "fine system was not refined from the density's caps");
  const int B = fine.size();
  const auto& parent = fine.parent_map();
  Refinement r;
  r.a = CVec::Zero(B);
  r.amplitude = CVec::Zero(B);
  r.included.assign(B, 0);
  double lo = std::numeric_limits<double>::infinity(), hi = 0;
  double ilo = lo, ihi = 0;
  for (int b = 0; b < B; ++b) {
    const int al = parent[b];
    if (g.c(al) == 0) {
      ++r.excluded;
      continue;
    }
    std::vector<Vec> probe = cap_probe(fine.cap(b));
    cplx g0 = g.value(probe[0]);
    r.included[b] = 1;
    r.amplitude(b) = g0;
    r.a(b) = g0 / std::sqrt(g.c(al));
    double m = std::abs(r.a(b));
    lo = std::min(lo, m);
    hi = std::max(hi, m);
    if (g.caps->bump(al, probe[0]) >= 0.99) ilo = std::min(ilo, m), ihi = std::max(ihi, m);
    if (std::abs(g0) > 0)
      for (std::size_t i = 1; i < probe.size(); ++i)
        r.max_oscillation = std::max(r.max_oscillation, std::abs(g.value(probe[i]) - g0) / std::abs(g0));
  }
  if (hi > 0 || lo < std::numeric_limits<double>::infinity()) r.min_abs = lo, r.max_abs = hi;
  if (ihi > 0 || ilo < std::numeric_limits<double>::infinity()) r.interior_min = ilo, r.interior_max = ihi;
  return r;
}

MainTerm rbeta_main_term(const CapSystem& fine, int b, double delta, const EvalOptions& opts, double fraction) {
  const int n = fine.dim();
  const double q = 2.0 * n / (n - 1), R = 1 / (delta * delta), norm = std::pow(delta, n - 1);
  CapSystem sys = fine.has_quadrature() && fine.quadrature().bandwidth >= R * 1.0001
                      ? fine
                      : quadrature_for_bandwidth(fine, R * 1.0001);
  const Vec& w = sys.cap(b).center;
  Tube t = Tube::make(w, Vec::Zero(n), 1 / delta, R);
  std::vector<Channel> ch{Channel{b, -1, 1.0, Vec()}};
  MainTerm m;
  Mat mid = tube_grid(t, fraction, 17, 5);
  m.c_lo = evaluate_channels(sys, nullptr, ch, mid, opts.backend).cwiseAbs().minCoeff() / norm;
  m.at_origin = std::abs(evaluate_channels(sys, nullptr, ch, Mat::Zero(n, 1), opts.backend)(0, 0)) / norm;
  Tube wide = Tube::make(w, Vec::Zero(n), 4 / delta, 4 * R);
  evaluate_until_certified(n, R, opts, [&](const EvaluationSet& set) {
    Vec F = evaluate_channels(sys, nullptr, ch, set.points, opts.backend).col(0).cwiseAbs();
    double in = 0, all = 0;
    for (Eigen::Index p = 0; p < F.size(); ++p) {
      double v = set.weights(p) * std::pow(F(p), q);
      all += v;
      if (!wide.contains(set.points.col(p))) in += v;
    }
    m.leak = all > 0 ? in / all : 0.0;
    m.method = set.sampled ? "direct/sampled" : "direct/full";
    return stderr_ok(lq_norm(set, F, q), opts.target_stderr);
  });
  return m;
}

KhintchineResult khintchine_average(const CapSystem& caps, const Mat& lambda, const Vec& c, double delta,
                                    const std::vector<SignVector>& signs, const EvalOptions& opts,
                                    std::uint64_t bootstrap_seed, int bootstrap) {
  const int M = static_cast<int>(signs.size());
  if (M < 8) throw DomainError("Khintchine average needs at least 8 sign draws");
  std::vector<CapCoefficients> dens;
  for (const SignVector& s : signs) dens.push_back(CapCoefficients{c, s.eps});
  std::vector<RatioReport> rep = rlp_extension_ratios(caps, lambda, dens, delta, opts);
  KhintchineResult k;
  k.draws = M;
  k.norms.resize(M);
  k.ratios.resize(M);
  k.square_function = rep[0].rhs;
  k.method = rep[0].method;
  for (int d = 0; d < M; ++d) {
    k.norms(d) = rep[d].lhs;
    k.ratios(d) = k.square_function > 0 ? rep[d].lhs / k.square_function : kNaN;
  }
  k.mean_norm = k.norms.mean();
  if (!(k.square_function > 0)) {
    k.mean_ratio = k.ci_lo = k.ci_hi = k.min_ratio = k.max_ratio = kNaN;
    return k;
  }
  k.mean_ratio = k.mean_norm / k.square_function;
  k.min_ratio = k.ratios.minCoeff();
  k.max_ratio = k.ratios.maxCoeff();
  std::mt19937_64 gen(derive_seed(bootstrap_seed, 0xb007));
  std::vector<double> means(bootstrap);
  for (int i = 0; i < bootstrap; ++i) {
    double s = 0;
    for (int d = 0; d < M; ++d) s += k.ratios(std::min(M - 1, static_cast<int>(uniform01(gen) * M)));
    means[i] = s / M;
  }
  std::sort(means.begin(), means.end());
  k.ci_lo = means[static_cast<std::size_t>(std::floor(0.025 * (bootstrap - 1)))];
  k.ci_hi = means[static_cast<std::size_t>(std::ceil(0.975 * (bootstrap - 1)))];
  return k;
}

KhintchineResult khintchine_average(const CapSystem& caps, const Mat& lambda, const Vec& c, double delta, int M,
                                    std::uint64_t seed, const EvalOptions& opts) {
  if (M < 8) throw DomainError("Khintchine average needs at least 8 sign draws");
  std::vector<SignVector> s;
  for (int d = 0; d < M; ++d) s.push_back(rademacher(caps.size(), derive_seed(seed, 0x5160, d)));
  return khintchine_average(caps, lambda, c, delta, s, opts, seed);
}

CountingIdentity counting_identity(int n, const Vec& c, const std::vector<int>& parent, double delta) {
  require(n >= 2, "dimension must be at least 2");
  const double r = n / (n - 1.0);
  CountingIdentity out;
  std::vector<int> kids(c.size(), 0);
  for (int p : parent) {
    require(p >= 0 && p < c.size(), "parent index out of range");
    ++kids[p];
    out.lhs += std::pow(c(p), r);
  }
  out.min_children = c.size() ? *std::min_element(kids.begin(), kids.end()) : 0;
  out.max_children = c.size() ? *std::max_element(kids.begin(), kids.end()) : 0;
  double s = 0;
  for (Eigen::Index a = 0; a < c.size(); ++a) s += std::pow(c(a), r);
  out.rhs = std::pow(delta, -(n - 1) / 2.0) * s;
  out.residual = out.rhs > 0 ? std::abs(out.lhs / out.rhs - 1) : (out.lhs > 0 ? kNaN : 0.0);
  return out;
}

ExponentAudit exponent_audit(int n) {
  require(n >= 2, "dimension must be at least 2");
  ExponentAudit e;
  e.n = n;
  const long long m = n;
  e.main_terms = Rational(m - 1);
  e.counting = Rational(-(m - 1) * (m - 1), 2 * m);
  e.bush = Rational(-(m + 1) * (m - 1), m);
  e.total = e.main_terms + e.counting + e.bush;
  e.target = Rational(-(m + 1) * (m - 1), 2 * m);
  e.ok = e.total == e.target;
  return e;
}

double TwoScaleTrace::constant_product() const {
  double p = 1;
  for (const StepRecord& s : steps) p *= s.constant;
  return p;
}

double TwoScaleTrace::recompute_bound() const {
  return constant_product() * log_factor * delta_power * coefficient_norm;
}

TwoScaleTrace run_chain(const TubeFamily& fam, double delta, const ChainOptions& opts) {
  auto t0 = std::chrono::steady_clock::now();
  auto lap = t0;
  const int n = fam.dim();
  const double r = n / (n - 1.0), q = 2 * r;
  require((fam.c.array() >= 0).all(), "tube coefficients must be nonnegative");
  require(fam.bounding_radius() <= 1 / delta * (1 + 1e-12), "family must lie in B(0, 1/delta)");
  if (opts.draws < 8) throw DomainError("Khintchine average needs at least 8 sign draws");

  TwoScaleTrace tr;
  tr.n = n;
  tr.delta = delta;
  tr.seed = opts.seed;
  tr.tubes = fam.size();
  tr.draws = opts.draws;
  auto tick = [&](const std::string& name) {
    tr.timing.emplace_back(name, seconds_since(lap));
    lap = std::chrono::steady_clock::now();
  };

  const double R2 = 1 / (delta * delta);
  double reach = R2 + 2 / delta;
  auto caps = std::make_shared<const CapSystem>(quadrature_for_bandwidth(net_caps(fam.net), 2.0001 / delta));
  const CapSystem big = quadrature_for_bandwidth(*caps, reach);
  CapSystem fine = chain_fine_caps(*caps, delta);
  fine = quadrature_for_bandwidth(fine, R2 * 1.0001);
  const int K = caps->size(), B = fine.size();
  tr.caps = K;
  tr.fine_caps = B;
  const auto& parent = fine.parent_map();

  std::vector<SignVector> signs;
  for (int d = 0; d < opts.draws; ++d) signs.push_back(rademacher(K, derive_seed(opts.seed, 0x5160, d)));
  std::vector<Density> g;
  for (const SignVector& s : signs) g.push_back(build_test_density(fam, s, caps, delta));
  const Vec& c = g[0].c;
  tick("build_test_density");

  FtBound ft = ft_lower_bound(g[0], delta);
  tr.c_ft = ft.c_ft;
  tr.ft_worst_cap = ft.worst_cap;
  tick("ft_lower_bound");

  std::vector<Refinement> ref;
  for (const Density& gd : g) ref.push_back(refine_density(gd, fine));
  tr.a_min = ref[0].min_abs;
  tr.a_interior_min = ref[0].interior_min;
  tr.a_interior_max = ref[0].interior_max;
  tr.a_oscillation = ref[0].max_oscillation;
  tr.a_excluded = ref[0].excluded;
  tr.a_max = 0;
  for (const Refinement& x : ref) tr.a_max = std::max(tr.a_max, x.max_abs);
  tick("refine_density");

  // d_beta = c_{alpha(beta)}
  Vec d(B);
  for (int b = 0; b < B; ++b) d(b) = c(parent[b]);

  // everything over B(0, delta^{-2}) on one evaluation set
  std::vector<Channel> cch, fch;
  std::vector<int> active;
  for (int a = 0; a < K; ++a)
    if (c(a) > 0) active.push_back(a), cch.push_back(Channel{a, -1, 1.0, Vec(g[0].lambda.col(a))});
  std::vector<int> factive;
  for (int b = 0; b < B; ++b)
    if (d(b) > 0) factive.push_back(b), fch.push_back(Channel{b, -1, 1.0, Vec()});
  const int D = opts.draws;
  Vec N2(D), G2(D), S2(D);
  double D2 = 0;
  std::string big_method;
  evaluate_until_certified(n, R2, opts.eval, [&](const EvaluationSet& set) {
    CMat Yc = evaluate_channels(big, nullptr, cch, set.points, opts.eval.backend);
    CMat Yf = evaluate_channels(fine, nullptr, fch, set.points, opts.eval.backend);
    Mat Af = Yf.cwiseAbs2();
    bool ok = true;
    auto take = [&](const Vec& v) {
      NormEstimate e = lq_norm(set, v, q);
      ok = ok && stderr_ok(e, opts.eval.target_stderr);
      return e.value;
    };
    Vec df(fch.size());
    for (std::size_t j = 0; j < fch.size(); ++j) df(j) = d(factive[j]);
    D2 = take((Af * df).cwiseSqrt());
    for (int k = 0; k < D; ++k) {
      CVec ac(cch.size());
      for (std::size_t j = 0; j < cch.size(); ++j) ac(j) = g[k].amplitude(active[j]);
      CVec af(fch.size());
      Vec af2(fch.size());
      for (std::size_t j = 0; j < fch.size(); ++j) {
        af(j) = ref[k].amplitude(factive[j]);
        af2(j) = std::norm(af(j));
      }
      N2(k) = take((Yc * ac).cwiseAbs());
      G2(k) = take((Yf * af).cwiseAbs());
      S2(k) = take((Af * af2).cwiseSqrt());
    }
    big_method = set.sampled ? "direct/sampled" : "direct/full";
    return ok;
  });
  Vec cm = (G2.array() / S2.array()).matrix();
  tr.c_main = G2.mean() / S2.mean();
  tr.c_main_min = cm.minCoeff();
  tr.c_main_max = cm.maxCoeff();
  tr.c_approx = N2.mean() / G2.mean();
  tr.certificates.push_back("B(0,delta^-2): " + big_method);
  tick("mainlocal_ratio");

  tr.c_lo = std::numeric_limits<double>::infinity();
  const int checked = std::min<int>(opts.rbeta_checked, static_cast<int>(factive.size()));
  for (int i = 0; i < checked; ++i) {
    int b = factive[static_cast<std::size_t>(i) * factive.size() / checked];
    MainTerm m = rbeta_main_term(fine, b, delta, opts.eval);
    tr.c_lo = std::min(tr.c_lo, m.c_lo);
    tr.leak = std::max(tr.leak, m.leak);
    if (i == 0) tr.certificates.push_back("R_beta leak: " + m.method);
  }
  tr.rbeta_checked = checked;
  if (checked == 0) tr.c_lo = 0;
  tick("rbeta_main_term");

  Mat lam = g[0].lambda;
  KhintchineResult kh = khintchine_average(*caps, lam, c, delta, signs, opts.eval, opts.seed);
  tr.khin_mean = kh.mean_ratio;
  tr.khin_lo = kh.ci_lo;
  tr.khin_hi = kh.ci_hi;
  tr.khin_min = kh.min_ratio;
  tr.khin_max = kh.max_ratio;
  tr.certificates.push_back("B(0,1/delta): " + kh.method);
  const double S1 = kh.square_function, N1 = kh.mean_norm;
  tick("khintchine_average");

  // R_beta bush: one tube per active fine cap through the origin
  DirectionNet rnet;
  rnet.n = n;
  rnet.N = 1 / delta;
  rnet.directions.resize(n, factive.size());
  Vec rc(factive.size());
  for (std::size_t j = 0; j < factive.size(); ++j) {
    rnet.directions.col(j) = fine.cap(factive[j]).center;
    rc(j) = d(factive[j]);
  }
  const double lg = std::pow(std::log(1 / delta), (n - 1.0) / n);
  const double Nb = 1 / delta;
  const double sum_d = std::pow(coefficient_sum(d, r), 1 / r);
  const double bush_rhs = lg * std::pow(Nb, (n - 1.0) / n) * std::pow(Nb, n - 1.0) * sum_d;
  double Rb = 0, c_bush = 0;
  if (!factive.empty()) {
    TubeFamily rfam = make_family(rnet, Mat::Zero(n, factive.size()), rc, 1 / delta, 1 / delta);
    RatioReport bb = bush_bound_check(rfam, opts.tubes);
    Rb = bb.lhs;
    c_bush = bush_rhs > 0 ? Rb / bush_rhs : 0.0;
    tr.certificates.push_back("R_beta dual norm: " + bb.method);
  }
  tr.c_bush = c_bush;
  tick("bush_bound_check");

  CountingIdentity ci = counting_identity(n, c, parent, delta);
  tr.counting_residual = ci.residual;
  tr.counting_kappa = ci.rhs > 0 ? ci.lhs / ci.rhs : 1.0;
  tick("counting_identity");

  // direct side and the half-size family the stationary-phase bound sees
  DualNorm q0 = dual_norm(fam, r, opts.tubes);
  Mat centers(n, fam.size());
  for (int a = 0; a < fam.size(); ++a) centers.col(a) = fam.tubes[a].center;
  TubeFamily half = make_family(fam.net, centers, fam.c, fam.lambda / 2, fam.N);
  DualNorm q1 = dual_norm(half, r, opts.tubes);
  tr.direct_lhs = q0.value;
  tr.certificates.push_back("tube dual norm: " + q0.method);
  tick("dual_norm");

  // step records; each holds lhs <= constant * rhs
  auto ratio = [](double a, double b) { return b > 0 ? a / b : (a > 0 ? kNaN : 1.0); };
  const double dn1 = std::pow(delta, n - 1.0);
  tr.shrink = ratio(q0.value, q1.value);
  tr.enlarge = std::max(1.0, ratio(N1, N2.mean()));
  const double khin_c = ratio(S1, N1);
  tr.c_repl = std::sqrt(ratio(D2 * D2, dn1 * dn1 * Rb));
  const double count_c = std::pow(tr.counting_kappa, 1 / r);
  const double sum_c = std::pow(coefficient_sum(c, r), 1 / r);
  tr.log_factor = lg;
  tr.coefficient_norm = sum_c;
  ExponentAudit ex = exponent_audit(n);
  tr.delta_power = std::pow(delta, ex.main_terms.value()) * std::pow(delta, ex.counting.value()) *
                   std::pow(delta, ex.bush.value());

  const double ftc = tr.c_ft > 0 ? 1 / (tr.c_ft * tr.c_ft) : kNaN;
  auto sq = [](double x) { return x * x; };
  tr.steps = {
      {"shrink_to_middle_half", q0.value, q1.value, tr.shrink},
      {"stationary_phase", q1.value, sq(S1) / dn1, ftc},
      // squared from here on: S1^2 <= (...)^2 D2^2
      {"khintchine", sq(S1), sq(N1), sq(khin_c)},
      {"enlarge_ball", sq(N1), sq(N2.mean()), sq(tr.enlarge)},
      {"refined_density", sq(N2.mean()), sq(G2.mean()), sq(tr.c_approx)},
      {"mainlocal_at_delta_squared", sq(G2.mean()), sq(S2.mean()), sq(tr.c_main), true},
      {"coefficient_bound", sq(S2.mean()), sq(D2), sq(tr.a_max)},
      {"rbeta_replacement", sq(D2), sq(dn1) * Rb, sq(tr.c_repl)},
      {"bush", Rb, bush_rhs, c_bush},
      {"counting_identity", sum_d, std::pow(delta, ex.counting.value()) * sum_c, count_c},
  };
  tr.assembled_bound = tr.recompute_bound();
  tr.runtime_s = seconds_since(t0);
  return tr;
}

}  // namespace lab
