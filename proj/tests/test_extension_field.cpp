#include <cmath>
#include <random>

#include "doctest.h"
#include "lab/extension_field.hpp"
#include "lab/nufft.hpp"
#include "oracles/bessel.hpp"

using namespace lab;

namespace {

std::shared_ptr<const CapSystem> caps2(double s, double f) {
  return std::make_shared<const CapSystem>(quadrature_for_bandwidth(cap_decompose(2, s), f));
}

Density constant_one(std::shared_ptr<const CapSystem> caps) {
  int K = caps->size();
  return Density::make(caps, Vec::Ones(K), Vec::Ones(K));
}

Density random_density(std::shared_ptr<const CapSystem> caps, std::uint64_t seed, bool modulate = false,
                       double lam = 0) {
  std::mt19937_64 g(seed);
  int K = caps->size(), n = caps->dim();
  Vec c(K), s(K);
  Mat L = modulate ? Mat(n, K) : Mat();
  for (int a = 0; a < K; ++a) {
    c(a) = 1.0 - uniform01(g);
    s(a) = uniform01(g) < 0.5 ? -1 : 1;
    if (modulate)
      for (int d = 0; d < n; ++d) L(d, a) = lam * (2 * uniform01(g) - 1) / std::sqrt(double(n));
  }
  return Density::make(caps, c, s, L);
}

}  // namespace

TEST_CASE("nufft matches direct sums") {
  std::mt19937_64 g(5);
  for (int n : {2, 3}) {
    int M = 50, K = n == 2 ? 20 : 6;
    RowMat nodes(n, M);
    CVec c(M);
    for (int j = 0; j < M; ++j) {
      Vec v = unit_from_uniforms(n, uniform01(g), uniform01(g));
      nodes.col(j) = v;
      c(j) = cplx(uniform01(g) - 0.5, uniform01(g) - 0.5);
    }
    double h = 0.25;
    CVec F = nufft_type1(nodes, c, h, K);
    Eigen::Index side = 2 * K + 1;
    double err = 0;
    for (Eigen::Index i = 0; i < F.size(); i += 7) {
      Vec x(n);
      Eigen::Index r = i;
      for (int d = n - 1; d >= 0; --d) {
        x(d) = h * double(r % side - K);
        r /= side;
      }
      cplx ref = 0;
      for (int j = 0; j < M; ++j) ref += c(j) * std::exp(cplx(0, -kTwoPi * x.dot(Vec(nodes.col(j)))));
      err = std::max(err, std::abs(ref - F(i)));
    }
    CHECK(err < 1e-10);
  }
}

TEST_CASE("extend g = 1 against the Bessel oracle") {
  auto caps = caps2(0.25, 92);
  Density g = constant_one(caps);
  Mat pts(2, 3);
  pts << 0, 1, 64, 0, 0, 0;
  CVec v = extend_at(*caps, g.node_values, pts);
  CHECK(std::abs(v(0) - kTwoPi) < 1e-12);
  for (int i = 1; i < 3; ++i) CHECK(std::abs(v(i) - kTwoPi * oracle::bessel_j0(kTwoPi * pts(0, i))) < 1e-9);
  Mat p10(2, 1);
  p10 << 6, 8;
  CHECK(std::abs(extend_at(*caps, g.node_values, p10)(0) - kTwoPi * oracle::bessel_j0(kTwoPi * 10)) < 1e-9);

  GridSpec grid{2, 64, 0.25};
  Field f = extend(g, grid, Method::Gridded);
  Eigen::Index center = grid.count() / 2;
  CHECK(std::abs(f.values(center) - kTwoPi) < 1e-6);
  // (16, 0) on the grid
  Eigen::Index i = (grid.K() + 64) * grid.side() + grid.K();
  CHECK(grid.point(i)(0) == doctest::Approx(16.0));
  CHECK(std::abs(f.values(i) - kTwoPi * oracle::bessel_j0(kTwoPi * 16)) < 1e-6);
}

TEST_CASE("extend needs a certified quadrature") {
  auto caps = caps2(0.25, 8);
  Density g = constant_one(caps);
  CHECK_THROWS_AS(extend(g, GridSpec{2, 16, 0.25}, Method::Direct), CertificationError);
}

TEST_CASE("single modulated cap at its tube center") {
  auto caps = caps2(0.25, 40);
  int K = caps->size();
  Vec c = Vec::Zero(K), s = Vec::Ones(K);
  c(3) = 1;
  Mat L = Mat::Zero(2, K);
  L.col(3) << 7.5, -3.25;
  Density g = Density::make(caps, c, s, L);
  double mass = 0;
  const SphereQuadrature& q = caps->quadrature();
  for (Eigen::Index j = 0; j < q.size(); ++j)
    for (int p = q.ptr[j]; p < q.ptr[j + 1]; ++p)
      if (q.cap[p] == 3) mass += q.weights(j) * q.phi[p];
  Mat x = L.col(3);
  CVec v = extend_at(*caps, g.node_values, x, g.max_modulation());
  CHECK(std::abs(v(0) - mass) < 1e-12);
}

TEST_CASE("mass bound and conjugate symmetry") {
  auto caps = caps2(0.2, 30);
  Density g = random_density(caps, 9);
  GridSpec grid{2, 16, 0.25};
  Field f = extend(g, grid, Method::Direct);
  double mass = (caps->quadrature().weights.array() * g.node_values.cwiseAbs().array()).sum();
  CHECK(f.values.cwiseAbs().maxCoeff() <= mass * (1 + 1e-9));
  // real density: F(-x) = conj F(x)
  double err = 0;
  for (Eigen::Index i = 0; i < grid.count(); ++i) err = std::max(err, std::abs(f.values(i) - std::conj(f.values(grid.count() - 1 - i))));
  CHECK(err < 1e-10);
  Field fg = extend(g, grid, Method::Gridded);
  CHECK((fg.values - f.values).cwiseAbs().maxCoeff() < 1e-6 * f.values.cwiseAbs().maxCoeff());
}

TEST_CASE("square function basics") {
  auto caps = caps2(0.25, 30);
  int K = caps->size();
  GridSpec grid{2, 8, 0.25};
  Vec c = Vec::Zero(K), s = Vec::Ones(K);
  c(2) = 2.0;
  Density one = Density::make(caps, c, s);
  RealField S = square_function(one, grid, Method::Direct);
  Field F = extend(one, grid, Method::Direct);
  CHECK((S.values - F.values.cwiseAbs()).cwiseAbs().maxCoeff() < 1e-12);
  RealField Sg = square_function(one, grid, Method::Gridded);
  CHECK((Sg.values - S.values).cwiseAbs().maxCoeff() < 1e-6 * S.values.maxCoeff());

  Density zero = Density::make(caps, Vec::Zero(K), s);
  CHECK(square_function(zero, grid, Method::Direct).values.cwiseAbs().maxCoeff() == 0.0);

  // caps 0 and K/2 are antipodal when K is even
  REQUIRE(K % 2 == 0);
  Vec c2 = Vec::Zero(K);
  c2(0) = c2(K / 2) = 1.0;
  RealField S2 = square_function(Density::make(caps, c2, s), grid, Method::Direct);
  double err = 0;
  for (Eigen::Index i = 0; i < grid.count(); ++i) err = std::max(err, std::abs(S2.values(i) - S2.values(grid.count() - 1 - i)));
  CHECK(err < 1e-10);
}

TEST_CASE("L2 square-function domination") {
  auto caps = caps2(0.25, 30);
  Density g = random_density(caps, 21);
  GridSpec grid{2, 16, 0.25};
  double lhs = lq_norm(extend(g, grid, Method::Direct), 16, 2).value;
  double rhs = lq_norm(square_function(g, grid, Method::Direct), 16, 2).value;
  int overlap = 0;
  const SphereQuadrature& q = caps->quadrature();
  for (Eigen::Index j = 0; j < q.size(); ++j) overlap = std::max(overlap, q.ptr[j + 1] - q.ptr[j]);
  CHECK(lhs <= rhs * std::sqrt(double(overlap)));
}

TEST_CASE("lq_norm on fields") {
  GridSpec grid{2, 16, 0.25};
  Field f{grid, CVec::Constant(grid.count(), cplx(3, 4))};
  double v = lq_norm(f, 10, 2).value;
  CHECK(v == doctest::Approx(5 * std::sqrt(kPi * 100)).epsilon(0.01));
  Field z{grid, CVec::Zero(grid.count())};
  CHECK(lq_norm(z, 10, 4).value == 0.0);
  CHECK_THROWS_AS(lq_norm(f, 20, 2), DomainError);

  auto caps = caps2(0.25, 30);
  Field rf = extend(random_density(caps, 4), grid, Method::Direct);
  NormEstimate full = lq_norm(rf, 16, 4);
  SamplingPolicy pol;
  pol.kind = SamplingPolicy::Stratified;
  pol.samples = 8192;
  pol.seed = 17;
  NormEstimate est = lq_norm(rf, 16, 4, pol);
  REQUIRE(est.sampled);
  CHECK(est.stderr > 0);
  CHECK(std::abs(est.value - full.value) <= 3 * est.stderr);
  CHECK(est.stderr <= 0.02 * est.value);
}

TEST_CASE("rlp_extension_ratio") {
  double delta = 1.0 / 64;
  auto caps = std::make_shared<const CapSystem>(cap_decompose(2, std::sqrt(delta)));
  int K = caps->size();
  Vec c = Vec::Zero(K), s = Vec::Ones(K);
  c(5) = 3;
  RatioReport one = rlp_extension_ratio(Density::make(caps, c, s), delta);
  CHECK(one.ratio == doctest::Approx(1.0).epsilon(1e-12));

  Density g = random_density(caps, 77);
  g = Density::make(caps, Vec::Ones(K), g.signs);
  RatioReport r = rlp_extension_ratio(g, delta);
  CHECK(r.ratio <= 10);
  CHECK(r.ratio > 0);

  RatioReport z = rlp_extension_ratio(Density::make(caps, Vec::Zero(K), s), delta);
  CHECK(z.degenerate);
  CHECK(std::isnan(z.ratio));
}

TEST_CASE("restriction_ratio for g = 1 against the Bessel integral") {
  double R = 64;
  auto caps = std::make_shared<const CapSystem>(cap_decompose(2, 0.25));
  Density g = constant_one(caps);
  EvalOptions opts;
  opts.sampling.kind = SamplingPolicy::Stratified;
  opts.sampling.samples = 1 << 14;
  RatioReport r = restriction_ratio(g, R, opts);
  // int_0^R |2 pi J0(2 pi r)|^4 2 pi r dr by composite Simpson
  int N = 200000;
  double hstep = R / N, acc = 0;
  for (int i = 0; i <= N; ++i) {
    double x = i * hstep, w = (i == 0 || i == N) ? 1 : (i % 2 ? 4 : 2);
    acc += w * std::pow(kTwoPi * std::abs(oracle::bessel_j0(kTwoPi * x)), 4) * kTwoPi * x;
  }
  double ref = std::pow(acc * hstep / 3, 0.25);
  CHECK(std::abs(r.lhs - ref) <= 0.2 * ref);
  CHECK(std::abs(r.lhs - ref) <= 4 * r.stderr * r.rhs + 1e-12);
  CHECK(r.rhs == doctest::Approx(std::pow(std::log(R), 0.25) * std::pow(kTwoPi, 0.25)).epsilon(1e-9));

  Density g2 = Density::make(caps, Vec::Constant(caps->size(), 4.0), Vec::Ones(caps->size()));
  RatioReport r2 = restriction_ratio(g2, R, opts);
  CHECK(r2.ratio == doctest::Approx(r.ratio).epsilon(1e-12));
  RatioReport z = restriction_ratio(Density::make(caps, Vec::Zero(caps->size()), Vec::Ones(caps->size())), R, opts);
  CHECK(z.degenerate);
}

TEST_CASE("at_average on the circle") {
  auto caps = std::make_shared<const CapSystem>(cap_decompose(2, 0.1));
  const SphereQuadrature& q = caps->quadrature();
  Vec one = Vec::Ones(q.size());
  for (double t : {0.01, 0.3, 1.0, kPi}) CHECK((at_average(q, one, t) - one).cwiseAbs().maxCoeff() < 1e-12);
  Vec u(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j) u(j) = std::exp(q.nodes(0, j)) + q.nodes(1, j) * q.nodes(1, j);
  double mean = u.mean();
  CHECK((at_average(q, u, kPi) - Vec::Constant(q.size(), mean)).cwiseAbs().maxCoeff() < 1e-12);
  for (double t : {0.05, 0.5, 2.0}) {
    Vec a = at_average(q, u, t);
    CHECK(std::abs(q.weights.dot(a) - q.weights.dot(u)) <= 1e-6 * q.weights.dot(u));
  }
  // spike of radius t/10
  double t = 0.5;
  Vec spike = Vec::Zero(q.size());
  for (Eigen::Index j = 0; j < q.size(); ++j)
    if (std::abs(std::atan2(q.nodes(1, j), q.nodes(0, j))) <= t / 10) spike(j) = 1;
  double sup = at_average(q, spike, t).maxCoeff();
  CHECK(sup == doctest::Approx(cap_area(2, t / 10) / cap_area(2, t)).epsilon(0.05));
}

TEST_CASE("at_average on the sphere") {
  SphereQuadrature outer = plain_quadrature(3, 0.1);
  auto u = [](const Vec& x) { return 1.0 + x(0) * x(2) + std::exp(x(1)); };
  Vec uu(outer.size());
  for (Eigen::Index j = 0; j < outer.size(); ++j) uu(j) = u(outer.nodes.col(j));
  for (double t : {0.1, 0.7}) {
    Vec a = at_average(3, u, outer, t, 0.05);
    CHECK(std::abs(outer.weights.dot(a) - outer.weights.dot(uu)) <= 1e-6 * outer.weights.dot(uu));
    Vec a1 = at_average(3, [](const Vec&) { return 1.0; }, outer, t, 0.05);
    CHECK((a1.array() - 1).abs().maxCoeff() < 1e-10);
  }
  Vec full = at_average(3, u, outer, kPi, 0.05);
  double mean = outer.weights.dot(uu) / (4 * kPi);
  CHECK((full.array() - mean).abs().maxCoeff() < 1e-6);
  // spike: indicator of the t/10 cap about the north pole, smoothed a little
  double t = 0.6;
  auto spike = [&](const Vec& x) { return std::acos(std::clamp(x(2), -1.0, 1.0)) <= t / 10 ? 1.0 : 0.0; };
  SphereQuadrature pole = product_rule(3, 1);
  Mat np(3, 1);
  np << 0, 0, 1;
  pole.nodes = np;
  pole.weights = Vec::Ones(1);
  double sup = at_average(3, spike, pole, t, t / 200)(0);
  CHECK(sup == doctest::Approx(cap_area(3, t / 10) / cap_area(3, t)).epsilon(0.05));
}

TEST_CASE("remark_rhs") {
  for (double R : {64.0, 256.0}) {
    auto caps = std::make_shared<const CapSystem>(cap_decompose(2, 1 / std::sqrt(R)));
    RemarkValue v = remark_rhs(constant_one(caps), R);
    CHECK(v.value == doctest::Approx(std::pow(kTwoPi * 0.5 * std::log(R), 0.25)).epsilon(0.05));
    RemarkValue z = remark_rhs(Density::make(caps, Vec::Zero(caps->size()), Vec::Ones(caps->size())), R);
    CHECK(z.value == 0.0);
  }
  double R = 256;
  auto caps = std::make_shared<const CapSystem>(cap_decompose(2, 1 / std::sqrt(R)));
  Density g = random_density(caps, 8);
  RemarkValue v = remark_rhs(g, R);
  const SphereQuadrature& q = caps->quadrature();
  double gq = std::pow((q.weights.array() * g.node_values.cwiseAbs().array().pow(4)).sum(), 0.25);
  double C = v.value / (std::pow(std::log(R), 0.25) * gq);
  CHECK(C <= std::pow(2.0, -0.25) * (1 + 1e-9));
  CHECK(v.rel_change < 0.05);
}

TEST_CASE("local and global backends agree for n = 3") {
  auto caps = std::make_shared<const CapSystem>(cap_decompose(3, 0.4));
  std::vector<Channel> ch;
  for (int a : {0, 7, 20}) {
    Vec lam(3);
    lam << 1.5 * a / 20.0, -2.0, 0.5;
    ch.push_back(Channel{a, -1, cplx(0.5, 1), lam});
  }
  std::mt19937_64 g(2);
  Mat pts(3, 40);
  for (int i = 0; i < 40; ++i) pts.col(i) = 6 * uniform01(g) * unit_from_uniforms(3, uniform01(g), uniform01(g));
  CMat A = evaluate_channels(*caps, nullptr, ch, pts, Backend::Global);
  CMat B = evaluate_channels(*caps, nullptr, ch, pts, Backend::Local);
  CapSystem fine = quadrature_for_bandwidth(*caps, 30);
  CMat ref = evaluate_channels(fine, nullptr, ch, pts, Backend::Global);
  // bump integrands limit both rules to a few parts in 1e6
  double scale = ref.cwiseAbs().maxCoeff();
  CHECK((A - ref).cwiseAbs().maxCoeff() < 1e-5 * scale);
  CHECK((B - ref).cwiseAbs().maxCoeff() < 1e-5 * scale);
}
