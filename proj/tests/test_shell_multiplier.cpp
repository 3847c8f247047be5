#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <random>

#include "lab/shell_multiplier.hpp"

using namespace lab;

namespace {

PeriodicField modes(int n, double P, int m, const std::vector<std::pair<Vec, cplx>>& ks) {
  PeriodicField f = PeriodicField::zeros(n, P, m);
  for (Eigen::Index i = 0; i < f.count(); ++i) {
    Vec x = f.point(i);
    for (auto& [k, c] : ks) f.values(i) += c * std::exp(cplx(0, kTwoPi * k.dot(x) / P));
  }
  return f;
}

Vec v2(double a, double b) {
  Vec v(2);
  v << a, b;
  return v;
}

double l2sq(const PeriodicField& f) { return std::pow(torus_norm(f, f.values.cwiseAbs(), 2), 2); }

}  // namespace

TEST_CASE("unit mode passes with profile value at zero") {
  PeriodicField f = modes(2, 64, 150, {{v2(64, 0), cplx(1, 0.5)}});
  PeriodicField g = apply_sdelta(f, 0.125);
  CHECK((g.values - f.values).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("mode outside the shell is removed") {
  PeriodicField f = modes(2, 64, 400, {{v2(0, 192), cplx(1, 0)}});
  PeriodicField g = apply_sdelta(f, 0.125);
  CHECK(g.values.cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("Parseval against a mode-sum oracle") {
  // modes on the torus are orthogonal: ||sum c_k e_k||^2 = P^n sum |c_k|^2
  const double P = 64, delta = 0.125;
  std::mt19937_64 g(3);
  std::vector<std::pair<Vec, cplx>> ks;
  double expect = 0, before = 0;
  ShellProfile prof;
  for (int j = 0; j < 12; ++j) {
    Vec k = v2(std::floor(-80 + 160 * uniform01(g)), std::floor(-80 + 160 * uniform01(g)));
    bool dup = false;
    for (auto& e : ks) dup = dup || (e.first - k).norm() == 0;
    if (dup) continue;
    cplx c(uniform01(g) - 0.5, uniform01(g) - 0.5);
    ks.push_back({k, c});
    before += std::norm(c);
    expect += std::norm(c * prof((k.norm() / P - 1) / delta));
  }
  PeriodicField f = modes(2, P, 200, ks);
  PeriodicField s = apply_sdelta(f, delta);
  CHECK(l2sq(f) == doctest::Approx(P * P * before).epsilon(1e-10));
  CHECK(l2sq(s) == doctest::Approx(P * P * expect).epsilon(1e-9));
  CHECK(l2sq(s) <= l2sq(f));
}

TEST_CASE("cap pieces sum to the shell multiplier") {
  const double delta = 0.125;
  CapSystem caps = cap_decompose(2, std::sqrt(delta));
  PeriodicField f = random_shell_field(2, delta, default_torus(2, delta), 5);
  PeriodicField s = apply_sdelta(f, delta);
  CVec sum = CVec::Zero(f.count());
  double pieces = 0;
  for (int a = 0; a < caps.size(); ++a) {
    PeriodicField p = apply_cap_multiplier(f, caps, a, delta);
    sum += p.values;
    pieces += l2sq(p);
  }
  CHECK((sum - s.values).cwiseAbs().maxCoeff() < 1e-10);
  // near-disjoint spectra
  CHECK(pieces <= 2 * l2sq(s));
  CHECK(pieces >= 0.5 * l2sq(s));
}

TEST_CASE("mode inside a cap interior passes that cap only") {
  const double delta = 0.125, P = 64;
  CapSystem caps = cap_decompose(2, std::sqrt(delta));
  // lattice frequency on the unit circle nearest a cap center where phi = 1
  int found = -1;
  Vec k;
  for (int a = 0; a < caps.size() && found < 0; ++a) {
    Vec c = caps.cap(a).center * P;
    Vec cand = v2(std::round(c(0)), std::round(c(1)));
    if (std::abs(cand.norm() / P - 1) < delta / 4 && caps.bump(a, cand.normalized()) == 1.0) found = a, k = cand;
  }
  REQUIRE(found >= 0);
  PeriodicField f = modes(2, P, 150, {{k, cplx(1, 0)}});
  for (int a = 0; a < caps.size(); ++a) {
    double mx = apply_cap_multiplier(f, caps, a, delta).values.cwiseAbs().maxCoeff();
    if (a == found)
      CHECK(mx > 0.5);
    else
      CHECK(mx < 1e-10);
  }
}

TEST_CASE("rlp multiplier ratio") {
  SUBCASE("spectrum inside one cap gives ratio 1") {
    const double delta = 0.125;
    CapSystem caps = cap_decompose(2, std::sqrt(delta));
    auto keep = [&](const Vec& xi) { return caps.bump(3, xi.normalized()) == 1.0; };
    PeriodicField f = random_shell_field(2, delta, default_torus(2, delta), 9, keep);
    RatioReport r = rlp_multiplier_ratio(f, caps, delta);
    CHECK(r.ratio == doctest::Approx(1).epsilon(1e-10));
    RatioReport d = decoupling_ratio(f, caps, delta, 8);
    CHECK(d.ratio == doctest::Approx(1).epsilon(1e-10));
  }
  SUBCASE("n = 2, delta = 2^-5") {
    const double delta = 1.0 / 32;
    CapSystem caps = cap_decompose(2, std::sqrt(delta));
    PeriodicField f = random_shell_field(2, delta, default_torus(2, delta), 11);
    RatioReport r4 = rlp_multiplier_ratio(f, caps, delta, 4);
    CHECK(r4.ratio <= 10);
    RatioReport r2 = rlp_multiplier_ratio(f, caps, delta, 2);
    CHECK(r2.ratio <= 1.5);
    RatioReport loc = rlp_multiplier_ratio(f, caps, delta, 4, true);
    CHECK(loc.lhs < r4.lhs);
    CHECK(loc.ratio <= 10);
    RatioReport d2 = decoupling_ratio(f, caps, delta, 2, 2);
    CHECK(d2.lhs == r2.lhs);
    CHECK(d2.rhs == r2.rhs);
    // l^r nesting: smaller r, larger rhs
    RatioReport d8 = decoupling_ratio(f, caps, delta, 8);
    RatioReport d8r2 = decoupling_ratio(f, caps, delta, 8, 2);
    CHECK(d8.r == doctest::Approx(4.0 / 3));
    CHECK(d8.rhs >= d8r2.rhs);
    RatioReport dinf = decoupling_ratio(f, caps, delta, std::numeric_limits<double>::infinity());
    CHECK(dinf.r == 1);
    CHECK(dinf.ratio <= 1 + 1e-12);
  }
}

TEST_CASE("pairing rule for r") {
  CHECK(decoupling_r(2, 3) == 2);
  CHECK(decoupling_r(2, 4) == 2);
  CHECK(decoupling_r(2, 8) == doctest::Approx(4.0 / 3));
  CHECK(decoupling_r(3, 3) == 2);
  CHECK(decoupling_r(3, 6) == doctest::Approx(4.0 / 3));
  CHECK(decoupling_r(2, std::numeric_limits<double>::infinity()) == 1);
  CHECK_THROWS_AS(decoupling_r(2, 1.5), DomainError);
}

TEST_CASE("errors") {
  const double delta = 0.125;
  CapSystem caps = cap_decompose(2, std::sqrt(delta));
  PeriodicField coarse = PeriodicField::zeros(2, 32, 80);
  CHECK_THROWS_AS(apply_sdelta(coarse, delta), DomainError);
  PeriodicField f = random_shell_field(2, delta, default_torus(2, delta), 1);
  CHECK_THROWS_AS(decoupling_ratio(f, caps, delta, 4, 0.5), DomainError);
  CHECK_THROWS_AS(decoupling_ratio(f, caps, delta, std::numeric_limits<double>::infinity(), 2), DomainError);
  PeriodicField zero = PeriodicField::zeros(2, f.P, f.m);
  CHECK(rlp_multiplier_ratio(zero, caps, delta).degenerate);
}

TEST_CASE("kernel localization") {
  double tail = kernel_tail_fraction(2, 0.125, 8);
  CHECK(tail <= 0.1);
  CHECK(tail >= 0);
}

TEST_CASE("pgm dump") {
  const double delta = 0.125;
  PeriodicField f = random_shell_field(2, delta, default_torus(2, delta), 2);
  auto path = std::filesystem::temp_directory_path() / "lab_shell_test.pgm";
  write_pgm(path.string(), f);
  std::string header = "P5\n" + std::to_string(f.m) + " " + std::to_string(f.m) + "\n255\n";
  CHECK(std::filesystem::file_size(path) == header.size() + std::size_t(f.m) * f.m);
  std::filesystem::remove(path);
}
