#include <cmath>

#include "doctest.h"
#include "oracles/bessel.hpp"
#include "oracles/rect_overlap.hpp"

TEST_CASE("bessel oracle: series and recurrence agree, match libstdc++") {
  for (double x = 0.05; x < 12.0; x += 0.173)
    CHECK(std::abs(oracle::bessel_j0_series(x) - oracle::bessel_j0_miller(x)) < 1e-12);
  for (double x = 0.1; x < 420.0; x += 0.71)
    CHECK(std::abs(oracle::bessel_j0(x) - std::cyl_bessel_j(0.0, x)) < 1e-12);
  CHECK(oracle::bessel_j0(0.0) == 1.0);
  // first zero
  CHECK(std::abs(oracle::bessel_j0(2.404825557695773)) < 1e-14);
}

TEST_CASE("rectangle overlap oracle") {
  oracle::Rect a{-4, 4, -0.5, 0.5}, b{-0.5, 0.5, -4, 4};
  CHECK(oracle::overlap_area(a, b) == doctest::Approx(1.0));
  CHECK(std::sqrt(oracle::two_rect_norm_pow(a, b, 1, 1, 2)) == doctest::Approx(std::sqrt(18.0)));
  oracle::Rect c{10, 11, 10, 11};
  CHECK(oracle::overlap_area(a, c) == 0.0);
}
