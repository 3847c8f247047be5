#pragma once

#include "lab/common.hpp"

namespace lab {

struct SumsetOptions {
  // pairs with cyclic index distance <= this are skipped; neighbouring
  // pieces share an edge, so their differences all meet near the origin
  int exclude_adjacent = 1;
  double resolution = 0.5;  // raster spacing in units of delta
  int arc_points = 8;       // hull vertices per arc of a piece
};

struct SumsetStats {
  double delta = 0;
  int pieces = 0;
  long long pairs = 0;
  int max_multiplicity = 0;
  double mean_multiplicity = 0;  // over covered raster points
  double argmax_x = 0, argmax_y = 0;
};

// Pieces E_a = {xi : ||xi| - 1| <= delta, arg xi in arc a} for the equal
// arcs at angular scale delta^{1/2}. Each difference E_a - E_b is replaced by
// the difference of convex hulls (a superset) and rasterized; the result is
// the largest number of ordered pairs covering one raster point.
SumsetStats difference_multiplicity(double delta, const SumsetOptions& opts = {});

}  // namespace lab
