#include "lab/sumset.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

namespace lab {

namespace {

struct P2 {
  double x, y;
};

double cross3(const P2& o, const P2& a, const P2& b) { return (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x); }

// Andrew's monotone chain, counter-clockwise.
std::vector<P2> hull(std::vector<P2> p) {
  std::sort(p.begin(), p.end(), [](const P2& a, const P2& b) { return a.x < b.x || (a.x == b.x && a.y < b.y); });
  std::vector<P2> h(2 * p.size());
  std::size_t k = 0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    while (k >= 2 && cross3(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  for (std::size_t i = p.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross3(h[k - 2], h[k - 1], p[i]) <= 0) --k;
    h[k++] = p[i];
  }
  h.resize(k - 1);
  return h;
}

}  // namespace

SumsetStats difference_multiplicity(double delta, const SumsetOptions& opts) {
  require(delta > 0 && delta < 0.5, "delta must be in (0, 1/2)");
  require(opts.resolution > 0 && opts.arc_points >= 2, "bad sumset options");
  const double s = std::sqrt(delta);
  const int K = static_cast<int>(std::ceil(kTwoPi / s));
  const double arc = kTwoPi / K;
  const double h = opts.resolution * delta;
  const double ext = 2 * (1 + delta) + h;
  const int side = 2 * static_cast<int>(std::ceil(ext / h)) + 1;
  const int half = side / 2;
  check_budget(2.0 * side * side, "sumset raster");
  std::vector<std::uint16_t> count(std::size_t(side) * side, 0);

  // hull vertices of one piece; the others are rotations
  std::vector<P2> piece;
  for (int i = 0; i < opts.arc_points; ++i) {
    double t = -arc / 2 + arc * i / (opts.arc_points - 1);
    // outer arc bulges past its chord; push the chord out to contain it
    double ro = (1 + delta) / std::cos(arc / (2 * (opts.arc_points - 1)));
    piece.push_back({ro * std::cos(t), ro * std::sin(t)});
    piece.push_back({(1 - delta) * std::cos(t), (1 - delta) * std::sin(t)});
  }
  auto rotated = [&](int a) {
    double th = arc * a, c = std::cos(th), sn = std::sin(th);
    std::vector<P2> out;
    for (const P2& p : piece) out.push_back({c * p.x - sn * p.y, sn * p.x + c * p.y});
    return out;
  };

  SumsetStats st;
  st.delta = delta;
  st.pieces = K;
  std::vector<P2> ea, eb, diff;
  for (int a = 0; a < K; ++a) {
    ea = rotated(a);
    for (int b = 0; b < K; ++b) {
      int dist = std::abs(a - b);
      dist = std::min(dist, K - dist);
      if (dist <= opts.exclude_adjacent) continue;
      eb = rotated(b);
      diff.clear();
      for (const P2& p : ea)
        for (const P2& q : eb) diff.push_back({p.x - q.x, p.y - q.y});
      std::vector<P2> H = hull(diff);
      ++st.pairs;
      double x0 = 1e300, x1 = -1e300;
      for (const P2& p : H) x0 = std::min(x0, p.x), x1 = std::max(x1, p.x);
      int i0 = static_cast<int>(std::ceil(x0 / h)), i1 = static_cast<int>(std::floor(x1 / h));
      for (int i = i0; i <= i1; ++i) {
        double x = i * h, lo = 1e300, hi = -1e300;
        // vertical section of the convex polygon
        for (std::size_t e = 0; e < H.size(); ++e) {
          const P2 &p = H[e], &q = H[(e + 1) % H.size()];
          if ((p.x - x) * (q.x - x) > 0) continue;
          if (p.x == q.x) {
            lo = std::min({lo, p.y, q.y});
            hi = std::max({hi, p.y, q.y});
            continue;
          }
          double y = p.y + (q.y - p.y) * (x - p.x) / (q.x - p.x);
          lo = std::min(lo, y);
          hi = std::max(hi, y);
        }
        if (lo > hi) continue;
        int j0 = static_cast<int>(std::ceil(lo / h)), j1 = static_cast<int>(std::floor(hi / h));
        std::uint16_t* row = count.data() + std::size_t(i + half) * side;
        for (int j = j0; j <= j1; ++j) ++row[j + half];
      }
    }
  }
  double covered = 0, total = 0;
  for (std::size_t k = 0; k < count.size(); ++k) {
    if (!count[k]) continue;
    covered += 1;
    total += count[k];
    if (count[k] > st.max_multiplicity) {
      st.max_multiplicity = count[k];
      st.argmax_x = (static_cast<int>(k / side) - half) * h;
      st.argmax_y = (static_cast<int>(k % side) - half) * h;
    }
  }
  st.mean_multiplicity = covered > 0 ? total / covered : 0.0;
  return st;
}

}  // namespace lab
