#include "lab/nufft.hpp"

#include "lab/fft.hpp"

#include <cmath>
#include <vector>

namespace lab {

double nufft_bytes(int n, int K) {
  double mr = fft_size(2 * (2 * K + 1));
  return 16.0 * (std::pow(mr, n) + std::pow(2.0 * K + 1, n));
}

CVec nufft_type1(const RowMat& nodes, const CVec& c, double h, int K, int spread) {
  const int n = static_cast<int>(nodes.rows());
  require(n == 2 || n == 3, "nufft: dimension must be 2 or 3");
  require(h > 0 && h <= 0.25, "nufft: spacing must be in (0, 1/4]");
  require(nodes.cols() == c.size(), "nufft: nodes/strengths mismatch");
  const int mk = 2 * K + 1;
  const int mr = fft_size(2 * mk);
  check_budget(nufft_bytes(n, K), "nufft grid");
  const double sigma = double(mr) / mk;
  const double tau = kPi * spread / (double(mk) * mk * sigma * (sigma - 0.5));
  const double dx = kTwoPi / mr;

  std::size_t total = 1;
  for (int d = 0; d < n; ++d) total *= mr;
  std::vector<cplx> grid(total, cplx(0, 0));

  const int w = 2 * spread;
  std::vector<double> wt(n * w);
  std::vector<int> idx(n * w);
  for (Eigen::Index j = 0; j < c.size(); ++j) {
    for (int d = 0; d < n; ++d) {
      double x = kTwoPi * h * nodes(d, j);
      int m0 = static_cast<int>(std::floor(x / dx));
      for (int t = 0; t < w; ++t) {
        int m = m0 - spread + 1 + t;
        double u = x - dx * m;
        wt[d * w + t] = std::exp(-u * u / (4 * tau));
        idx[d * w + t] = ((m % mr) + mr) % mr;
      }
    }
    double cr = c(j).real(), ci = c(j).imag();
    if (n == 2) {
      for (int a = 0; a < w; ++a) {
        double wa = wt[a];
        std::size_t base = std::size_t(idx[a]) * mr;
        for (int b = 0; b < w; ++b) {
          double v = wa * wt[w + b];
          std::size_t k = base + idx[w + b];
          grid[k] += cplx(v * cr, v * ci);
        }
      }
    } else {
      for (int a = 0; a < w; ++a)
        for (int b = 0; b < w; ++b) {
          double wab = wt[a] * wt[w + b];
          std::size_t base = (std::size_t(idx[a]) * mr + idx[w + b]) * mr;
          for (int e = 0; e < w; ++e) {
            double v = wab * wt[2 * w + e];
            std::size_t k = base + idx[2 * w + e];
            grid[k] += cplx(v * cr, v * ci);
          }
        }
    }
  }

  fft_inplace(grid.data(), std::vector<int>(n, mr), -1);

  std::vector<double> deconv(mk);
  for (int k = -K; k <= K; ++k) deconv[k + K] = std::sqrt(kPi / tau) * std::exp(double(k) * k * tau) / mr;
  std::size_t out_total = 1;
  for (int d = 0; d < n; ++d) out_total *= mk;
  CVec out(out_total);
  auto wrap = [&](int k) { return std::size_t((k % mr + mr) % mr); };
  std::size_t o = 0;
  if (n == 2) {
    for (int a = -K; a <= K; ++a)
      for (int b = -K; b <= K; ++b, ++o) {
        std::size_t g = wrap(a) * mr + wrap(b);
        double s = deconv[a + K] * deconv[b + K];
        out(o) = grid[g] * s;
      }
  } else {
    for (int a = -K; a <= K; ++a)
      for (int b = -K; b <= K; ++b)
        for (int e = -K; e <= K; ++e, ++o) {
          std::size_t g = (wrap(a) * mr + wrap(b)) * mr + wrap(e);
          double s = deconv[a + K] * deconv[b + K] * deconv[e + K];
          out(o) = grid[g] * s;
        }
  }
  return out;
}

}  // namespace lab
