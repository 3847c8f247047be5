#include "lab/sampling.hpp"

#include <cmath>
#include <limits>
#include <random>

namespace lab {

long long ball_grid_count(int n, double radius, double h) {
  int K = static_cast<int>(std::floor(radius / h));
  long long cnt = 0;
  double r2 = radius * radius;
  for (int a = -K; a <= K; ++a) {
    double xa = a * h;
    if (n == 2) {
      double rem = r2 - xa * xa;
      if (rem < 0) continue;
      cnt += 2 * static_cast<long long>(std::floor(std::sqrt(rem) / h + 1e-12)) + 1;
    } else {
      for (int b = -K; b <= K; ++b) {
        double rem = r2 - xa * xa - b * h * b * h;
        if (rem < 0) continue;
        cnt += 2 * static_cast<long long>(std::floor(std::sqrt(rem) / h + 1e-12)) + 1;
      }
    }
  }
  return cnt;
}

EvaluationSet ball_grid(int n, double radius, double h) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  require(radius > 0 && h > 0, "ball_grid: bad radius or spacing");
  long long cnt = ball_grid_count(n, radius, h);
  check_budget(cnt * 8.0 * (n + 1), "ball grid");
  EvaluationSet s;
  s.n = n;
  s.radius = radius;
  s.h = h;
  s.points.resize(n, cnt);
  int K = static_cast<int>(std::floor(radius / h));
  double r2 = radius * radius * (1 + 1e-14);
  Eigen::Index p = 0;
  for (int a = -K; a <= K; ++a)
    for (int b = -K; b <= K; ++b) {
      if (n == 2) {
        double x = a * h, y = b * h;
        if (x * x + y * y <= r2) s.points.col(p++) << x, y;
      } else {
        for (int c = -K; c <= K; ++c) {
          double x = a * h, y = b * h, z = c * h;
          if (x * x + y * y + z * z <= r2) s.points.col(p++) << x, y, z;
        }
      }
    }
  s.points.conservativeResize(n, p);
  s.weights = Vec::Constant(p, std::pow(h, n));
  s.group.assign(p, 0);
  s.shell.assign(p, 0);
  s.shell_volume = {std::pow(h, n) * p};
  return s;
}

Vec unit_from_uniforms(int n, double u, double v) {
  Vec w(n);
  if (n == 2) {
    w << std::cos(kTwoPi * u), std::sin(kTwoPi * u);
  } else {
    double z = 2 * v - 1, r = std::sqrt(std::max(0.0, 1 - z * z));
    w << r * std::cos(kTwoPi * u), r * std::sin(kTwoPi * u), z;
  }
  return w;
}

EvaluationSet ball_samples(int n, double radius, int samples, std::uint64_t seed, int groups) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  require(radius > 0 && samples >= 2 * groups, "ball_samples: too few samples");
  // geometric shells down to radius ~1, plus the inner ball
  int shells = std::max(1, static_cast<int>(std::ceil(std::log2(std::max(radius, 2.0))))) ;
  int per = samples / shells;
  per = std::max(groups, per / groups * groups);
  EvaluationSet s;
  s.n = n;
  s.radius = radius;
  s.sampled = true;
  s.groups = groups;
  s.points.resize(n, static_cast<Eigen::Index>(per) * shells);
  s.weights.resize(s.points.cols());
  std::mt19937_64 gen(derive_seed(seed, 0x5a3b1e));
  Eigen::Index p = 0;
  for (int k = 0; k < shells; ++k) {
    double ra = k == 0 ? 0.0 : radius * std::ldexp(1.0, k - shells);
    double rb = radius * std::ldexp(1.0, k + 1 - shells);
    double va = std::pow(ra, n), vb = std::pow(rb, n);
    double vol = ball_volume(n, rb) - ball_volume(n, ra);
    s.shell_volume.push_back(vol);
    for (int i = 0; i < per; ++i, ++p) {
      double u0 = uniform01(gen), u1 = uniform01(gen), u2 = uniform01(gen);
      double r = std::pow(va + u0 * (vb - va), 1.0 / n);
      s.points.col(p) = r * unit_from_uniforms(n, u1, u2);
      s.weights(p) = vol / per;
      s.group.push_back(i % groups);
      s.shell.push_back(k);
    }
  }
  return s;
}

EvaluationSet choose_evaluation(int n, double radius, double h, const SamplingPolicy& policy) {
  if (policy.kind == SamplingPolicy::Full) return ball_grid(n, radius, h);
  if (policy.kind == SamplingPolicy::Auto) {
    long long cnt = ball_grid_count(n, radius, h);
    if (cnt <= policy.full_limit && cnt * 8.0 * (n + 1) <= memory_budget() / 4) return ball_grid(n, radius, h);
  }
  return ball_samples(n, radius, policy.samples, policy.seed);
}

NormEstimate lq_norm(const EvaluationSet& set, const Eigen::Ref<const Vec>& f, double q) {
  require(q >= 1, "lq_norm: q must be >= 1");
  require(f.size() == set.weights.size(), "lq_norm: value count mismatch");
  NormEstimate e;
  e.sampled = set.sampled;
  if (std::isinf(q)) {
    e.value = f.size() ? f.maxCoeff() : 0.0;
    return e;
  }
  const Eigen::Index P = f.size();
  if (!set.sampled) {
    // fixed-order blocked sum
    double acc = 0;
    const Eigen::Index B = 4096;
    for (Eigen::Index b = 0; b < P; b += B) {
      double part = 0;
      for (Eigen::Index i = b; i < std::min(P, b + B); ++i) part += set.weights(i) * std::pow(f(i), q);
      acc += part;
    }
    e.value = std::pow(acc, 1.0 / q);
    return e;
  }
  int S = static_cast<int>(set.shell_volume.size()), G = set.groups;
  // per shell, per group sums and counts
  std::vector<double> sum(S * G, 0.0);
  std::vector<int> cnt(S * G, 0);
  for (Eigen::Index i = 0; i < P; ++i) {
    int k = set.shell[i] * G + set.group[i];
    sum[k] += std::pow(f(i), q);
    cnt[k]++;
  }
  auto total = [&](int skip) {
    double t = 0;
    for (int s = 0; s < S; ++s) {
      double a = 0;
      int c = 0;
      for (int g = 0; g < G; ++g)
        if (g != skip) a += sum[s * G + g], c += cnt[s * G + g];
      if (c) t += set.shell_volume[s] * a / c;
    }
    return t;
  };
  double full = total(-1);
  e.value = std::pow(full, 1.0 / q);
  double mean = 0;
  for (int g = 0; g < G; ++g) {
    e.jackknife.push_back(std::pow(total(g), 1.0 / q));
    mean += e.jackknife.back();
  }
  mean /= G;
  double var = 0;
  for (double v : e.jackknife) var += (v - mean) * (v - mean);
  e.stderr = std::sqrt(var * (G - 1) / G);
  return e;
}

double ratio_stderr(const NormEstimate& a, const NormEstimate& b) {
  if (a.jackknife.empty() || a.jackknife.size() != b.jackknife.size()) return 0.0;
  int G = static_cast<int>(a.jackknife.size());
  std::vector<double> r(G);
  double mean = 0;
  for (int g = 0; g < G; ++g) {
    r[g] = b.jackknife[g] > 0 ? a.jackknife[g] / b.jackknife[g] : 0.0;
    mean += r[g];
  }
  mean /= G;
  double var = 0;
  for (double v : r) var += (v - mean) * (v - mean);
  return std::sqrt(var * (G - 1) / G);
}

}  // namespace lab
