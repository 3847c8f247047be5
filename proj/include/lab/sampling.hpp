#pragma once

#include <vector>

#include "lab/common.hpp"

namespace lab {

struct SamplingPolicy {
  enum Kind { Auto, Full, Stratified } kind = Auto;
  int samples = 1 << 14;
  std::uint64_t seed = 1;
  // Auto picks the full grid up to this many points.
  long long full_limit = 1 << 18;
};

// Points in B(0, radius) with quadrature weights. Full grids carry weight
// h^n per point; stratified sets carry shell volume / shell sample count.
struct EvaluationSet {
  int n = 2;
  double radius = 0;
  double h = 0;
  Mat points;  // n x P
  Vec weights;
  bool sampled = false;
  int groups = 1;          // jackknife groups
  std::vector<int> group;  // per point
  std::vector<int> shell;  // per point
  std::vector<double> shell_volume;
};

EvaluationSet ball_grid(int n, double radius, double h);
EvaluationSet ball_samples(int n, double radius, int samples, std::uint64_t seed, int groups = 16);
long long ball_grid_count(int n, double radius, double h);

EvaluationSet choose_evaluation(int n, double radius, double h, const SamplingPolicy& policy);

struct NormEstimate {
  double value = 0;
  double stderr = 0;
  bool sampled = false;
  std::vector<double> jackknife;  // leave-one-group-out values
};

// (sum w |f|^q)^{1/q}; q = infinity gives the max.
NormEstimate lq_norm(const EvaluationSet& set, const Eigen::Ref<const Vec>& abs_values, double q);

// Jackknife standard error of a / b from two estimates on the same set.
double ratio_stderr(const NormEstimate& a, const NormEstimate& b);

// Uniform unit vector from two uniforms, identical on every platform.
Vec unit_from_uniforms(int n, double u, double v);

}  // namespace lab
