#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "lab/channels.hpp"
#include "lab/report.hpp"
#include "lab/sampling.hpp"
#include "lab/sphere_caps.hpp"

namespace lab {

struct GridSpec {
  int n = 2;
  double L = 16;    // box [-L, L]^n
  double h = 0.25;  // spacing
  SamplingPolicy sampling;

  int K() const { return static_cast<int>(std::lround(L / h)); }
  Eigen::Index side() const { return 2 * K() + 1; }
  Eigen::Index count() const;
  Vec point(Eigen::Index i) const;
  Mat points() const;
  void validate() const;
};

// g = sum_a eps_a c_a^{1/2} e^{2 pi i lambda_a.xi} phi_a, plus its values at
// the quadrature nodes of the cap system.
struct Density {
  std::shared_ptr<const CapSystem> caps;
  Vec c;
  Vec signs;
  Mat lambda;  // n x K; empty means unmodulated
  CVec node_values;

  static Density make(std::shared_ptr<const CapSystem> caps, Vec c, Vec signs, Mat lambda = Mat());
  cplx value(const Eigen::Ref<const Vec>& xi) const;
  CVec values_at(const SphereQuadrature& q) const;
  cplx amplitude(int a) const { return signs(a) * std::sqrt(c(a)); }
  Vec modulation(int a) const { return lambda.cols() ? Vec(lambda.col(a)) : Vec(); }
  // One channel per cap carrying eps c^{1/2} and the modulation.
  std::vector<Channel> channels() const;
  double max_modulation() const;
};

struct Field {
  GridSpec grid;
  CVec values;
};

struct RealField {
  GridSpec grid;
  Vec values;
};

enum class Method { Direct, Gridded };

// Extension of node values of the system's quadrature; `extra_bandwidth`
// accounts for modulation already folded into the values.
Field extend(const CapSystem& sys, const CVec& node_values, const GridSpec& grid, Method method,
             double extra_bandwidth = 0);
Field extend(const Density& g, const GridSpec& grid, Method method);
CVec extend_at(const CapSystem& sys, const CVec& node_values, const Mat& points, double extra_bandwidth = 0);

RealField square_function(const Density& g, const GridSpec& grid, Method method);
RealField square_function(const std::vector<Field>& parts);

NormEstimate lq_norm(const Field& f, double radius, double q, const SamplingPolicy& policy = {});
NormEstimate lq_norm(const RealField& f, double radius, double q, const SamplingPolicy& policy = {});

struct EvalOptions {
  SamplingPolicy sampling;
  double h = 0.25;
  Backend backend = Backend::Auto;
  double target_stderr = 0.02;
  int max_samples = 1 << 18;
  // square_function_norms, n = 3: skip caps far from the stationary direction
  double far_cutoff = 60;
};

// Calls `measure` on evaluation sets over B(0, radius), quadrupling the
// sample count until it reports every norm within the stderr target.
void evaluate_until_certified(int n, double radius, const EvalOptions& opts,
                              const std::function<bool(const EvaluationSet&)>& measure);
bool stderr_ok(const NormEstimate& e, double target);

// Cap-constant coefficients sharing one cap system and modulation set.
struct CapCoefficients {
  Vec c;
  Vec signs;
};

std::vector<RatioReport> rlp_extension_ratios(const CapSystem& caps, const Mat& lambda,
                                              const std::vector<CapCoefficients>& densities, double delta,
                                              const EvalOptions& opts = {});
RatioReport rlp_extension_ratio(const Density& g, double delta, const EvalOptions& opts = {});

// lhs = ||g dsigma^||_{L^q(B(0,R))}, rhs = (log R)^{(n-1)/(2n)} ||g||_{L^q(S)}.
RatioReport restriction_ratio(const Density& g, double R, const EvalOptions& opts = {}, double q = 0);

// Square-function norms ||(sum c_a |phi_a dsigma^|^2)^{1/2}||_{L^q(B(0,R))} for
// several coefficient vectors at once (unmodulated caps).
std::vector<NormEstimate> square_function_norms(const CapSystem& caps, const std::vector<Vec>& c, double R,
                                                double q, const EvalOptions& opts = {});

// Cap averages on the uniform circle rule (n = 2), exact on the piecewise
// linear interpolant of the node values.
Vec at_average(const SphereQuadrature& q, const Vec& u, double t);
// Cap averages of an evaluable u at the nodes of `outer`; inner polar
// Gauss-Legendre rule with spacing about `resolution`.
Vec at_average(int n, const std::function<double(const Vec&)>& u, const SphereQuadrature& outer, double t,
               double resolution);
// Product rule with spacing about `spacing` (no cap table).
SphereQuadrature plain_quadrature(int n, double spacing);

struct RemarkValue {
  double value = 0;    // dyadic trapezoid in log t
  double refined = 0;  // same with the log-step halved
  double rel_change = 0;
  int levels = 0;
};
RemarkValue remark_rhs(const Density& g, double R);
// Same for densities sharing one cap system, one bump lookup per node.
std::vector<RemarkValue> remark_rhs(const std::vector<Density>& gs, double R);

}  // namespace lab
