#pragma once

#include <cstdint>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "lab/extension_field.hpp"
#include "lab/kakeya_tubes.hpp"

namespace lab {

struct SignVector {
  Vec eps;  // +-1 per cap
  std::uint64_t seed = 0;
};

// Counter-based Rademacher draw: eps_a from one bit of mix64(seed, a).
SignVector rademacher(int K, std::uint64_t seed);

// Caps matched to a direction net: cap a < net.size() is centred on net
// direction a, the remaining caps cover the antipodal half. n = 2 uses equal
// arcs (so the system can be refined), n = 3 mirrors the hemisphere cells.
CapSystem net_caps(const DirectionNet& net);
// Refinement at coarse.scale() * delta^{1/2}, i.e. delta for n = 2.
CapSystem chain_fine_caps(const CapSystem& coarse, double delta);

// g = sum_a eps_a c_a^{1/2} e^{2 pi i lambda_a.xi} phi_a with lambda_a the
// tube centers; caps past the family carry c = 0.
Density build_test_density(const TubeFamily& family, const SignVector& signs, std::shared_ptr<const CapSystem> caps,
                           double delta);

struct FtBound {
  double c_ft = 0;  // min over checked caps
  int worst_cap = -1;
  Vec per_cap;  // NaN for caps without mass
};

// min |ext(e^{2 pi i lambda.xi} phi_a)| / delta^{(n-1)/2} over a grid on the
// central `fraction` of the delta^{-1/2} x delta^{-1} tube at lambda.
double ft_lower_bound(const CapSystem& caps, int a, const Vec& lambda, double delta, double fraction = 0.5,
                      int along = 17, int across = 5);
// Over every cap with c > 0.
FtBound ft_lower_bound(const Density& g, double delta, double fraction = 0.5);

struct Refinement {
  CVec a;          // per fine cap, 0 where excluded
  CVec amplitude;  // a_beta c_{alpha(beta)}^{1/2}
  std::vector<char> included;
  int excluded = 0;
  double min_abs = 0, max_abs = 0;
  double interior_min = 0, interior_max = 0;  // beta with phi_parent(center) >= 0.99
  double max_oscillation = 0;  // max_beta sup_{F_beta} |g - g(center)| / |g(center)|
};

// a_beta = g(center_beta) / c_{alpha(beta)}^{1/2}.
Refinement refine_density(const Density& g, const CapSystem& fine);

struct MainTerm {
  double c_lo = 0;       // min over the central part of R_beta of |psi_beta dsigma^| / delta^{n-1}
  double leak = 0;       // share of the L^q mass outside the 4-fold dilate of R_beta
  double at_origin = 0;  // |psi_beta dsigma^(0)| / delta^{n-1}
  std::string method;
};

// R_beta: delta^{-1} x delta^{-2} tube through the origin along center_beta,
// evaluated over B(0, delta^{-2}) with q = 2n/(n-1).
MainTerm rbeta_main_term(const CapSystem& fine, int b, double delta, const EvalOptions& opts = {},
                         double fraction = 0.5);

struct KhintchineResult {
  int draws = 0;
  Vec norms;   // ||g_eps dsigma^||_q per draw
  Vec ratios;  // norms / square_function
  double square_function = 0;
  double mean_norm = 0;
  double mean_ratio = 0, ci_lo = 0, ci_hi = 0, min_ratio = 0, max_ratio = 0;
  std::string method;
};

// Sign draws over B(0, 1/delta) against ||(sum c_a |phi_a dsigma^|^2)^{1/2}||_q.
KhintchineResult khintchine_average(const CapSystem& caps, const Mat& lambda, const Vec& c, double delta,
                                    const std::vector<SignVector>& signs, const EvalOptions& opts = {},
                                    std::uint64_t bootstrap_seed = 1, int bootstrap = 2000);
KhintchineResult khintchine_average(const CapSystem& caps, const Mat& lambda, const Vec& c, double delta, int M,
                                    std::uint64_t seed, const EvalOptions& opts = {});

struct CountingIdentity {
  double lhs = 0;  // sum_beta d_beta^{n/(n-1)}, d_beta = c_{alpha(beta)}
  double rhs = 0;  // delta^{-(n-1)/2} sum_alpha c_alpha^{n/(n-1)}
  double residual = 0;
  int min_children = 0, max_children = 0;
};

CountingIdentity counting_identity(int n, const Vec& c, const std::vector<int>& parent_map, double delta);

struct Rational {
  long long p = 0, q = 1;

  Rational() = default;
  Rational(long long p_, long long q_ = 1) : p(p_), q(q_) {
    if (q < 0) p = -p, q = -q;
    long long g = std::gcd(p < 0 ? -p : p, q);
    if (g > 1) p /= g, q /= g;
  }
  double value() const { return double(p) / double(q); }
  friend Rational operator+(Rational a, Rational b) { return {a.p * b.q + b.p * a.q, a.q * b.q}; }
  friend Rational operator-(Rational a, Rational b) { return {a.p * b.q - b.p * a.q, a.q * b.q}; }
  friend Rational operator*(Rational a, Rational b) { return {a.p * b.p, a.q * b.q}; }
  friend bool operator==(Rational a, Rational b) { return a.p == b.p && a.q == b.q; }
  std::string str() const { return std::to_string(p) + "/" + std::to_string(q); }
};

// delta exponents of the assembled bound: (n-1) from the two main terms,
// -(n-1)^2/(2n) from counting, -(n+1)(n-1)/n from the bush, against the
// target -(n+1)(n-1)/(2n).
struct ExponentAudit {
  int n = 2;
  Rational main_terms, counting, bush, total, target;
  bool ok = false;
};
ExponentAudit exponent_audit(int n);

struct StepRecord {
  std::string name;
  double lhs = 0, rhs = 0, constant = 0;
  bool conjectural = false;

  bool holds(double rel = 1e-9) const { return lhs <= constant * rhs * (1 + rel); }
};

struct TwoScaleTrace {
  int n = 2;
  double delta = 0;
  std::uint64_t seed = 0;
  int tubes = 0, caps = 0, fine_caps = 0, draws = 0;

  double c_ft = 0;
  int ft_worst_cap = -1;
  double a_min = 0, a_max = 0, a_interior_min = 0, a_interior_max = 0, a_oscillation = 0;
  int a_excluded = 0;
  double c_main = 0, c_main_min = 0, c_main_max = 0;
  double c_approx = 0;  // ||g dsigma^|| / ||G dsigma^|| with G the refined density
  double c_lo = 0, leak = 0, c_repl = 0;
  int rbeta_checked = 0;
  double khin_mean = 0, khin_lo = 0, khin_hi = 0, khin_min = 0, khin_max = 0;
  double enlarge = 1, shrink = 1;
  double c_bush = 0;
  double counting_residual = 0, counting_kappa = 1;

  double log_factor = 0;       // (log 1/delta)^{(n-1)/n}
  double delta_power = 0;      // delta^{(n-1) - (n-1)^2/(2n) - (n+1)(n-1)/n}
  double coefficient_norm = 0; // (sum c^{n/(n-1)})^{(n-1)/n}
  double direct_lhs = 0;
  double assembled_bound = 0;

  std::vector<StepRecord> steps;
  std::vector<std::string> certificates;
  std::vector<std::pair<std::string, double>> timing;
  double runtime_s = 0;

  // Product of the step constants in the order the chain uses them.
  double constant_product() const;
  double recompute_bound() const;
  bool bound_holds() const { return direct_lhs <= assembled_bound * (1 + 1e-9); }
};

struct ChainOptions {
  int draws = 16;
  int rbeta_checked = 4;
  std::uint64_t seed = 1;
  EvalOptions eval;
  DualNormOptions tubes;
};

TwoScaleTrace run_chain(const TubeFamily& family, double delta, const ChainOptions& opts = {});

}  // namespace lab
