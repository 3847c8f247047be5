#pragma once

#include <functional>
#include <string>

#include "lab/report.hpp"
#include "lab/sphere_caps.hpp"

namespace lab {

// Radial profile of the shell multiplier, supported in [-1, 1].
struct ShellProfile {
  BumpProfile eta;
  double operator()(double t) const { return eta(t); }
};

// Samples of a function on the torus [-P/2, P/2)^n, m per side, row-major
// with the last index fastest. x_j = (j - m/2) P/m; frequencies k/P.
struct PeriodicField {
  int n = 2;
  double P = 0;
  int m = 0;
  CVec values;

  static PeriodicField zeros(int n, double P, int m);
  double spacing() const { return P / m; }
  Eigen::Index count() const;
  Vec point(Eigen::Index i) const;
  void validate() const;
};

struct TorusSpec {
  double P = 0;
  int m = 0;
};

// P = side_factor / delta and the smallest FFT-friendly m whose Nyquist
// frequency clears the shell.
TorusSpec default_torus(int n, double delta, double side_factor = 8);

// Random complex coefficients on lattice frequencies with ||xi| - 1| <= delta,
// optionally thinned by `keep`, transformed to space.
PeriodicField random_shell_field(int n, double delta, const TorusSpec& torus, std::uint64_t seed,
                                 const std::function<bool(const Vec&)>& keep = {});

PeriodicField apply_sdelta(const PeriodicField& f, double delta, const ShellProfile& profile = {});
// Multiplier profile((|xi|-1)/delta) * phi_a(xi/|xi|).
PeriodicField apply_cap_multiplier(const PeriodicField& f, const CapSystem& caps, int a, double delta,
                                   const ShellProfile& profile = {});

// Pointwise (sum_a |S_a f|^r)^{1/r}, one cap at a time.
Vec cap_lr_sum(const PeriodicField& f, const CapSystem& caps, double delta, double r,
               const ShellProfile& profile = {});

// (sum |v|^q h^n)^{1/q} over the torus, or over |x| <= radius when finite.
double torus_norm(const PeriodicField& layout, const Vec& absvals, double q,
                  double radius = std::numeric_limits<double>::infinity());

// The l^r exponent paired with q: r = 2 for q <= 2n/(n-1), else r' = q(n-1)/n.
double decoupling_r(int n, double q);

// lhs = ||S^delta f||_q, rhs = ||(sum_a |S_a f|^2)^{1/2}||_q; `local`
// restricts both to |x| <= 1/delta. q <= 0 means 2n/(n-1).
RatioReport rlp_multiplier_ratio(const PeriodicField& f, const CapSystem& caps, double delta, double q = 0,
                                 bool local = false, const ShellProfile& profile = {});
// rhs with the l^r sum inside the L^q norm; r <= 0 applies decoupling_r.
// q = infinity uses the max with r = 1.
RatioReport decoupling_ratio(const PeriodicField& f, const CapSystem& caps, double delta, double q, double r = 0,
                             bool local = false, const ShellProfile& profile = {});

// Fraction of the L^1 mass of the S^delta kernel outside |x| <= K/delta, on a
// torus of side side_factor/delta.
double kernel_tail_fraction(int n, double delta, double K = 8, double side_factor = 32,
                            const ShellProfile& profile = {});

// |values| as an 8-bit PGM (the z = 0 slice for n = 3), scaled to the max.
void write_pgm(const std::string& path, const PeriodicField& f);

}  // namespace lab
