#include "lab/shell_multiplier.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <limits>
#include <random>

#include "lab/fft.hpp"

namespace lab {

namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::vector<int> dims_of(const PeriodicField& f) { return std::vector<int>(f.n, f.m); }

// Lattice frequency of a flat FFT bin.
void bin_frequency(const PeriodicField& f, std::size_t bin, Vec& xi) {
  for (int d = f.n - 1; d >= 0; --d) {
    int k = static_cast<int>(bin % f.m);
    bin /= f.m;
    xi(d) = (k < f.m / 2 ? k : k - f.m) / f.P;
  }
}

void check_resolved(const PeriodicField& f, double delta) {
  f.validate();
  require(delta > 0 && delta < 1, "delta must be in (0,1)");
  if (1.0 / f.P > delta / 8 * (1 + 1e-12))
    throw DomainError("unresolved shell: lattice spacing 1/P = " + std::to_string(1.0 / f.P) + " exceeds delta/8");
  if (f.m / 2.0 / f.P <= 1 + delta) throw DomainError("unresolved shell: Nyquist frequency below 1 + delta");
}

double squared_radius(const PeriodicField& f, Eigen::Index i) {
  double s = 0;
  for (int d = 0; d < f.n; ++d) {
    double x = (static_cast<double>(i % f.m) - f.m / 2) * f.spacing();
    s += x * x;
    i /= f.m;
  }
  return s;
}

CVec forward(const PeriodicField& f) {
  CVec F = f.values;
  fft_inplace(F.data(), dims_of(f), -1);
  return F;
}

// Shell bins with the radial factor, split by cap.
struct CapTable {
  std::vector<std::vector<std::size_t>> bin;
  std::vector<std::vector<double>> weight;
};

CapTable cap_table(const PeriodicField& f, const CapSystem& caps, double delta, const ShellProfile& profile) {
  require(caps.dim() == f.n, "cap system dimension differs from the field");
  CapTable t;
  t.bin.resize(caps.size());
  t.weight.resize(caps.size());
  Vec xi(f.n);
  std::vector<std::pair<int, double>> b;
  const std::size_t total = f.count();
  for (std::size_t i = 0; i < total; ++i) {
    bin_frequency(f, i, xi);
    double r = xi.norm();
    if (std::abs(r - 1) >= delta) continue;
    double w = profile((r - 1) / delta);
    if (w == 0) continue;
    caps.bumps(xi / r, b);
    for (auto [a, phi] : b) {
      t.bin[a].push_back(i);
      t.weight[a].push_back(w * phi);
    }
  }
  return t;
}

double default_q(int n) { return 2.0 * n / (n - 1); }

}  // namespace

PeriodicField PeriodicField::zeros(int n, double P, int m) {
  PeriodicField f;
  f.n = n;
  f.P = P;
  f.m = m;
  f.validate();
  f.values = CVec::Zero(f.count());
  return f;
}

Eigen::Index PeriodicField::count() const {
  Eigen::Index c = 1;
  for (int d = 0; d < n; ++d) c *= m;
  return c;
}

Vec PeriodicField::point(Eigen::Index i) const {
  Vec x(n);
  for (int d = n - 1; d >= 0; --d) {
    x(d) = (static_cast<double>(i % m) - m / 2) * spacing();
    i /= m;
  }
  return x;
}

void PeriodicField::validate() const {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  require(P > 0, "torus side must be positive");
  require(m >= 2 && m % 2 == 0, "samples per side must be even");
  check_budget(std::pow(double(m), n) * 16.0 * 3, "periodic field");
  if (values.size()) require(values.size() == count(), "periodic field: value count mismatch");
}

TorusSpec default_torus(int n, double delta, double side_factor) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  require(delta > 0 && delta < 1, "delta must be in (0,1)");
  TorusSpec t;
  t.P = side_factor / delta;
  t.m = fft_size(static_cast<int>(std::ceil(2 * t.P * (1 + delta))) + 2);
  return t;
}

PeriodicField random_shell_field(int n, double delta, const TorusSpec& torus, std::uint64_t seed,
                                 const std::function<bool(const Vec&)>& keep) {
  PeriodicField f = PeriodicField::zeros(n, torus.P, torus.m);
  check_resolved(f, delta);
  std::mt19937_64 gen(derive_seed(seed, 0x5e11));
  Vec xi(n);
  double cnt = 0;
  const std::size_t total = f.count();
  for (std::size_t i = 0; i < total; ++i) {
    bin_frequency(f, i, xi);
    if (std::abs(xi.norm() - 1) > delta) continue;
    double a = 2 * uniform01(gen) - 1, b = 2 * uniform01(gen) - 1;
    if (keep && !keep(xi)) continue;
    f.values(i) = cplx(a, b);
    cnt += 1;
  }
  fft_inplace(f.values.data(), dims_of(f), +1);
  if (cnt > 0) f.values /= std::sqrt(cnt);
  return f;
}

PeriodicField apply_sdelta(const PeriodicField& f, double delta, const ShellProfile& profile) {
  check_resolved(f, delta);
  PeriodicField out = f;
  out.values = forward(f);
  Vec xi(f.n);
  const std::size_t total = f.count();
  for (std::size_t i = 0; i < total; ++i) {
    bin_frequency(f, i, xi);
    out.values(i) *= profile((xi.norm() - 1) / delta) / double(total);
  }
  fft_inplace(out.values.data(), dims_of(f), +1);
  return out;
}

PeriodicField apply_cap_multiplier(const PeriodicField& f, const CapSystem& caps, int a, double delta,
                                   const ShellProfile& profile) {
  check_resolved(f, delta);
  require(a >= 0 && a < caps.size(), "cap index out of range");
  CapTable t = cap_table(f, caps, delta, profile);
  CVec F = forward(f);
  PeriodicField out = PeriodicField::zeros(f.n, f.P, f.m);
  const double scale = 1.0 / double(f.count());
  for (std::size_t j = 0; j < t.bin[a].size(); ++j) out.values(t.bin[a][j]) = F(t.bin[a][j]) * t.weight[a][j] * scale;
  fft_inplace(out.values.data(), dims_of(f), +1);
  return out;
}

Vec cap_lr_sum(const PeriodicField& f, const CapSystem& caps, double delta, double r, const ShellProfile& profile) {
  check_resolved(f, delta);
  require(r >= 1 && std::isfinite(r), "l^r exponent must be finite and >= 1");
  CapTable t = cap_table(f, caps, delta, profile);
  CVec F = forward(f);
  const Eigen::Index total = f.count();
  const double scale = 1.0 / double(total);
  Vec acc = Vec::Zero(total);
  CVec buf(total);
  for (int a = 0; a < caps.size(); ++a) {
    if (t.bin[a].empty()) continue;
    buf.setZero();
    for (std::size_t j = 0; j < t.bin[a].size(); ++j) buf(t.bin[a][j]) = F(t.bin[a][j]) * t.weight[a][j] * scale;
    fft_inplace(buf.data(), dims_of(f), +1);
    if (r == 2) {
      acc += buf.cwiseAbs2();
    } else if (r == 1) {
      acc += buf.cwiseAbs();
    } else {
#pragma omp parallel for schedule(static)
      for (Eigen::Index i = 0; i < total; ++i) acc(i) += std::pow(std::abs(buf(i)), r);
    }
  }
  if (r == 2) return acc.cwiseSqrt();
  if (r == 1) return acc;
  return acc.array().pow(1.0 / r).matrix();
}

double torus_norm(const PeriodicField& f, const Vec& v, double q, double radius) {
  require(q >= 1, "q must be >= 1");
  require(v.size() == f.count(), "value count mismatch");
  const bool all = std::isinf(radius);
  const double r2 = radius * radius;
  const double hn = std::pow(f.spacing(), f.n);
  double acc = 0, mx = 0;
  const Eigen::Index B = 4096;
  for (Eigen::Index b = 0; b < v.size(); b += B) {
    double part = 0;
    for (Eigen::Index i = b; i < std::min(v.size(), b + B); ++i) {
      if (!all && squared_radius(f, i) > r2) continue;
      if (std::isinf(q))
        mx = std::max(mx, v(i));
      else
        part += std::pow(v(i), q);
    }
    acc += part;
  }
  return std::isinf(q) ? mx : std::pow(acc * hn, 1.0 / q);
}

double decoupling_r(int n, double q) {
  require(n >= 2, "dimension must be at least 2");
  if (!(q >= 2)) throw DomainError("invalid (q, r): q must be >= 2");
  if (std::isinf(q)) return 1.0;
  if (q <= default_q(n)) return 2.0;
  double rp = q * (n - 1) / n;
  return rp / (rp - 1);
}

RatioReport decoupling_ratio(const PeriodicField& f, const CapSystem& caps, double delta, double q, double r,
                             bool local, const ShellProfile& profile) {
  auto t0 = std::chrono::steady_clock::now();
  if (!(q >= 2)) throw DomainError("invalid (q, r): q must be >= 2");
  if (r <= 0) r = decoupling_r(f.n, q);
  if (!(r >= 1)) throw DomainError("invalid (q, r): r must be >= 1");
  if (std::isinf(q) && r != 1) throw DomainError("invalid (q, r): q = infinity takes r = 1");
  check_resolved(f, delta);
  double radius = std::numeric_limits<double>::infinity();
  if (local) {
    require(f.P >= 4 / delta * (1 - 1e-12), "local ratio needs P >= 4/delta");
    radius = 1 / delta;
  }
  RatioReport rep;
  rep.module = "shell_multiplier";
  rep.op = "decoupling_ratio";
  rep.n = f.n;
  rep.delta = delta;
  rep.q = q;
  rep.r = r;
  rep.method = local ? "fft/local" : "fft/global";
  rep.lhs = torus_norm(f, apply_sdelta(f, delta, profile).values.cwiseAbs(), q, radius);
  rep.rhs = torus_norm(f, cap_lr_sum(f, caps, delta, r, profile), q, radius);
  rep.finish();
  rep.runtime_s = seconds_since(t0);
  return rep;
}

RatioReport rlp_multiplier_ratio(const PeriodicField& f, const CapSystem& caps, double delta, double q, bool local,
                                 const ShellProfile& profile) {
  if (q <= 0) q = default_q(f.n);
  RatioReport rep = decoupling_ratio(f, caps, delta, q, 2.0, local, profile);
  rep.op = "rlp_multiplier_ratio";
  return rep;
}

double kernel_tail_fraction(int n, double delta, double K, double side_factor, const ShellProfile& profile) {
  require(side_factor > 2 * K, "torus too small for the tail radius");
  TorusSpec t = default_torus(n, delta, side_factor);
  PeriodicField k = PeriodicField::zeros(n, t.P, t.m);
  check_resolved(k, delta);
  Vec xi(n);
  for (Eigen::Index i = 0; i < k.count(); ++i) {
    bin_frequency(k, i, xi);
    // (-1)^{k_1+...+k_n} centers the kernel at x = 0
    double sgn = 1;
    for (int d = 0; d < n; ++d) sgn *= (std::lround(xi(d) * t.P) % 2 == 0) ? 1 : -1;
    k.values(i) = sgn * profile((xi.norm() - 1) / delta);
  }
  fft_inplace(k.values.data(), dims_of(k), +1);
  const double r2 = K * K / (delta * delta);
  double in = 0, out = 0;
  for (Eigen::Index i = 0; i < k.count(); ++i) {
    double v = std::abs(k.values(i));
    (squared_radius(k, i) <= r2 ? in : out) += v;
  }
  return out / (in + out);
}

void write_pgm(const std::string& path, const PeriodicField& f) {
  f.validate();
  const int m = f.m;
  auto at = [&](int i, int j) {
    Eigen::Index idx = f.n == 2 ? Eigen::Index(i) * m + j : (Eigen::Index(i) * m + j) * m + m / 2;
    return std::abs(f.values(idx));
  };
  double mx = 0;
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) mx = std::max(mx, at(i, j));
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DomainError("cannot write " + path);
  out << "P5\n" << m << " " << m << "\n255\n";
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) {
      double v = mx > 0 ? at(i, j) / mx : 0.0;
      out.put(static_cast<char>(static_cast<unsigned char>(std::lround(255 * v))));
    }
}

}  // namespace lab
