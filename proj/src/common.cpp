#include "lab/common.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>

namespace lab {

namespace {
std::atomic<std::size_t> g_budget{0};
}

void require(bool cond, const std::string& msg) {
  if (!cond) throw DomainError(msg);
}

std::size_t memory_budget() {
  std::size_t b = g_budget.load();
  if (b) return b;
  if (const char* env = std::getenv("LAB_MEM_BUDGET_BYTES")) {
    char* end = nullptr;
    unsigned long long v = std::strtoull(env, &end, 10);
    if (end != env && v > 0) return static_cast<std::size_t>(v);
  }
  return std::size_t(2) << 30;
}

void set_memory_budget(std::size_t bytes) { g_budget.store(bytes); }

void check_budget(double bytes, const std::string& what) {
  if (bytes > static_cast<double>(memory_budget()))
    throw BudgetError(what + " needs " + std::to_string(static_cast<long long>(bytes)) +
                          " bytes, budget " + std::to_string(memory_budget()),
                      bytes);
}

double sphere_area(int n) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  return n == 2 ? kTwoPi : 4.0 * kPi;
}

double ball_volume(int n, double r) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  return n == 2 ? kPi * r * r : 4.0 / 3.0 * kPi * r * r * r;
}

double cap_area(int n, double t) {
  require(n == 2 || n == 3, "dimension must be 2 or 3");
  t = std::min(t, kPi);
  return n == 2 ? 2.0 * t : kTwoPi * (1.0 - std::cos(t));
}

double geodesic_distance(const Vec& a, const Vec& b) {
  require(a.size() == b.size(), "geodesic_distance: size mismatch");
  require(std::abs(a.norm() - 1.0) <= 1e-9 && std::abs(b.norm() - 1.0) <= 1e-9,
          "geodesic_distance: non-unit input");
  // atan2 form keeps full accuracy near 0 and pi
  double s = (a - b).norm(), c = (a + b).norm();
  return 2.0 * std::atan2(s, c);
}

std::uint64_t mix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b) {
  return mix64(mix64(mix64(seed) ^ a) ^ (b * 0x9e3779b97f4a7c15ULL));
}

}  // namespace lab
