#pragma once

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string>

namespace lab {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXd;
using CVec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXd;
using CMat = Eigen::MatrixXcd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using IVec = Eigen::VectorXi;

inline constexpr double kPi = std::numbers::pi;
inline constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Bad arguments or violated preconditions.
struct DomainError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

// A numerical self-check did not hold. Maps to exit status 2.
struct CertificationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Allocation would exceed the configured memory budget. Maps to exit status 3.
struct BudgetError : std::runtime_error {
  BudgetError(const std::string& what, double required) : std::runtime_error(what), required(required) {}
  double required;
};

void require(bool cond, const std::string& msg);

// Bytes any single grid allocation may use. Defaults to 2 GiB, or
// LAB_MEM_BUDGET_BYTES when set.
std::size_t memory_budget();
void set_memory_budget(std::size_t bytes);
void check_budget(double bytes, const std::string& what);

double sphere_area(int n);           // sigma(S^{n-1}) for n = 2, 3
double ball_volume(int n, double r);
double cap_area(int n, double t);    // measure of a geodesic cap of radius t

double geodesic_distance(const Vec& a, const Vec& b);

inline Vec cross(const Vec& a, const Vec& b) {
  Eigen::Vector3d c = Eigen::Vector3d(a(0), a(1), a(2)).cross(Eigen::Vector3d(b(0), b(1), b(2)));
  return c;
}

// Seed mixing for per-point and per-trial streams.
std::uint64_t mix64(std::uint64_t x);
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0);

// Uniform double in [0,1) from the top 53 bits, identical on every platform.
template <class Gen>
double uniform01(Gen& g) {
  return static_cast<double>(g() >> 11) * 0x1.0p-53;
}

}  // namespace lab
