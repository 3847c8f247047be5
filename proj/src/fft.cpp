#include "lab/fft.hpp"

#include <fftw3.h>

#include <mutex>

namespace lab {

namespace {

// fftw planning is not thread safe
std::mutex& plan_mutex() {
  static std::mutex m;
  return m;
}

}  // namespace

int fft_size(int m) {
  for (int s = std::max(m, 2);; ++s) {
    int r = s;
    for (int p : {2, 3, 5, 7})
      while (r % p == 0) r /= p;
    if (r == 1 && s % 2 == 0) return s;
  }
}

void fft_inplace(cplx* data, const std::vector<int>& dims, int sign) {
  auto* p = reinterpret_cast<fftw_complex*>(data);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(plan_mutex());
    plan = fftw_plan_dft(static_cast<int>(dims.size()), dims.data(), p, p, sign < 0 ? FFTW_FORWARD : FFTW_BACKWARD,
                         FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  std::lock_guard<std::mutex> lock(plan_mutex());
  fftw_destroy_plan(plan);
}

}  // namespace lab
