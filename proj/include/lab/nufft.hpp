#pragma once

#include "lab/common.hpp"

namespace lab {

// Type-1 transform onto the box grid x = h*k, k in [-K,K]^n:
//   F(h k) = sum_j c_j exp(-2 pi i h k . xi_j),  |xi_j| <= 1.
// Gaussian spreading onto a 2x oversampled grid, FFT, deconvolution.
// Output is row-major over (k_0, ..., k_{n-1}), last index fastest.
CVec nufft_type1(const RowMat& nodes, const CVec& strengths, double h, int K, int spread = 12);

double nufft_bytes(int n, int K);

}  // namespace lab
