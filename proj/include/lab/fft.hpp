#pragma once

#include <vector>

#include "lab/common.hpp"

namespace lab {

// Smallest even 2,3,5,7-smooth integer >= m.
int fft_size(int m);

// In-place unnormalized DFT over a row-major array with the given extents.
// sign = -1 forward (e^{-2 pi i k.x/m}), +1 backward.
void fft_inplace(cplx* data, const std::vector<int>& dims, int sign);

}  // namespace lab
