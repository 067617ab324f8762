#pragma once

#include <span>
#include <vector>

#include "parahom/lattice.hpp"

namespace parahom::fft {

// In-place complex DFT over a row-major grid with the given dims, applied to
// `howmany` contiguous blocks. Forward uses e^{-i k x}; backward is unnormalized.
// Plans are cached process-wide; execution is thread-safe.
void forward(std::span<cplx> data, const std::vector<int>& dims, int howmany = 1);
void backward(std::span<cplx> data, const std::vector<int>& dims, int howmany = 1);

// Angular frequency 2πk/L of index k along an axis of length L, folded to (-π, π].
double frequency(int k, int L) noexcept;

}  // namespace parahom::fft
