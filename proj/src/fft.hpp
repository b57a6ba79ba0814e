#pragma once

#include <complex>
#include <span>

namespace gpdf::detail {

/// Unnormalized in-place complex DFT over a d-dimensional cube of side n.
/// sign = -1 is the forward transform.  Plans are cached per shape; execution
/// is thread-safe.
void fft_inplace(std::span<std::complex<double>> data, int dimension, int n, int sign);

}  // namespace gpdf::detail
