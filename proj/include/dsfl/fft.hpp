#pragma once

#include <complex>
#include <span>
#include <vector>

namespace dsfl::fft {

using cplx = std::complex<double>;

// Unnormalized forward real-to-complex transform. Returns n/2+1 bins.
std::vector<cplx> forward_real(std::span<const double> x);

// Unnormalized complex transform. forward: exp(-j...), inverse: exp(+j...) without 1/n.
std::vector<cplx> transform(std::span<const cplx> x, bool forward);

// Unnormalized 2-D complex transform of a row-major rows x cols grid.
std::vector<cplx> transform_2d(std::span<const cplx> x, std::size_t rows, std::size_t cols, bool forward);

bool is_power_of_two(std::size_t n);

} // namespace dsfl::fft
