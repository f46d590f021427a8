#pragma once

#include <complex>
#include <vector>

#include "fedfuse/tensor.hpp"

namespace fedfuse::numkit {

// 2-D DFT pair over h x w planes, any side length (radix-2 when possible,
// Bluestein otherwise). Convention: the forward transform is unnormalized;
// ifft2 applies the full 1/(h*w) factor.
ComplexTensor fft2(const Tensor& x);

// Real part of the normalized inverse transform. The maximum imaginary
// magnitude left after the inverse is written to *imag_residue when given;
// otherwise a residue above 1e-3 (a non-Hermitian spectrum) is reported as
// a one-line diagnostic on stderr.
Tensor ifft2(const ComplexTensor& m, double* imag_residue = nullptr);

// Unnormalized complex-to-complex transform in either direction; the
// building block behind fft2/ifft2 and the spectral-layer adjoints.
ComplexTensor fft2c(const ComplexTensor& x, bool inverse);

// In-place double-precision transform over an h x w row-major buffer, for
// callers that keep intermediate spectra at full precision. Unnormalized;
// sign -1 is forward, +1 inverse.
void fft2_inplace(std::vector<std::complex<double>>& buf, std::size_t h, std::size_t w, int sign);

}  // namespace fedfuse::numkit
