#include "fedfuse/fft.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace fedfuse::numkit {

namespace {

using cd = std::complex<double>;

bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

// In-place iterative radix-2 transform; sign is the exponent sign of the
// twiddle factors (-1 forward, +1 inverse). No normalization.
void fft_pow2(std::vector<cd>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const cd wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            cd w(1.0, 0.0);
            for (std::size_t k = 0; k < len / 2; ++k) {
                const cd u = a[i + k];
                const cd v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

// Bluestein's chirp-z reduction: an arbitrary-length DFT becomes a circular
// convolution at the next power of two >= 2n-1, which radix-2 handles.
void fft_bluestein(std::vector<cd>& a, int sign) {
    const std::size_t n = a.size();
    const std::size_t m = next_pow2(2 * n - 1);
    // chirp[k] = exp(sign * i * pi * k^2 / n); k^2 is reduced mod 2n so the
    // trig arguments stay small and accurate for any length.
    std::vector<cd> chirp(n);
    for (std::size_t k = 0; k < n; ++k) {
        const std::size_t k2 = (k * k) % (2 * n);
        const double ang =
            sign * std::numbers::pi * static_cast<double>(k2) / static_cast<double>(n);
        chirp[k] = cd(std::cos(ang), std::sin(ang));
    }
    std::vector<cd> u(m, cd(0.0, 0.0));
    std::vector<cd> v(m, cd(0.0, 0.0));
    for (std::size_t k = 0; k < n; ++k) u[k] = a[k] * chirp[k];
    v[0] = std::conj(chirp[0]);
    for (std::size_t k = 1; k < n; ++k) {
        v[k] = std::conj(chirp[k]);
        v[m - k] = v[k];
    }
    fft_pow2(u, -1);
    fft_pow2(v, -1);
    for (std::size_t k = 0; k < m; ++k) u[k] *= v[k];
    fft_pow2(u, +1);
    const double inv_m = 1.0 / static_cast<double>(m);
    for (std::size_t k = 0; k < n; ++k) a[k] = u[k] * inv_m * chirp[k];
}

void fft_1d(std::vector<cd>& a, int sign) {
    if (a.size() <= 1) return;
    if (is_pow2(a.size())) {
        fft_pow2(a, sign);
    } else {
        fft_bluestein(a, sign);
    }
}

// Row-column decomposition of the 2-D transform on an h x w buffer.
void fft_2d(std::vector<cd>& buf, std::size_t h, std::size_t w, int sign) {
    std::vector<cd> line;
    line.reserve(std::max(h, w));
    for (std::size_t r = 0; r < h; ++r) {
        line.assign(buf.begin() + static_cast<std::ptrdiff_t>(r * w),
                    buf.begin() + static_cast<std::ptrdiff_t>((r + 1) * w));
        fft_1d(line, sign);
        std::copy(line.begin(), line.end(),
                  buf.begin() + static_cast<std::ptrdiff_t>(r * w));
    }
    for (std::size_t c = 0; c < w; ++c) {
        line.resize(h);
        for (std::size_t r = 0; r < h; ++r) line[r] = buf[r * w + c];
        fft_1d(line, sign);
        for (std::size_t r = 0; r < h; ++r) buf[r * w + c] = line[r];
    }
}

void require_plane(const Shape& s, const char* who) {
    if (s.size() != 2 || s[0] == 0 || s[1] == 0) {
        throw std::invalid_argument(std::string(who) +
                                    ": expected a non-empty h x w plane, got " + shape_str(s));
    }
}

}  // namespace

ComplexTensor fft2(const Tensor& x) {
    require_plane(x.shape(), "fft2");
    const std::size_t h = x.dim(0);
    const std::size_t w = x.dim(1);
    std::vector<cd> buf(h * w);
    for (std::size_t i = 0; i < h * w; ++i) buf[i] = cd(static_cast<double>(x[i]), 0.0);
    fft_2d(buf, h, w, -1);
    ComplexTensor out({h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        out.set(i, static_cast<float>(buf[i].real()), static_cast<float>(buf[i].imag()));
    }
    return out;
}

Tensor ifft2(const ComplexTensor& m, double* imag_residue) {
    require_plane(m.shape(), "ifft2");
    const std::size_t h = m.dim(0);
    const std::size_t w = m.dim(1);
    std::vector<cd> buf(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        buf[i] = cd(static_cast<double>(m.re(i)), static_cast<double>(m.im(i)));
    }
    fft_2d(buf, h, w, +1);
    const double scale = 1.0 / static_cast<double>(h * w);
    Tensor out({h, w});
    double residue = 0.0;
    for (std::size_t i = 0; i < h * w; ++i) {
        out[i] = static_cast<float>(buf[i].real() * scale);
        residue = std::max(residue, std::abs(buf[i].imag() * scale));
    }
    if (imag_residue != nullptr) {
        *imag_residue = residue;
    } else if (residue > 1e-3) {
        std::fprintf(stderr,
                     "ifft2: imaginary residue %.3e on %zux%zu plane (non-Hermitian spectrum)\n",
                     residue, h, w);
    }
    return out;
}

void fft2_inplace(std::vector<cd>& buf, std::size_t h, std::size_t w, int sign) {
    if (buf.size() != h * w || h == 0 || w == 0) {
        throw std::invalid_argument("fft2_inplace: buffer size does not match " +
                                    std::to_string(h) + "x" + std::to_string(w));
    }
    if (sign != -1 && sign != 1) {
        throw std::invalid_argument("fft2_inplace: sign must be -1 or +1");
    }
    fft_2d(buf, h, w, sign);
}

ComplexTensor fft2c(const ComplexTensor& x, bool inverse) {
    require_plane(x.shape(), "fft2c");
    const std::size_t h = x.dim(0);
    const std::size_t w = x.dim(1);
    std::vector<cd> buf(h * w);
    for (std::size_t i = 0; i < h * w; ++i) {
        buf[i] = cd(static_cast<double>(x.re(i)), static_cast<double>(x.im(i)));
    }
    fft_2d(buf, h, w, inverse ? +1 : -1);
    ComplexTensor out({h, w});
    for (std::size_t i = 0; i < h * w; ++i) {
        out.set(i, static_cast<float>(buf[i].real()), static_cast<float>(buf[i].imag()));
    }
    return out;
}

}  // namespace fedfuse::numkit
