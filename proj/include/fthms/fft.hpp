#pragma once

// Minimal complex FFT: iterative radix-2 plus Bluestein's algorithm for
// arbitrary lengths. Only used for moment-table construction, so clarity
// beats raw speed here.

#include "fthms/core.hpp"

namespace fthms {
namespace detail {

inline void fft_pow2(std::vector<cplx>& a, bool inverse) {
    const size_t n = a.size();
    for (size_t i = 1, j = 0; i < n; ++i) {
        size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (size_t len = 2; len <= n; len <<= 1) {
        const double ang = 2.0 * pi / static_cast<double>(len) * (inverse ? 1.0 : -1.0);
        const cplx wl = std::polar(1.0, ang);
        for (size_t i = 0; i < n; i += len) {
            cplx w{1.0, 0.0};
            for (size_t k = 0; k < len / 2; ++k) {
                const cplx u = a[i + k], v = a[i + k + len / 2] * w;
                a[i + k] = u + v;
                a[i + k + len / 2] = u - v;
                w *= wl;
            }
        }
    }
    if (inverse)
        for (auto& v : a) v /= static_cast<double>(n);
}

}  // namespace detail

// Forward transform: X_k = sum_n x_n exp(-2 pi i k n / N). Arbitrary N.
inline std::vector<cplx> fft(std::vector<cplx> x, bool inverse = false) {
    const size_t n = x.size();
    if (n == 0) return x;
    if ((n & (n - 1)) == 0) {
        detail::fft_pow2(x, inverse);
        return x;
    }
    // Bluestein: reduce to a power-of-2 convolution.
    size_t m = 1;
    while (m < 2 * n + 1) m <<= 1;
    std::vector<cplx> a(m, cplx{0.0}), b(m, cplx{0.0});
    std::vector<cplx> chirp(n);
    const double sgn = inverse ? 1.0 : -1.0;
    for (size_t k = 0; k < n; ++k) {
        // exp(sgn * i pi k^2 / n); reduce k^2 mod 2n to keep the angle tame
        const size_t k2 = (k * k) % (2 * n);
        chirp[k] = std::polar(1.0, sgn * pi * static_cast<double>(k2) / static_cast<double>(n));
        a[k] = x[k] * chirp[k];
        b[k] = std::conj(chirp[k]);
        if (k > 0) b[m - k] = std::conj(chirp[k]);
    }
    detail::fft_pow2(a, false);
    detail::fft_pow2(b, false);
    for (size_t k = 0; k < m; ++k) a[k] *= b[k];
    detail::fft_pow2(a, true);
    std::vector<cplx> out(n);
    for (size_t k = 0; k < n; ++k) out[k] = a[k] * chirp[k];
    if (inverse)
        for (auto& v : out) v /= static_cast<double>(n);
    return out;
}

}  // namespace fthms
