#pragma once

#include <complex>
#include <cstddef>
#include <numbers>
#include <stdexcept>
#include <vector>

namespace conetomo {

namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

// Iterative radix-2 Cooley-Tukey; sign = -1 forward, +1 inverse (unnormalized).
inline void fft_pow2(std::vector<std::complex<double>>& a, int sign) {
    const std::size_t n = a.size();
    for (std::size_t i = 1, j = 0; i < n; ++i) {
        std::size_t bit = n >> 1;
        for (; j & bit; bit >>= 1) j ^= bit;
        j ^= bit;
        if (i < j) std::swap(a[i], a[j]);
    }
    for (std::size_t len = 2; len <= n; len <<= 1) {
        const double ang = sign * 2.0 * std::numbers::pi / static_cast<double>(len);
        const std::complex<double> wl(std::cos(ang), std::sin(ang));
        for (std::size_t i = 0; i < n; i += len) {
            std::complex<double> w(1.0, 0.0);
            for (std::size_t j = 0; j < len / 2; ++j) {
                const auto u = a[i + j];
                const auto v = a[i + j + len / 2] * w;
                a[i + j] = u + v;
                a[i + j + len / 2] = u - v;
                w *= wl;
            }
        }
    }
}

}  // namespace detail

/// In-place DFT, any length: radix-2 when possible, Bluestein otherwise.
/// Convention: forward sum_j a_j e^{-2*pi*i*jk/n}; inverse divides by n.
inline void fft(std::vector<std::complex<double>>& a, bool inverse = false) {
    const std::size_t n = a.size();
    if (n <= 1) return;
    const int sign = inverse ? +1 : -1;
    if (detail::is_pow2(n)) {
        detail::fft_pow2(a, sign);
    } else {
        // Bluestein: chirp-z via a power-of-two convolution.
        std::size_t m = 1;
        while (m < 2 * n - 1) m <<= 1;
        std::vector<std::complex<double>> u(m), v(m);
        std::vector<std::complex<double>> chirp(n);
        for (std::size_t j = 0; j < n; ++j) {
            // j^2 mod 2n keeps the angle argument small.
            const double ang = sign * std::numbers::pi *
                               static_cast<double>((j * j) % (2 * n)) / static_cast<double>(n);
            chirp[j] = std::complex<double>(std::cos(ang), std::sin(ang));
        }
        for (std::size_t j = 0; j < n; ++j) u[j] = a[j] * chirp[j];
        v[0] = std::conj(chirp[0]);
        for (std::size_t j = 1; j < n; ++j) v[j] = v[m - j] = std::conj(chirp[j]);
        detail::fft_pow2(u, -1);
        detail::fft_pow2(v, -1);
        for (std::size_t j = 0; j < m; ++j) u[j] *= v[j];
        detail::fft_pow2(u, +1);
        const double scale = 1.0 / static_cast<double>(m);
        for (std::size_t j = 0; j < n; ++j) a[j] = u[j] * chirp[j] * scale;
    }
    if (inverse) {
        const double scale = 1.0 / static_cast<double>(n);
        for (auto& x : a) x *= scale;
    }
}

}  // namespace conetomo
