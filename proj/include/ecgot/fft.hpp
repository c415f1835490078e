#pragma once

// Complex FFT for arbitrary lengths: iterative radix-2 for powers of two,
// Bluestein's chirp-z reduction otherwise.

#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace ecgot {
namespace detail {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

inline void fft_pow2(std::vector<std::complex<double>>& a, bool inverse) {
  const std::size_t n = a.size();
  if (n < 2) return;
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  constexpr double pi = 3.14159265358979323846264338327950288;
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = (inverse ? 2.0 : -2.0) * pi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const auto u = a[i + k];
        const auto v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
  if (inverse)
    for (auto& x : a) x /= static_cast<double>(n);
}

}  // namespace detail

/// Discrete Fourier transform of arbitrary length (Bluestein when the
/// length is not a power of two).
inline std::vector<std::complex<double>> fft(
    std::vector<std::complex<double>> x, bool inverse = false) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("fft: empty input");
  if (detail::is_pow2(n)) {
    detail::fft_pow2(x, inverse);
    return x;
  }

  // Bluestein: X_k = conj(w_k) * (a * b)_k with a_n = x_n * w_n,
  // w_n = exp(-i*pi*n^2/N), b the chirp correlator.
  constexpr double pi = 3.14159265358979323846264338327950288;
  const double sign = inverse ? 1.0 : -1.0;
  std::size_t m = 1;
  while (m < 2 * n - 1) m <<= 1;
  std::vector<std::complex<double>> a(m), b(m);
  std::vector<std::complex<double>> w(n);
  for (std::size_t i = 0; i < n; ++i) {
    // reduce i^2 mod 2N to keep the angle computation accurate
    const std::uint64_t sq = (static_cast<std::uint64_t>(i) * i) % (2 * n);
    const double ang = sign * pi * static_cast<double>(sq) / static_cast<double>(n);
    w[i] = {std::cos(ang), std::sin(ang)};
    a[i] = x[i] * w[i];
    b[i] = std::conj(w[i]);
    if (i != 0) b[m - i] = std::conj(w[i]);
  }
  detail::fft_pow2(a, false);
  detail::fft_pow2(b, false);
  for (std::size_t i = 0; i < m; ++i) a[i] *= b[i];
  detail::fft_pow2(a, true);
  std::vector<std::complex<double>> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * w[i];
  if (inverse)
    for (auto& v : out) v /= static_cast<double>(n);
  return out;
}

inline std::vector<std::complex<double>> fft_real(
    const std::vector<double>& x) {
  std::vector<std::complex<double>> cx(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) cx[i] = {x[i], 0.0};
  return fft(std::move(cx));
}

}  // namespace ecgot
