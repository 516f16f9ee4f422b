#pragma once

// Deterministic frequency-domain views of a frame: level-1 orthonormal Haar
// decomposition (four subbands) and a DC-centered, log-scaled Fourier
// amplitude spectrum. Pure functions, safe from any thread.

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace grad::freq {

struct FreqError : std::runtime_error {
  explicit FreqError(const std::string& m) : std::runtime_error(m) {}
};

// Plain row-major image plane.
template <class T>
struct Plane {
  int64_t h = 0, w = 0;
  std::vector<T> v;
  Plane() = default;
  Plane(int64_t h_, int64_t w_, T fill = T(0)) : h(h_), w(w_), v(size_t(h_ * w_), fill) {}
  T& at(int64_t y, int64_t x) { return v[y * w + x]; }
  T at(int64_t y, int64_t x) const { return v[y * w + x]; }
};

// Analysis filters of the orthonormal Haar pair: phi = (1,1)/sqrt2,
// psi = (1,-1)/sqrt2. phi.phi = psi.psi = 1, phi.psi = 0.
template <class T>
struct WaveletKernel {
  T lo[2] = {T(M_SQRT1_2), T(M_SQRT1_2)};
  T hi[2] = {T(M_SQRT1_2), T(-M_SQRT1_2)};
};

template <class T>
struct Subbands {
  Plane<T> a, lz, zl, zz;  // approximation, horizontal, vertical, diagonal
};

namespace detail {

// Reflect-pad the last row/column when a dimension is odd.
template <class T>
Plane<T> pad_even(const Plane<T>& x) {
  if (x.h % 2 == 0 && x.w % 2 == 0) return x;
  Plane<T> p(x.h + x.h % 2, x.w + x.w % 2);
  for (int64_t y = 0; y < p.h; ++y)
    for (int64_t xq = 0; xq < p.w; ++xq)
      p.at(y, xq) = x.at(std::min(y, x.h - 1), std::min(xq, x.w - 1));
  return p;
}

}  // namespace detail

// Separable level-1 analysis. Output subbands are H/2 x W/2.
template <class T>
Subbands<T> dwt2_haar(const Plane<T>& image, const WaveletKernel<T>& k = {}) {
  if (image.h < 1 || image.w < 1) throw FreqError("dwt2_haar: empty image");
  Plane<T> x = detail::pad_even(image);
  const int64_t H = x.h, W = x.w, Ho = H / 2, Wo = W / 2;

  // columns first: low/high pass along rows of pixels (vertical direction)
  Plane<T> lo(Ho, W), hi(Ho, W);
  for (int64_t y = 0; y < Ho; ++y)
    for (int64_t xq = 0; xq < W; ++xq) {
      const T a = x.at(2 * y, xq), b = x.at(2 * y + 1, xq);
      lo.at(y, xq) = k.lo[0] * a + k.lo[1] * b;
      hi.at(y, xq) = k.hi[0] * a + k.hi[1] * b;
    }
  Subbands<T> s{Plane<T>(Ho, Wo), Plane<T>(Ho, Wo), Plane<T>(Ho, Wo), Plane<T>(Ho, Wo)};
  for (int64_t y = 0; y < Ho; ++y)
    for (int64_t xq = 0; xq < Wo; ++xq) {
      const T la = lo.at(y, 2 * xq), lb = lo.at(y, 2 * xq + 1);
      const T ha = hi.at(y, 2 * xq), hb = hi.at(y, 2 * xq + 1);
      s.a.at(y, xq) = k.lo[0] * la + k.lo[1] * lb;
      s.lz.at(y, xq) = k.hi[0] * la + k.hi[1] * lb;  // horizontal detail
      s.zl.at(y, xq) = k.lo[0] * ha + k.lo[1] * hb;  // vertical detail
      s.zz.at(y, xq) = k.hi[0] * ha + k.hi[1] * hb;  // diagonal detail
    }
  return s;
}

// Exact synthesis inverse of dwt2_haar (even-sized originals).
template <class T>
Plane<T> idwt2_haar(const Subbands<T>& s, const WaveletKernel<T>& k = {}) {
  const int64_t Ho = s.a.h, Wo = s.a.w;
  for (const Plane<T>* p : {&s.lz, &s.zl, &s.zz})
    if (p->h != Ho || p->w != Wo) throw FreqError("idwt2_haar: subband shape mismatch");

  Plane<T> lo(Ho, 2 * Wo), hi(Ho, 2 * Wo);
  for (int64_t y = 0; y < Ho; ++y)
    for (int64_t xq = 0; xq < Wo; ++xq) {
      lo.at(y, 2 * xq) = k.lo[0] * s.a.at(y, xq) + k.hi[0] * s.lz.at(y, xq);
      lo.at(y, 2 * xq + 1) = k.lo[1] * s.a.at(y, xq) + k.hi[1] * s.lz.at(y, xq);
      hi.at(y, 2 * xq) = k.lo[0] * s.zl.at(y, xq) + k.hi[0] * s.zz.at(y, xq);
      hi.at(y, 2 * xq + 1) = k.lo[1] * s.zl.at(y, xq) + k.hi[1] * s.zz.at(y, xq);
    }
  Plane<T> out(2 * Ho, 2 * Wo);
  for (int64_t y = 0; y < Ho; ++y)
    for (int64_t xq = 0; xq < 2 * Wo; ++xq) {
      out.at(2 * y, xq) = k.lo[0] * lo.at(y, xq) + k.hi[0] * hi.at(y, xq);
      out.at(2 * y + 1, xq) = k.lo[1] * lo.at(y, xq) + k.hi[1] * hi.at(y, xq);
    }
  return out;
}

namespace detail {

inline bool is_pow2(int64_t n) { return n > 0 && (n & (n - 1)) == 0; }

inline int64_t next_pow2(int64_t n) {
  int64_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// In-place iterative radix-2 FFT over a stride-able view.
template <class T>
void fft_radix2(std::complex<T>* a, int64_t n, int64_t stride) {
  // bit-reversal permutation
  for (int64_t i = 1, j = 0; i < n; ++i) {
    int64_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i * stride], a[j * stride]);
  }
  for (int64_t len = 2; len <= n; len <<= 1) {
    const T ang = T(-2.0 * M_PI) / T(len);
    const std::complex<T> wl(std::cos(ang), std::sin(ang));
    for (int64_t i = 0; i < n; i += len) {
      std::complex<T> w(1, 0);
      for (int64_t j = 0; j < len / 2; ++j) {
        auto u = a[(i + j) * stride];
        auto v = a[(i + j + len / 2) * stride] * w;
        a[(i + j) * stride] = u + v;
        a[(i + j + len / 2) * stride] = u - v;
        w *= wl;
      }
    }
  }
}

}  // namespace detail

// Raw (unnormalized) 2D amplitude |F(p,q)|, same size as the padded input.
template <class T>
Plane<T> fft2_amplitude_raw(const Plane<T>& image, bool* padded = nullptr) {
  if (image.h < 1 || image.w < 1) throw FreqError("fft2_amplitude: non-positive dimensions");
  const int64_t H = detail::next_pow2(image.h), W = detail::next_pow2(image.w);
  if (padded) *padded = (H != image.h || W != image.w);
  std::vector<std::complex<T>> buf(size_t(H * W), std::complex<T>(0, 0));
  for (int64_t y = 0; y < image.h; ++y)
    for (int64_t x = 0; x < image.w; ++x) buf[y * W + x] = std::complex<T>(image.at(y, x), 0);
  for (int64_t y = 0; y < H; ++y) detail::fft_radix2(buf.data() + y * W, W, 1);
  for (int64_t x = 0; x < W; ++x) detail::fft_radix2(buf.data() + x, H, W);
  Plane<T> amp(H, W);
  for (int64_t i = 0; i < H * W; ++i) amp.v[i] = std::abs(buf[i]);
  return amp;
}

// DC-centered, log(1+.)-scaled amplitude normalized by its per-frame maximum.
// A zero image maps to zeros.
template <class T>
Plane<T> fft2_amplitude(const Plane<T>& image) {
  Plane<T> amp = fft2_amplitude_raw(image);
  const int64_t H = amp.h, W = amp.w;
  Plane<T> out(H, W);
  for (int64_t y = 0; y < H; ++y)
    for (int64_t x = 0; x < W; ++x)
      out.at((y + H / 2) % H, (x + W / 2) % W) = std::log1p(amp.at(y, x));
  T mx = T(0);
  for (T v : out.v) mx = std::max(mx, v);
  if (mx > T(0))
    for (T& v : out.v) v /= mx;
  return out;
}

// Frame views: spatial passthrough, Haar subbands and Fourier amplitude of
// the luminance channel.
template <class T>
struct FrameViews {
  std::vector<T> spatial;  // [3, H, W]
  std::vector<T> wavelet;  // [4, H/2, W/2], subband order (A, LZ, ZL, ZZ)
  std::vector<T> fourier;  // [1, H, W]
  int64_t h = 0, w = 0;
};

template <class T>
FrameViews<T> disentangle_frame(const T* rgb, int64_t channels, int64_t h, int64_t w) {
  if (channels != 3) throw FreqError("disentangle_frame: expected 3 channels, got " +
                                     std::to_string(channels));
  FrameViews<T> out;
  out.h = h;
  out.w = w;
  out.spatial.assign(rgb, rgb + 3 * h * w);

  Plane<T> luma(h, w);
  const int64_t hw = h * w;
  for (int64_t i = 0; i < hw; ++i)
    luma.v[i] = T(0.299) * rgb[i] + T(0.587) * rgb[hw + i] + T(0.114) * rgb[2 * hw + i];

  const Subbands<T> sb = dwt2_haar(luma);
  out.wavelet.reserve(size_t(4 * sb.a.h * sb.a.w));
  for (const Plane<T>* p : {&sb.a, &sb.lz, &sb.zl, &sb.zz})
    out.wavelet.insert(out.wavelet.end(), p->v.begin(), p->v.end());

  const Plane<T> amp = fft2_amplitude(luma);
  out.fourier = amp.v;
  return out;
}

}  // namespace grad::freq
