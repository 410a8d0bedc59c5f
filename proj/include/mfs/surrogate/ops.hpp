#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "mfs/surrogate/architecture.hpp"

// Channel-major (C x H x W) image kernels used by the network.
namespace mfs::surrogate::ops {

/// Unfolds k x k patches (zero padding `pad`) into a matrix with one row per
/// (channel, ky, kx) and one column per output pixel.
template <typename T>
void im2col(const T* in, int channels, int h, int w, int k, int stride, int pad, T* col) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    const T* src = in + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          T* dst = row + static_cast<std::size_t>(oy) * wo;
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) {
            std::fill(dst, dst + wo, T(0));
            continue;
          }
          const T* line = src + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::max(0, pad - kx);
            const int hi = std::max(lo, std::min(wo, w + pad - kx));
            std::fill(dst, dst + lo, T(0));
            std::copy(line + lo + kx - pad, line + hi + kx - pad, dst + lo);
            std::fill(dst + hi, dst + wo, T(0));
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              dst[ox] = ix >= 0 && ix < w ? line[ix] : T(0);
            }
          }
        }
      }
  }
}

/// Adjoint of im2col: scatters columns back and adds into `out`.
template <typename T>
void col2im_add(const T* col, int channels, int h, int w, int k, int stride, int pad, T* out) {
  const int ho = (h + 2 * pad - k) / stride + 1;
  const int wo = (w + 2 * pad - k) / stride + 1;
  const std::size_t plane = static_cast<std::size_t>(ho) * wo;
  for (int c = 0; c < channels; ++c) {
    T* dst = out + static_cast<std::size_t>(c) * h * w;
    for (int ky = 0; ky < k; ++ky)
      for (int kx = 0; kx < k; ++kx) {
        const T* row = col + (static_cast<std::size_t>(c) * k * k + ky * k + kx) * plane;
        for (int oy = 0; oy < ho; ++oy) {
          const int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= h) continue;
          const T* src = row + static_cast<std::size_t>(oy) * wo;
          T* line = dst + static_cast<std::size_t>(iy) * w;
          if (stride == 1) {
            const int lo = std::max(0, pad - kx);
            const int hi = std::min(wo, w + pad - kx);
            for (int ox = lo; ox < hi; ++ox) line[ox + kx - pad] += src[ox];
          } else {
            for (int ox = 0; ox < wo; ++ox) {
              const int ix = ox * stride + kx - pad;
              if (ix >= 0 && ix < w) line[ix] += src[ox];
            }
          }
        }
      }
  }
}

/// 2 x 2 mean pooling of each channel.
template <typename T>
void avgpool2(const T* in, int channels, int h, int w, T* out) {
  const int ho = h / 2, wo = w / 2;
  for (int c = 0; c < channels; ++c) {
    const T* s = in + static_cast<std::size_t>(c) * h * w;
    T* d = out + static_cast<std::size_t>(c) * ho * wo;
    for (int y = 0; y < ho; ++y)
      for (int x = 0; x < wo; ++x) {
        const T* p = s + static_cast<std::size_t>(2 * y) * w + 2 * x;
        d[y * wo + x] = T(0.25) * (p[0] + p[1] + p[w] + p[w + 1]);
      }
  }
}

/// Adjoint of avgpool2, overwriting `din`.
template <typename T>
void avgpool2_backward(const T* dout, int channels, int h, int w, T* din) {
  const int ho = h / 2, wo = w / 2;
  for (int c = 0; c < channels; ++c) {
    const T* s = dout + static_cast<std::size_t>(c) * ho * wo;
    T* d = din + static_cast<std::size_t>(c) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) d[static_cast<std::size_t>(y) * w + x] = T(0.25) * s[(y / 2) * wo + x / 2];
  }
}

/// Nearest-neighbour 2x upsampling; (h, w) is the input size.
template <typename T>
void upsample2(const T* in, int channels, int h, int w, T* out) {
  const int W = 2 * w;
  for (int c = 0; c < channels; ++c) {
    const T* s = in + static_cast<std::size_t>(c) * h * w;
    T* d = out + static_cast<std::size_t>(c) * 4 * h * w;
    for (int y = 0; y < 2 * h; ++y)
      for (int x = 0; x < W; ++x) d[static_cast<std::size_t>(y) * W + x] = s[(y / 2) * w + x / 2];
  }
}

/// Adjoint of upsample2 (sums each 2 x 2 block), overwriting `din`.
template <typename T>
void upsample2_backward(const T* dout, int channels, int h, int w, T* din) {
  const int W = 2 * w;
  for (int c = 0; c < channels; ++c) {
    const T* s = dout + static_cast<std::size_t>(c) * 4 * h * w;
    T* d = din + static_cast<std::size_t>(c) * h * w;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const T* p = s + static_cast<std::size_t>(2 * y) * W + 2 * x;
        d[y * w + x] = p[0] + p[1] + p[W] + p[W + 1];
      }
  }
}

template <typename T>
T sigmoid(T x) {
  return x >= T(0) ? T(1) / (T(1) + std::exp(-x)) : std::exp(x) / (T(1) + std::exp(x));
}

template <typename T>
void activate(Activation a, const T* x, std::size_t n, T* y) {
  if (a == Activation::ReLU) {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] > T(0) ? x[i] : T(0);
  } else {
    for (std::size_t i = 0; i < n; ++i) y[i] = x[i] * sigmoid(x[i]);
  }
}

/// dx = dy * act'(x), elementwise.
template <typename T>
void activate_backward(Activation a, const T* x, const T* dy, std::size_t n, T* dx) {
  if (a == Activation::ReLU) {
    for (std::size_t i = 0; i < n; ++i) dx[i] = x[i] > T(0) ? dy[i] : T(0);
  } else {
    for (std::size_t i = 0; i < n; ++i) {
      const T s = sigmoid(x[i]);
      dx[i] = dy[i] * s * (T(1) + x[i] * (T(1) - s));
    }
  }
}

}  // namespace mfs::surrogate::ops
