#pragma once

// Brute-force reference implementations used only by tests. These stay
// deliberately naive and independent of the library kernels they check.

#include <cmath>
#include <cstdint>

#include "pansharp/rng.hpp"
#include "pansharp/tensor.hpp"

namespace pansharp::testing {

template <typename T>
Tensor<T> random_tensor(Shape shape, Rng& rng, double lo = -1.0,
                        double hi = 1.0) {
  Tensor<T> t(shape);
  for (int64_t i = 0; i < t.size(); ++i)
    t[i] = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

// Quadruple-loop cross-correlation with zero padding.
template <typename T>
Tensor<T> conv2d_naive(const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& bias, int stride, int padding) {
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(0), KH = w.extent(2), KW = w.extent(3);
  const int Ho = (H + 2 * padding - KH) / stride + 1;
  const int Wo = (W + 2 * padding - KW) / stride + 1;
  Tensor<T> out({B, Cout, Ho, Wo});
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < Cout; ++oc)
      for (int oh = 0; oh < Ho; ++oh)
        for (int ow = 0; ow < Wo; ++ow) {
          double acc = bias[oc];
          for (int ic = 0; ic < Cin; ++ic)
            for (int kh = 0; kh < KH; ++kh)
              for (int kw = 0; kw < KW; ++kw) {
                const int ih = oh * stride + kh - padding;
                const int iw = ow * stride + kw - padding;
                if (ih < 0 || ih >= H || iw < 0 || iw >= W) continue;
                acc += static_cast<double>(x.at(b, ic, ih, iw)) *
                       static_cast<double>(w.at(oc, ic, kh, kw));
              }
          out.at(b, oc, oh, ow) = static_cast<T>(acc);
        }
  return out;
}

// Scatter form of the adjoint: every input pixel distributes its value
// through the kernel into a stride-spaced output footprint.
template <typename T>
Tensor<T> conv2d_transpose_naive(const Tensor<T>& x, const Tensor<T>& w,
                                 const Tensor<T>& bias, int stride) {
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(1), K = w.extent(2);
  Tensor<T> out({B, Cout, H * stride, W * stride});
  for (int b = 0; b < B; ++b)
    for (int oc = 0; oc < Cout; ++oc)
      for (int oh = 0; oh < H * stride; ++oh)
        for (int ow = 0; ow < W * stride; ++ow)
          out.at(b, oc, oh, ow) = bias[oc];
  for (int b = 0; b < B; ++b)
    for (int ic = 0; ic < Cin; ++ic)
      for (int ih = 0; ih < H; ++ih)
        for (int iw = 0; iw < W; ++iw)
          for (int oc = 0; oc < Cout; ++oc)
            for (int kh = 0; kh < K; ++kh)
              for (int kw = 0; kw < K; ++kw)
                out.at(b, oc, ih * stride + kh, iw * stride + kw) +=
                    x.at(b, ic, ih, iw) * w.at(ic, oc, kh, kw);
  return out;
}

template <typename T>
double max_abs_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    worst = std::max(worst, std::abs(static_cast<double>(a[i]) -
                                     static_cast<double>(b[i])));
  return worst;
}

template <typename T>
double max_rel_diff(const Tensor<T>& a, const Tensor<T>& b) {
  double worst = 0.0;
  for (int64_t i = 0; i < a.size(); ++i) {
    const double av = a[i], bv = b[i];
    const double scale = std::max({std::abs(av), std::abs(bv), 1e-12});
    worst = std::max(worst, std::abs(av - bv) / scale);
  }
  return worst;
}

template <typename T>
double inner_product(const Tensor<T>& a, const Tensor<T>& b) {
  double acc = 0.0;
  for (int64_t i = 0; i < a.size(); ++i)
    acc += static_cast<double>(a[i]) * static_cast<double>(b[i]);
  return acc;
}

}  // namespace pansharp::testing
