#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <string>

#include "pansharp/errors.hpp"
#include "pansharp/parallel.hpp"
#include "pansharp/tensor.hpp"

// Dense kernels for the fusion networks. Forward functions return fresh
// tensors; backward functions accumulate (+=) into caller-owned gradient
// tensors so that shared tape nodes sum their contributions.
//
// Determinism: every output element is owned by exactly one worker and its
// contributions are reduced in a fixed loop order, so results are bitwise
// identical for any worker count.

namespace pansharp::ops {

namespace detail {

inline int conv_out_extent(int in, int k, int stride, int padding) {
  return (in + 2 * padding - k) / stride + 1;
}

// First output index whose tap k reads inside [0, in).
inline int out_lo(int k, int padding, int stride) {
  const int d = padding - k;
  return d <= 0 ? 0 : (d + stride - 1) / stride;
}

// Last such output index (inclusive); may come back < out_lo when empty.
inline int out_hi(int in, int k, int padding, int stride, int out) {
  const int t = in - 1 + padding - k;
  if (t < 0) return -1;
  return std::min(out - 1, t / stride);
}

template <typename T>
void check_finite(const Tensor<T>& t, const char* op) {
#ifndef NDEBUG
  if (!t.all_finite())
    throw NumericError(std::string(op) + ": non-finite value in output");
#else
  (void)t;
  (void)op;
#endif
}

// Fixed-order lane-wise sum of a contiguous buffer.
template <typename T>
T plane_sum(const T* p, int64_t n) {
  T lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int64_t j = 0;
  for (; j + 8 <= n; j += 8)
    for (int l = 0; l < 8; ++l) lanes[l] += p[j + l];
  T tail = 0;
  for (; j < n; ++j) tail += p[j];
  return (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) +
         tail;
}

// Dot product with eight independent accumulator lanes so the loop
// vectorizes without reassociating the strict FP order.
template <typename T>
T dot_strided(const T* a, const T* b, int n, int stride_b) {
  T lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int j = 0;
  if (stride_b == 1) {
    for (; j + 8 <= n; j += 8)
      for (int l = 0; l < 8; ++l) lanes[l] += a[j + l] * b[j + l];
  } else {
    for (; j + 8 <= n; j += 8)
      for (int l = 0; l < 8; ++l) lanes[l] += a[j + l] * b[(j + l) * stride_b];
  }
  T tail = 0;
  for (; j < n; ++j) tail += a[j] * b[j * stride_b];
  return (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) +
         tail;
}

// One input row contributing a full 3-tap kernel row to one output row,
// same-size geometry (stride 1, padding 1). Fusing the horizontal taps keeps
// the accumulator traffic per FMA low enough to stay off the store port.
template <typename T>
void row_tap3(T* __restrict__ o, const T* __restrict__ x, int w, T w0, T w1,
              T w2) {
  o[0] += w1 * x[0] + w2 * x[1];
  for (int j = 1; j < w - 1; ++j)
    o[j] += w0 * x[j - 1] + w1 * x[j] + w2 * x[j + 1];
  o[w - 1] += w0 * x[w - 2] + w1 * x[w - 1];
}

template <typename T>
void conv_check(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                int stride, int padding) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw ContractError("conv2d: input and weight must be 4-D, got " +
                        x.shape().str() + " and " + w.shape().str());
  const int kh = w.extent(2), kw = w.extent(3);
  if (kh < 1 || kh > 3 || kw < 1 || kw > 3)
    throw ContractError("conv2d: kernel extents must be in {1,2,3}, got " +
                        w.shape().str());
  if (stride != 1 && stride != 2)
    throw ContractError("conv2d: stride must be 1 or 2, got " +
                        std::to_string(stride));
  if (padding < 0) throw ContractError("conv2d: negative padding");
  if (x.extent(1) != w.extent(1))
    throw ContractError("conv2d: input channels " + x.shape().str() +
                        " do not match weight " + w.shape().str());
  if (bias.ndim() != 1 || bias.extent(0) != w.extent(0))
    throw ContractError("conv2d: bias length " + bias.shape().str() +
                        " does not match output channels of " +
                        w.shape().str());
  if (x.extent(2) + 2 * padding < kh || x.extent(3) + 2 * padding < kw)
    throw ContractError("conv2d: padded input " + x.shape().str() +
                        " smaller than kernel " + w.shape().str());
  if (x.size() == 0) throw ContractError("conv2d: empty input");
}

}  // namespace detail

// Cross-correlation (no kernel flip) with zero padding and per-output-channel
// bias. x: [B,Cin,H,W], w: [Cout,Cin,kh,kw], bias: [Cout].
template <typename T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& bias,
                 int stride, int padding) {
  detail::conv_check(x, w, bias, stride, padding);
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(0), KH = w.extent(2), KW = w.extent(3);
  const int Ho = detail::conv_out_extent(H, KH, stride, padding);
  const int Wo = detail::conv_out_extent(W, KW, stride, padding);
  Tensor<T> out({B, Cout, Ho, Wo});
  const T* xd = x.data();
  const T* wd = w.data();
  const T* bd = bias.data();
  T* od = out.data();
  const int64_t xplane_n = int64_t(H) * W, oplane_n = int64_t(Ho) * Wo;

  const bool same3x3 =
      KH == 3 && KW == 3 && stride == 1 && padding == 1 && W >= 2;

  parallel_for(int64_t(B) * Cout, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const int b = static_cast<int>(i / Cout), oc = static_cast<int>(i % Cout);
      T* oplane = od + i * oplane_n;
      std::fill(oplane, oplane + oplane_n, bd[oc]);
      for (int ic = 0; ic < Cin; ++ic) {
        const T* xplane = xd + (int64_t(b) * Cin + ic) * xplane_n;
        const T* wtap = wd + (int64_t(oc) * Cin + ic) * KH * KW;
        if (same3x3) {
          for (int oh = 0; oh < Ho; ++oh) {
            T* orow = oplane + int64_t(oh) * Wo;
            for (int kh = 0; kh < 3; ++kh) {
              const int ih = oh + kh - 1;
              if (ih < 0 || ih >= H) continue;
              detail::row_tap3(orow, xplane + int64_t(ih) * W, W,
                               wtap[kh * 3], wtap[kh * 3 + 1],
                               wtap[kh * 3 + 2]);
            }
          }
          continue;
        }
        for (int kh = 0; kh < KH; ++kh) {
          const int oh_lo = detail::out_lo(kh, padding, stride);
          const int oh_hi = detail::out_hi(H, kh, padding, stride, Ho);
          for (int kw = 0; kw < KW; ++kw) {
            const T wv = wtap[kh * KW + kw];
            const int ow_lo = detail::out_lo(kw, padding, stride);
            const int ow_hi = detail::out_hi(W, kw, padding, stride, Wo);
            const int n = ow_hi - ow_lo + 1;
            if (n <= 0) continue;
            for (int oh = oh_lo; oh <= oh_hi; ++oh) {
              const int ih = oh * stride + kh - padding;
              const T* __restrict__ xrow = xplane + int64_t(ih) * W +
                                           (ow_lo * stride + kw - padding);
              T* __restrict__ orow = oplane + int64_t(oh) * Wo + ow_lo;
              if (stride == 1) {
                for (int j = 0; j < n; ++j) orow[j] += wv * xrow[j];
              } else {
                for (int j = 0; j < n; ++j) orow[j] += wv * xrow[2 * j];
              }
            }
          }
        }
      }
    }
  });
  detail::check_finite(out, "conv2d");
  return out;
}

// Accumulates gradients of conv2d into *gx, *gw, *gbias (any may be null).
template <typename T>
void conv2d_backward(const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& gout, int stride, int padding,
                     Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gbias) {
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(0), KH = w.extent(2), KW = w.extent(3);
  const int Ho = gout.extent(2), Wo = gout.extent(3);
  const T* xd = x.data();
  const T* wd = w.data();
  const T* gd = gout.data();
  const int64_t xplane_n = int64_t(H) * W, oplane_n = int64_t(Ho) * Wo;

  if (gbias != nullptr) {
    T* gb = gbias->data();
    parallel_for(Cout, [&](int64_t c0, int64_t c1) {
      for (int64_t oc = c0; oc < c1; ++oc) {
        T acc = 0;
        for (int b = 0; b < B; ++b)
          acc += detail::plane_sum(gd + (int64_t(b) * Cout + oc) * oplane_n,
                                   oplane_n);
        gb[oc] += acc;
      }
    });
  }

  if (gw != nullptr) {
    T* gwd = gw->data();
    parallel_for(int64_t(Cout) * Cin, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const int oc = static_cast<int>(i / Cin),
                  ic = static_cast<int>(i % Cin);
        T* gwtap = gwd + i * KH * KW;
        for (int kh = 0; kh < KH; ++kh) {
          const int oh_lo = detail::out_lo(kh, padding, stride);
          const int oh_hi = detail::out_hi(H, kh, padding, stride, Ho);
          for (int kw = 0; kw < KW; ++kw) {
            const int ow_lo = detail::out_lo(kw, padding, stride);
            const int ow_hi = detail::out_hi(W, kw, padding, stride, Wo);
            const int n = ow_hi - ow_lo + 1;
            if (n <= 0) continue;
            T acc = 0;
            for (int b = 0; b < B; ++b) {
              const T* gplane = gd + (int64_t(b) * Cout + oc) * oplane_n;
              const T* xplane = xd + (int64_t(b) * Cin + ic) * xplane_n;
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const int ih = oh * stride + kh - padding;
                const T* xrow = xplane + int64_t(ih) * W +
                                (ow_lo * stride + kw - padding);
                const T* grow = gplane + int64_t(oh) * Wo + ow_lo;
                acc += detail::dot_strided(grow, xrow, n, stride);
              }
            }
            gwtap[kh * KW + kw] += acc;
          }
        }
      }
    });
  }

  if (gx != nullptr) {
    const bool same3x3 =
        KH == 3 && KW == 3 && stride == 1 && padding == 1 && W >= 2;
    T* gxd = gx->data();
    parallel_for(int64_t(B) * Cin, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const int b = static_cast<int>(i / Cin), ic = static_cast<int>(i % Cin);
        T* gxplane = gxd + i * xplane_n;
        for (int oc = 0; oc < Cout; ++oc) {
          const T* gplane = gd + (int64_t(b) * Cout + oc) * oplane_n;
          const T* wtap = wd + (int64_t(oc) * Cin + ic) * KH * KW;
          if (same3x3) {
            // Input gradient is a correlation with the 180-degree-flipped
            // kernel at the same geometry.
            for (int ih = 0; ih < H; ++ih) {
              T* gxrow = gxplane + int64_t(ih) * W;
              for (int kh = 0; kh < 3; ++kh) {
                const int oh = ih - kh + 1;
                if (oh < 0 || oh >= Ho) continue;
                detail::row_tap3(gxrow, gplane + int64_t(oh) * Wo, W,
                                 wtap[kh * 3 + 2], wtap[kh * 3 + 1],
                                 wtap[kh * 3]);
              }
            }
            continue;
          }
          for (int kh = 0; kh < KH; ++kh) {
            const int oh_lo = detail::out_lo(kh, padding, stride);
            const int oh_hi = detail::out_hi(H, kh, padding, stride, Ho);
            for (int kw = 0; kw < KW; ++kw) {
              const T wv = wtap[kh * KW + kw];
              const int ow_lo = detail::out_lo(kw, padding, stride);
              const int ow_hi = detail::out_hi(W, kw, padding, stride, Wo);
              const int n = ow_hi - ow_lo + 1;
              if (n <= 0) continue;
              for (int oh = oh_lo; oh <= oh_hi; ++oh) {
                const int ih = oh * stride + kh - padding;
                T* gxrow = gxplane + int64_t(ih) * W +
                           (ow_lo * stride + kw - padding);
                const T* grow = gplane + int64_t(oh) * Wo + ow_lo;
                if (stride == 1) {
                  for (int j = 0; j < n; ++j) gxrow[j] += wv * grow[j];
                } else {
                  for (int j = 0; j < n; ++j) gxrow[2 * j] += wv * grow[j];
                }
              }
            }
          }
        }
      }
    });
  }
}

namespace detail {

template <typename T>
void conv_transpose_check(const Tensor<T>& x, const Tensor<T>& w,
                          const Tensor<T>& bias, int stride) {
  if (x.ndim() != 4 || w.ndim() != 4)
    throw ContractError("conv2d_transpose: input and weight must be 4-D, got " +
                        x.shape().str() + " and " + w.shape().str());
  if (stride < 1)
    throw ContractError("conv2d_transpose: non-positive stride");
  if (w.extent(2) != stride || w.extent(3) != stride)
    throw ContractError(
        "conv2d_transpose: kernel extents must equal the stride, got " +
        w.shape().str() + " with stride " + std::to_string(stride));
  if (x.extent(1) != w.extent(0))
    throw ContractError("conv2d_transpose: input channels " + x.shape().str() +
                        " do not match weight " + w.shape().str());
  if (bias.ndim() != 1 || bias.extent(0) != w.extent(1))
    throw ContractError("conv2d_transpose: bias length " + bias.shape().str() +
                        " does not match output channels of " +
                        w.shape().str());
  if (x.extent(0) < 1 || x.extent(2) < 1 || x.extent(3) < 1 || x.size() == 0)
    throw ContractError("conv2d_transpose: empty input " + x.shape().str());
}

}  // namespace detail

// Adjoint of a stride-s, kernel s x s convolution, plus bias. With kernel
// extents equal to the stride, every output pixel receives exactly one tap
// per input channel. x: [B,Cin,H,W], w: [Cin,Cout,s,s], output
// [B,Cout,H*s,W*s].
template <typename T>
Tensor<T> conv2d_transpose(const Tensor<T>& x, const Tensor<T>& w,
                           const Tensor<T>& bias, int stride) {
  detail::conv_transpose_check(x, w, bias, stride);
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(1), K = stride;
  const int Ho = H * K, Wo = W * K;
  Tensor<T> out({B, Cout, Ho, Wo});
  const T* xd = x.data();
  const T* wd = w.data();
  const T* bd = bias.data();
  T* od = out.data();
  const int64_t xplane_n = int64_t(H) * W, oplane_n = int64_t(Ho) * Wo;

  parallel_for(int64_t(B) * Cout, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const int b = static_cast<int>(i / Cout), oc = static_cast<int>(i % Cout);
      T* oplane = od + i * oplane_n;
      std::fill(oplane, oplane + oplane_n, bd[oc]);
      for (int ic = 0; ic < Cin; ++ic) {
        const T* xplane = xd + (int64_t(b) * Cin + ic) * xplane_n;
        const T* wtap = wd + (int64_t(ic) * Cout + oc) * K * K;
        for (int kh = 0; kh < K; ++kh) {
          for (int kw = 0; kw < K; ++kw) {
            const T wv = wtap[kh * K + kw];
            for (int ih = 0; ih < H; ++ih) {
              const T* xrow = xplane + int64_t(ih) * W;
              T* orow = oplane + (int64_t(ih) * K + kh) * Wo + kw;
              for (int iw = 0; iw < W; ++iw) orow[iw * K] += wv * xrow[iw];
            }
          }
        }
      }
    }
  });
  detail::check_finite(out, "conv2d_transpose");
  return out;
}

template <typename T>
void conv2d_transpose_backward(const Tensor<T>& x, const Tensor<T>& w,
                               const Tensor<T>& gout, int stride, Tensor<T>* gx,
                               Tensor<T>* gw, Tensor<T>* gbias) {
  const int B = x.extent(0), Cin = x.extent(1), H = x.extent(2),
            W = x.extent(3);
  const int Cout = w.extent(1), K = stride;
  const int Wo = gout.extent(3);
  const T* xd = x.data();
  const T* wd = w.data();
  const T* gd = gout.data();
  const int64_t xplane_n = int64_t(H) * W;
  const int64_t oplane_n = int64_t(gout.extent(2)) * Wo;

  if (gbias != nullptr) {
    T* gb = gbias->data();
    parallel_for(Cout, [&](int64_t c0, int64_t c1) {
      for (int64_t oc = c0; oc < c1; ++oc) {
        T acc = 0;
        for (int b = 0; b < B; ++b)
          acc += detail::plane_sum(gd + (int64_t(b) * Cout + oc) * oplane_n,
                                   oplane_n);
        gb[oc] += acc;
      }
    });
  }

  if (gw != nullptr) {
    T* gwd = gw->data();
    parallel_for(int64_t(Cin) * Cout, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const int ic = static_cast<int>(i / Cout),
                  oc = static_cast<int>(i % Cout);
        T* gwtap = gwd + i * K * K;
        for (int kh = 0; kh < K; ++kh) {
          for (int kw = 0; kw < K; ++kw) {
            T acc = 0;
            for (int b = 0; b < B; ++b) {
              const T* xplane = xd + (int64_t(b) * Cin + ic) * xplane_n;
              const T* gplane = gd + (int64_t(b) * Cout + oc) * oplane_n;
              for (int ih = 0; ih < H; ++ih) {
                const T* xrow = xplane + int64_t(ih) * W;
                const T* grow = gplane + (int64_t(ih) * K + kh) * Wo + kw;
                acc += detail::dot_strided(xrow, grow, W, K);
              }
            }
            gwtap[kh * K + kw] += acc;
          }
        }
      }
    });
  }

  if (gx != nullptr) {
    T* gxd = gx->data();
    parallel_for(int64_t(B) * Cin, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const int b = static_cast<int>(i / Cin), ic = static_cast<int>(i % Cin);
        T* gxplane = gxd + i * xplane_n;
        for (int oc = 0; oc < Cout; ++oc) {
          const T* gplane = gd + (int64_t(b) * Cout + oc) * oplane_n;
          const T* wtap = wd + (int64_t(ic) * Cout + oc) * K * K;
          for (int kh = 0; kh < K; ++kh) {
            for (int kw = 0; kw < K; ++kw) {
              const T wv = wtap[kh * K + kw];
              for (int ih = 0; ih < H; ++ih) {
                T* gxrow = gxplane + int64_t(ih) * W;
                const T* grow = gplane + (int64_t(ih) * K + kh) * Wo + kw;
                for (int iw = 0; iw < W; ++iw) gxrow[iw] += wv * grow[iw * K];
              }
            }
          }
        }
      }
    });
  }
}

// Parametric ReLU with one learnable slope per channel. The input gradient
// at exactly zero is taken from the positive branch.
template <typename T>
Tensor<T> prelu(const Tensor<T>& x, const Tensor<T>& slopes) {
  if (x.ndim() != 4)
    throw ContractError("prelu: input must be 4-D, got " + x.shape().str());
  if (slopes.ndim() != 1 || slopes.extent(0) != x.extent(1))
    throw ContractError("prelu: slope count " + slopes.shape().str() +
                        " does not match channels of " + x.shape().str());
  const int B = x.extent(0), C = x.extent(1);
  const int64_t plane_n = int64_t(x.extent(2)) * x.extent(3);
  Tensor<T> out(x.shape());
  const T* xd = x.data();
  const T* ad = slopes.data();
  T* od = out.data();
  parallel_for(int64_t(B) * C, [&](int64_t i0, int64_t i1) {
    for (int64_t i = i0; i < i1; ++i) {
      const T a = ad[i % C];
      const T* xp = xd + i * plane_n;
      T* op = od + i * plane_n;
      for (int64_t j = 0; j < plane_n; ++j)
        op[j] = xp[j] > T(0) ? xp[j] : a * xp[j];
    }
  });
  detail::check_finite(out, "prelu");
  return out;
}

template <typename T>
void prelu_backward(const Tensor<T>& x, const Tensor<T>& slopes,
                    const Tensor<T>& gout, Tensor<T>* gx, Tensor<T>* gslopes) {
  const int B = x.extent(0), C = x.extent(1);
  const int64_t plane_n = int64_t(x.extent(2)) * x.extent(3);
  const T* xd = x.data();
  const T* ad = slopes.data();
  const T* gd = gout.data();

  if (gx != nullptr) {
    T* gxd = gx->data();
    parallel_for(int64_t(B) * C, [&](int64_t i0, int64_t i1) {
      for (int64_t i = i0; i < i1; ++i) {
        const T a = ad[i % C];
        const T* xp = xd + i * plane_n;
        const T* gp = gd + i * plane_n;
        T* gxp = gxd + i * plane_n;
        for (int64_t j = 0; j < plane_n; ++j)
          gxp[j] += xp[j] >= T(0) ? gp[j] : a * gp[j];
      }
    });
  }

  if (gslopes != nullptr) {
    T* gad = gslopes->data();
    parallel_for(C, [&](int64_t c0, int64_t c1) {
      for (int64_t c = c0; c < c1; ++c) {
        T acc = 0;
        for (int b = 0; b < B; ++b) {
          const T* xp = xd + (int64_t(b) * C + c) * plane_n;
          const T* gp = gd + (int64_t(b) * C + c) * plane_n;
          T lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
          int64_t j = 0;
          for (; j + 8 <= plane_n; j += 8)
            for (int l = 0; l < 8; ++l)
              lanes[l] += xp[j + l] < T(0) ? gp[j + l] * xp[j + l] : T(0);
          T tail = 0;
          for (; j < plane_n; ++j)
            tail += xp[j] < T(0) ? gp[j] * xp[j] : T(0);
          acc += (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
                  ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) +
                 tail;
        }
        gad[c] += acc;
      }
    });
  }
}

// Concatenation along the channel axis; a occupies channels [0, Ca).
// Either operand may have zero channels, making it the neutral element.
template <typename T>
Tensor<T> concat_channels(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.ndim() != 4 || b.ndim() != 4)
    throw ContractError("concat_channels: operands must be 4-D, got " +
                        a.shape().str() + " and " + b.shape().str());
  if (a.extent(0) != b.extent(0) || a.extent(2) != b.extent(2) ||
      a.extent(3) != b.extent(3))
    throw ContractError("concat_channels: batch/spatial mismatch between " +
                        a.shape().str() + " and " + b.shape().str());
  const int B = a.extent(0), Ca = a.extent(1), Cb = b.extent(1);
  const int H = a.extent(2), W = a.extent(3);
  const int64_t plane_n = int64_t(H) * W;
  Tensor<T> out({B, Ca + Cb, H, W});
  T* od = out.data();
  for (int bi = 0; bi < B; ++bi) {
    T* dst = od + int64_t(bi) * (Ca + Cb) * plane_n;
    if (Ca > 0)
      std::memcpy(dst, a.data() + int64_t(bi) * Ca * plane_n,
                  sizeof(T) * Ca * plane_n);
    if (Cb > 0)
      std::memcpy(dst + int64_t(Ca) * plane_n,
                  b.data() + int64_t(bi) * Cb * plane_n,
                  sizeof(T) * Cb * plane_n);
  }
  return out;
}

template <typename T>
void concat_channels_backward(const Tensor<T>& gout, int channels_a,
                              Tensor<T>* ga, Tensor<T>* gb) {
  const int B = gout.extent(0), C = gout.extent(1);
  const int Cb = C - channels_a;
  const int64_t plane_n = int64_t(gout.extent(2)) * gout.extent(3);
  const T* gd = gout.data();
  for (int bi = 0; bi < B; ++bi) {
    const T* src = gd + int64_t(bi) * C * plane_n;
    if (ga != nullptr && channels_a > 0) {
      T* dst = ga->data() + int64_t(bi) * channels_a * plane_n;
      for (int64_t j = 0; j < channels_a * plane_n; ++j) dst[j] += src[j];
    }
    if (gb != nullptr && Cb > 0) {
      T* dst = gb->data() + int64_t(bi) * Cb * plane_n;
      const T* srcb = src + int64_t(channels_a) * plane_n;
      for (int64_t j = 0; j < Cb * plane_n; ++j) dst[j] += srcb[j];
    }
  }
}

template <typename T>
Tensor<T> add_elementwise(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape())
    throw ContractError("add_elementwise: shape mismatch between " +
                        a.shape().str() + " and " + b.shape().str());
  Tensor<T> out(a.shape());
  const T* ad = a.data();
  const T* bd = b.data();
  T* od = out.data();
  const int64_t n = a.size();
  for (int64_t j = 0; j < n; ++j) od[j] = ad[j] + bd[j];
  detail::check_finite(out, "add_elementwise");
  return out;
}

namespace detail {

// Fixed-order lane-wise reduction over a buffer.
template <typename T, typename Map>
T reduce_mapped(const T* a, const T* b, int64_t n, Map&& map) {
  T lanes[8] = {0, 0, 0, 0, 0, 0, 0, 0};
  int64_t j = 0;
  for (; j + 8 <= n; j += 8)
    for (int l = 0; l < 8; ++l) lanes[l] += map(a[j + l], b ? b[j + l] : T(0));
  T tail = 0;
  for (; j < n; ++j) tail += map(a[j], b ? b[j] : T(0));
  return (((lanes[0] + lanes[1]) + (lanes[2] + lanes[3])) +
          ((lanes[4] + lanes[5]) + (lanes[6] + lanes[7]))) +
         tail;
}

}  // namespace detail

template <typename T>
T sum(const Tensor<T>& x) {
  return detail::reduce_mapped(x.data(), static_cast<const T*>(nullptr),
                               x.size(), [](T a, T) { return a; });
}

// Mean of absolute differences over all elements.
template <typename T>
T l1_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ContractError("l1_loss: shape mismatch between " +
                        pred.shape().str() + " and " + target.shape().str());
  const T total = detail::reduce_mapped(
      pred.data(), target.data(), pred.size(),
      [](T p, T t) { return std::abs(p - t); });
  return total / static_cast<T>(pred.size());
}

template <typename T>
void l1_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T gout,
                      Tensor<T>* gpred, Tensor<T>* gtarget) {
  const int64_t n = pred.size();
  const T scale = gout / static_cast<T>(n);
  const T* pd = pred.data();
  const T* td = target.data();
  for (int64_t j = 0; j < n; ++j) {
    const T d = pd[j] - td[j];
    const T s = d > T(0) ? scale : (d < T(0) ? -scale : T(0));
    if (gpred != nullptr) (*gpred)[j] += s;
    if (gtarget != nullptr) (*gtarget)[j] -= s;
  }
}

// Mean of squared differences over all elements.
template <typename T>
T l2_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  if (pred.shape() != target.shape())
    throw ContractError("l2_loss: shape mismatch between " +
                        pred.shape().str() + " and " + target.shape().str());
  const T total = detail::reduce_mapped(
      pred.data(), target.data(), pred.size(), [](T p, T t) {
        const T d = p - t;
        return d * d;
      });
  return total / static_cast<T>(pred.size());
}

template <typename T>
void l2_loss_backward(const Tensor<T>& pred, const Tensor<T>& target, T gout,
                      Tensor<T>* gpred, Tensor<T>* gtarget) {
  const int64_t n = pred.size();
  const T scale = T(2) * gout / static_cast<T>(n);
  const T* pd = pred.data();
  const T* td = target.data();
  for (int64_t j = 0; j < n; ++j) {
    const T g = scale * (pd[j] - td[j]);
    if (gpred != nullptr) (*gpred)[j] += g;
    if (gtarget != nullptr) (*gtarget)[j] -= g;
  }
}

}  // namespace pansharp::ops
