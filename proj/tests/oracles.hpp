#pragma once

// Independent brute-force references the implementation is checked against.
// These deliberately share no code with the library kernels: padding is
// materialized and every output element is summed by a naive nested loop in
// the same (in_channel, ku, kv) order the implementation commits to.

#include "speednet/tensor.hpp"

namespace oracle {

using speednet::i64;
using speednet::Tensor4;

template <typename T>
Tensor4<T> pad_zeros(const Tensor4<T>& x, int pad) {
  Tensor4<T> xp(x.n, x.c, x.h + 2 * pad, x.w + 2 * pad);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 c = 0; c < x.c; ++c) {
      for (i64 i = 0; i < x.h; ++i) {
        for (i64 j = 0; j < x.w; ++j) {
          xp(b, c, i + pad, j + pad) = x(b, c, i, j);
        }
      }
    }
  }
  return xp;
}

template <typename T>
Tensor4<T> conv2d_reference(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias, int stride,
                            int dilation, int pad) {
  const Tensor4<T> xp = pad_zeros(x, pad);
  const i64 oh = (x.h + 2 * pad - dilation * (kernel.h - 1) - 1) / stride + 1;
  const i64 ow = (x.w + 2 * pad - dilation * (kernel.w - 1) - 1) / stride + 1;
  Tensor4<T> out(x.n, kernel.n, oh, ow);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 oc = 0; oc < kernel.n; ++oc) {
      for (i64 i = 0; i < oh; ++i) {
        for (i64 j = 0; j < ow; ++j) {
          T acc = bias(0, oc, 0, 0);
          for (i64 ic = 0; ic < x.c; ++ic) {
            for (i64 u = 0; u < kernel.h; ++u) {
              for (i64 v = 0; v < kernel.w; ++v) {
                acc += kernel(oc, ic, u, v) * xp(b, ic, i * stride + dilation * u, j * stride + dilation * v);
              }
            }
          }
          out(b, oc, i, j) = acc;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> involution2d_reference(const Tensor4<T>& x, const Tensor4<T>& kernels, int K, int G, int stride,
                                  int dilation) {
  const int pad = dilation * (K - 1) / 2;
  const i64 oh = (x.h + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
  const i64 ow = (x.w + 2 * pad - dilation * (K - 1) - 1) / stride + 1;
  const i64 group_size = x.c / G;
  const int half = K / 2;
  Tensor4<T> out(x.n, x.c, oh, ow);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 ch = 0; ch < x.c; ++ch) {
      const i64 g = ch / group_size;
      for (i64 i = 0; i < oh; ++i) {
        for (i64 j = 0; j < ow; ++j) {
          T acc = 0;
          for (int u = 0; u < K; ++u) {
            for (int v = 0; v < K; ++v) {
              const i64 ih = i * stride + static_cast<i64>(dilation) * (u - half);
              const i64 iw = j * stride + static_cast<i64>(dilation) * (v - half);
              if (ih < 0 || ih >= x.h || iw < 0 || iw >= x.w) continue;
              acc += kernels(b, g * K * K + u * K + v, i, j) * x(b, ch, ih, iw);
            }
          }
          out(b, ch, i, j) = acc;
        }
      }
    }
  }
  return out;
}

}  // namespace oracle
