#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "speednet/tensor.hpp"
#include "speednet/testing.hpp"

namespace speednet {

inline i64 conv_out_size(i64 in, i64 pad, i64 dilation, i64 k, i64 stride) {
  return (in + 2 * pad - dilation * (k - 1) - 1) / stride + 1;
}

// ---------------------------------------------------------------------------
// conv2d: cross-correlation with stride/dilation/zero padding.
//
// Per output element the summation order is fixed as (in_channel, ku, kv) so
// results are bit-reproducible and can be compared exactly against a
// nested-loop reference.
// ---------------------------------------------------------------------------

template <typename T>
struct ConvSpec {
  Tensor4<T> kernel;  // (out_channels, in_channels, kh, kw)
  Tensor4<T> bias;    // (1, out_channels, 1, 1)
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  i64 out_channels() const { return kernel.n; }
  i64 in_channels() const { return kernel.c; }
};

template <typename T>
inline void validate_conv(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias, int stride,
                          int dilation, int padding, const char* where) {
  if (x.c != kernel.c) {
    throw ShapeError(std::string(where) + ": input channels " + std::to_string(x.c) +
                     " != kernel in_channels " + std::to_string(kernel.c));
  }
  if (bias.c != kernel.n || bias.n != 1 || bias.h != 1 || bias.w != 1) {
    throw ShapeError(std::string(where) + ": bias shape " + bias.shape().str() + " != (1," +
                     std::to_string(kernel.n) + ",1,1)");
  }
  if (stride < 1 || dilation < 1 || padding < 0) {
    throw ShapeError(std::string(where) + ": stride/dilation must be >= 1 and padding >= 0");
  }
  const i64 oh = conv_out_size(x.h, padding, dilation, kernel.h, stride);
  const i64 ow = conv_out_size(x.w, padding, dilation, kernel.w, stride);
  if (oh < 1) throw ShapeError(std::string(where) + ": output height < 1 for input h=" + std::to_string(x.h));
  if (ow < 1) throw ShapeError(std::string(where) + ": output width < 1 for input w=" + std::to_string(x.w));
}

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias, int stride, int dilation,
                  int padding) {
  validate_conv(x, kernel, bias, stride, dilation, padding, "conv2d");
  const i64 kh = kernel.h, kw = kernel.w;
  const i64 st = stride, dil = dilation, pad = padding;
  const i64 oh = conv_out_size(x.h, pad, dil, kh, st);
  const i64 ow = conv_out_size(x.w, pad, dil, kw, st);

  Tensor4<T> out(x.n, kernel.n, oh, ow);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 oc = 0; oc < out.c; ++oc) {
      T* oplane = out.plane(b, oc);
      const T bv = bias(0, oc, 0, 0);
      std::fill(oplane, oplane + oh * ow, bv);
      for (i64 ic = 0; ic < x.c; ++ic) {
        const T* xplane = x.plane(b, ic);
        for (i64 u = 0; u < kh; ++u) {
          for (i64 v = 0; v < kw; ++v) {
            const T wv = kernel(oc, ic, u, v);
            for (i64 i = 0; i < oh; ++i) {
              const i64 ih = i * st - pad + dil * u;
              if (ih < 0 || ih >= x.h) continue;
              const T* xrow = xplane + ih * x.w;
              T* orow = oplane + i * ow;
              for (i64 j = 0; j < ow; ++j) {
                const i64 iw = j * st - pad + dil * v;
                if (iw < 0 || iw >= x.w) continue;
                orow[j] += wv * xrow[iw];
              }
            }
          }
        }
      }
    }
  }
  debug_check_finite(out, "conv2d");
  return out;
}

template <typename T>
Tensor4<T> conv2d(const Tensor4<T>& x, const ConvSpec<T>& spec) {
  return conv2d(x, spec.kernel, spec.bias, spec.stride, spec.dilation, spec.padding);
}

template <typename T>
struct ConvGrads {
  Tensor4<T> x;       // grad wrt input
  Tensor4<T> kernel;  // grad wrt kernel
  Tensor4<T> bias;    // grad wrt bias
};

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const Tensor4<T>& kernel, const Tensor4<T>& bias, int stride,
                             int dilation, int padding, const Tensor4<T>& grad_out) {
  validate_conv(x, kernel, bias, stride, dilation, padding, "conv2d_backward");
  const i64 kh = kernel.h, kw = kernel.w;
  const i64 st = stride, dil = dilation, pad = padding;
  const i64 oh = conv_out_size(x.h, pad, dil, kh, st);
  const i64 ow = conv_out_size(x.w, pad, dil, kw, st);
  if (grad_out.shape() != Shape4{x.n, kernel.n, oh, ow}) {
    throw ShapeError("conv2d_backward: grad_out shape " + grad_out.shape().str() + " != expected " +
                     Shape4{x.n, kernel.n, oh, ow}.str());
  }

  ConvGrads<T> g{Tensor4<T>(x.shape()), Tensor4<T>(kernel.shape()), Tensor4<T>(bias.shape())};
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 oc = 0; oc < grad_out.c; ++oc) {
      const T* gplane = grad_out.plane(b, oc);
      T bias_acc = 0;
      for (i64 i = 0; i < oh * ow; ++i) bias_acc += gplane[i];
      g.bias(0, oc, 0, 0) += bias_acc;
      for (i64 ic = 0; ic < x.c; ++ic) {
        const T* xplane = x.plane(b, ic);
        T* gxplane = g.x.plane(b, ic);
        for (i64 u = 0; u < kh; ++u) {
          for (i64 v = 0; v < kw; ++v) {
            const T wv = kernel(oc, ic, u, v);
            T wacc = 0;
            for (i64 i = 0; i < oh; ++i) {
              const i64 ih = i * st - pad + dil * u;
              if (ih < 0 || ih >= x.h) continue;
              const T* xrow = xplane + ih * x.w;
              T* gxrow = gxplane + ih * x.w;
              const T* grow = gplane + i * ow;
              for (i64 j = 0; j < ow; ++j) {
                const i64 iw = j * st - pad + dil * v;
                if (iw < 0 || iw >= x.w) continue;
                wacc += grow[j] * xrow[iw];
                gxrow[iw] += wv * grow[j];
              }
            }
            g.kernel(oc, ic, u, v) += wacc;
          }
        }
      }
    }
  }
  testing::apply_mutation("conv2d", &g.x, &g.kernel, &g.bias);
  return g;
}

template <typename T>
ConvGrads<T> conv2d_backward(const Tensor4<T>& x, const ConvSpec<T>& spec, const Tensor4<T>& grad_out) {
  return conv2d_backward(x, spec.kernel, spec.bias, spec.stride, spec.dilation, spec.padding, grad_out);
}

// ---------------------------------------------------------------------------
// involution2d: spatial-specific, channel-agnostic aggregation.
//
// `kernels` is data, shaped (n, G*K*K, H_out, W_out): every output pixel has
// its own K*K kernel and all C/G channels of a group share it. Padding is
// implicit (pad = dilation*(K-1)/2): neighbours that fall outside the input
// contribute zero. Summation order per output element is (ku, kv).
// ---------------------------------------------------------------------------

struct InvolutionDims {
  i64 group_size = 0;
  i64 oh = 0, ow = 0;
};

template <typename T>
inline InvolutionDims validate_involution(const Tensor4<T>& x, const Tensor4<T>& kernels, int K, int G,
                                          int stride, int dilation, const char* where) {
  if (K < 1 || K % 2 == 0) throw ShapeError(std::string(where) + ": kernel size K must be odd, got " + std::to_string(K));
  if (G < 1 || x.c % G != 0) {
    throw ShapeError(std::string(where) + ": channels " + std::to_string(x.c) + " not divisible by groups " +
                     std::to_string(G));
  }
  const i64 pad = static_cast<i64>(dilation) * (K - 1) / 2;
  const i64 oh = conv_out_size(x.h, pad, dilation, K, stride);
  const i64 ow = conv_out_size(x.w, pad, dilation, K, stride);
  if (oh < 1 || ow < 1) throw ShapeError(std::string(where) + ": output spatial size < 1");
  const Shape4 want{x.n, static_cast<i64>(G) * K * K, oh, ow};
  if (kernels.shape() != want) {
    throw ShapeError(std::string(where) + ": kernels shape " + kernels.shape().str() + " != expected " + want.str());
  }
  return {x.c / G, oh, ow};
}

template <typename T>
Tensor4<T> involution2d(const Tensor4<T>& x, const Tensor4<T>& kernels, int K, int G, int stride, int dilation) {
  const auto dims = validate_involution(x, kernels, K, G, stride, dilation, "involution2d");
  const i64 half = (K - 1) / 2;

  Tensor4<T> out(x.n, x.c, dims.oh, dims.ow);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 g = 0; g < G; ++g) {
      for (i64 cg = 0; cg < dims.group_size; ++cg) {
        const i64 ch = g * dims.group_size + cg;
        const T* xplane = x.plane(b, ch);
        T* oplane = out.plane(b, ch);
        for (i64 u = 0; u < K; ++u) {
          for (i64 v = 0; v < K; ++v) {
            const T* kplane = kernels.plane(b, g * K * K + u * K + v);
            for (i64 i = 0; i < dims.oh; ++i) {
              const i64 ih = i * stride + dilation * (u - half);
              if (ih < 0 || ih >= x.h) continue;
              const T* xrow = xplane + ih * x.w;
              T* orow = oplane + i * dims.ow;
              const T* krow = kplane + i * dims.ow;
              for (i64 j = 0; j < dims.ow; ++j) {
                const i64 iw = j * stride + dilation * (v - half);
                if (iw < 0 || iw >= x.w) continue;
                orow[j] += krow[j] * xrow[iw];
              }
            }
          }
        }
      }
    }
  }
  debug_check_finite(out, "involution2d");
  return out;
}

template <typename T>
struct InvolutionGrads {
  Tensor4<T> x;
  Tensor4<T> kernels;
};

template <typename T>
InvolutionGrads<T> involution2d_backward(const Tensor4<T>& x, const Tensor4<T>& kernels, int K, int G, int stride,
                                         int dilation, const Tensor4<T>& grad_out) {
  const auto dims = validate_involution(x, kernels, K, G, stride, dilation, "involution2d_backward");
  if (grad_out.shape() != Shape4{x.n, x.c, dims.oh, dims.ow}) {
    throw ShapeError("involution2d_backward: grad_out shape " + grad_out.shape().str() + " != expected " +
                     Shape4{x.n, x.c, dims.oh, dims.ow}.str());
  }
  const i64 half = (K - 1) / 2;

  InvolutionGrads<T> g{Tensor4<T>(x.shape()), Tensor4<T>(kernels.shape())};
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 grp = 0; grp < G; ++grp) {
      for (i64 cg = 0; cg < dims.group_size; ++cg) {
        const i64 ch = grp * dims.group_size + cg;
        const T* xplane = x.plane(b, ch);
        T* gxplane = g.x.plane(b, ch);
        const T* goplane = grad_out.plane(b, ch);
        for (i64 u = 0; u < K; ++u) {
          for (i64 v = 0; v < K; ++v) {
            const T* kplane = kernels.plane(b, grp * K * K + u * K + v);
            T* gkplane = g.kernels.plane(b, grp * K * K + u * K + v);
            for (i64 i = 0; i < dims.oh; ++i) {
              const i64 ih = i * stride + dilation * (u - half);
              if (ih < 0 || ih >= x.h) continue;
              const T* xrow = xplane + ih * x.w;
              T* gxrow = gxplane + ih * x.w;
              const T* gorow = goplane + i * dims.ow;
              const T* krow = kplane + i * dims.ow;
              T* gkrow = gkplane + i * dims.ow;
              for (i64 j = 0; j < dims.ow; ++j) {
                const i64 iw = j * stride + dilation * (v - half);
                if (iw < 0 || iw >= x.w) continue;
                gxrow[iw] += krow[j] * gorow[j];
                gkrow[j] += xrow[iw] * gorow[j];
              }
            }
          }
        }
      }
    }
  }
  testing::apply_mutation("involution2d", &g.x, &g.kernels);
  return g;
}

// ---------------------------------------------------------------------------
// Pooling and upsampling.
// ---------------------------------------------------------------------------

template <typename T>
struct MaxPoolResult {
  Tensor4<T> out;
  std::vector<i64> argmax;  // linear index into the input, per output element
};

template <typename T>
MaxPoolResult<T> maxpool2d(const Tensor4<T>& x, int k, int stride) {
  if (k < 1 || stride < 1) throw ShapeError("maxpool2d: k and stride must be >= 1");
  if (x.h < k || x.w < k) {
    throw ShapeError("maxpool2d: window " + std::to_string(k) + " larger than input " + x.shape().str());
  }
  const i64 oh = (x.h - k) / stride + 1;
  const i64 ow = (x.w - k) / stride + 1;

  MaxPoolResult<T> r{Tensor4<T>(x.n, x.c, oh, ow), {}};
  r.argmax.resize(static_cast<std::size_t>(r.out.numel()));
  std::size_t oi = 0;
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 ci = 0; ci < x.c; ++ci) {
      const T* xplane = x.plane(b, ci);
      for (i64 i = 0; i < oh; ++i) {
        for (i64 j = 0; j < ow; ++j) {
          // First occurrence in a row-major window scan wins ties.
          i64 best_idx = (i * stride) * x.w + (j * stride);
          T best = xplane[best_idx];
          for (i64 u = 0; u < k; ++u) {
            const i64 row = (i * stride + u) * x.w;
            for (i64 v = 0; v < k; ++v) {
              const i64 idx = row + j * stride + v;
              if (xplane[idx] > best) {
                best = xplane[idx];
                best_idx = idx;
              }
            }
          }
          r.out(b, ci, i, j) = best;
          r.argmax[oi++] = (b * x.c + ci) * x.h * x.w + best_idx;
        }
      }
    }
  }
  return r;
}

template <typename T>
Tensor4<T> maxpool2d_backward(Shape4 x_shape, const std::vector<i64>& argmax, const Tensor4<T>& grad_out) {
  if (static_cast<i64>(argmax.size()) != grad_out.numel()) {
    throw ShapeError("maxpool2d_backward: argmax size != grad_out numel");
  }
  Tensor4<T> gx(x_shape);
  for (std::size_t i = 0; i < argmax.size(); ++i) gx.data[static_cast<std::size_t>(argmax[i])] += grad_out.data[i];
  testing::apply_mutation("maxpool2d", &gx);
  return gx;
}

// Average pooling with kernel == stride and no padding (generator alignment
// pooling; k == 1 is the identity).
template <typename T>
Tensor4<T> avgpool2d(const Tensor4<T>& x, int k) {
  if (k < 1) throw ShapeError("avgpool2d: k must be >= 1");
  if (k == 1) return x;
  if (x.h < k || x.w < k) throw ShapeError("avgpool2d: window larger than input " + x.shape().str());
  const i64 oh = x.h / k, ow = x.w / k;
  const T inv = T(1) / static_cast<T>(k * k);
  Tensor4<T> out(x.n, x.c, oh, ow);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 ci = 0; ci < x.c; ++ci) {
      const T* xplane = x.plane(b, ci);
      for (i64 i = 0; i < oh; ++i) {
        for (i64 j = 0; j < ow; ++j) {
          T acc = 0;
          for (i64 u = 0; u < k; ++u) {
            const T* xrow = xplane + (i * k + u) * x.w + j * k;
            for (i64 v = 0; v < k; ++v) acc += xrow[v];
          }
          out(b, ci, i, j) = acc * inv;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> avgpool2d_backward(Shape4 x_shape, int k, const Tensor4<T>& grad_out) {
  if (k == 1) {
    Tensor4<T> gx = grad_out;
    testing::apply_mutation("avgpool2d", &gx);
    return gx;
  }
  Tensor4<T> gx(x_shape);
  const T inv = T(1) / static_cast<T>(k * k);
  for (i64 b = 0; b < grad_out.n; ++b) {
    for (i64 ci = 0; ci < grad_out.c; ++ci) {
      T* gxplane = gx.plane(b, ci);
      const T* gplane = grad_out.plane(b, ci);
      for (i64 i = 0; i < grad_out.h; ++i) {
        for (i64 j = 0; j < grad_out.w; ++j) {
          const T gv = gplane[i * grad_out.w + j] * inv;
          for (i64 u = 0; u < k; ++u) {
            T* gxrow = gxplane + (i * k + u) * x_shape.w + j * k;
            for (i64 v = 0; v < k; ++v) gxrow[v] += gv;
          }
        }
      }
    }
  }
  testing::apply_mutation("avgpool2d", &gx);
  return gx;
}

// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor4<T> upsample2x(const Tensor4<T>& x) {
  Tensor4<T> out(x.n, x.c, x.h * 2, x.w * 2);
  for (i64 b = 0; b < x.n; ++b) {
    for (i64 ci = 0; ci < x.c; ++ci) {
      const T* xplane = x.plane(b, ci);
      T* oplane = out.plane(b, ci);
      for (i64 i = 0; i < x.h; ++i) {
        for (i64 j = 0; j < x.w; ++j) {
          const T v = xplane[i * x.w + j];
          T* r0 = oplane + (2 * i) * out.w + 2 * j;
          T* r1 = r0 + out.w;
          r0[0] = v;
          r0[1] = v;
          r1[0] = v;
          r1[1] = v;
        }
      }
    }
  }
  return out;
}

template <typename T>
Tensor4<T> upsample2x_backward(const Tensor4<T>& grad_out) {
  if (grad_out.h % 2 != 0 || grad_out.w % 2 != 0) {
    throw ShapeError("upsample2x_backward: grad_out spatial dims must be even, got " + grad_out.shape().str());
  }
  Tensor4<T> gx(grad_out.n, grad_out.c, grad_out.h / 2, grad_out.w / 2);
  for (i64 b = 0; b < gx.n; ++b) {
    for (i64 ci = 0; ci < gx.c; ++ci) {
      const T* gplane = grad_out.plane(b, ci);
      T* gxplane = gx.plane(b, ci);
      for (i64 i = 0; i < gx.h; ++i) {
        for (i64 j = 0; j < gx.w; ++j) {
          const T* r0 = gplane + (2 * i) * grad_out.w + 2 * j;
          const T* r1 = r0 + grad_out.w;
          gxplane[i * gx.w + j] = (r0[0] + r0[1]) + (r1[0] + r1[1]);
        }
      }
    }
  }
  testing::apply_mutation("upsample2x", &gx);
  return gx;
}

// ---------------------------------------------------------------------------
// Batch normalization over (n, h, w) per channel.
// ---------------------------------------------------------------------------

template <typename T>
struct BnCache {
  Tensor4<T> xhat;
  std::vector<T> inv_std;  // per channel, train-mode batch statistic
};

template <typename T>
Tensor4<T> batchnorm2d(const Tensor4<T>& x, const Tensor4<T>& gamma, const Tensor4<T>& beta,
                       Tensor4<T>& running_mean, Tensor4<T>& running_var, Mode mode, T eps, T momentum,
                       BnCache<T>* cache = nullptr) {
  if (gamma.c != x.c || beta.c != x.c || running_mean.c != x.c || running_var.c != x.c) {
    throw ShapeError("batchnorm2d: parameter channel count != input channels " + std::to_string(x.c));
  }
  Tensor4<T> out(x.shape());
  if (cache) {
    cache->xhat = Tensor4<T>(x.shape());
    cache->inv_std.assign(static_cast<std::size_t>(x.c), T(0));
  }
  const i64 per_channel = x.n * x.h * x.w;
  for (i64 ci = 0; ci < x.c; ++ci) {
    T mean, inv_std;
    if (mode == Mode::Train) {
      T sum = 0;
      for (i64 b = 0; b < x.n; ++b) {
        const T* p = x.plane(b, ci);
        for (i64 i = 0; i < x.h * x.w; ++i) sum += p[i];
      }
      mean = sum / static_cast<T>(per_channel);
      T var_sum = 0;
      for (i64 b = 0; b < x.n; ++b) {
        const T* p = x.plane(b, ci);
        for (i64 i = 0; i < x.h * x.w; ++i) {
          const T d = p[i] - mean;
          var_sum += d * d;
        }
      }
      const T var = var_sum / static_cast<T>(per_channel);  // biased, also used for running stats
      inv_std = T(1) / std::sqrt(var + eps);
      running_mean(0, ci, 0, 0) = (T(1) - momentum) * running_mean(0, ci, 0, 0) + momentum * mean;
      running_var(0, ci, 0, 0) = (T(1) - momentum) * running_var(0, ci, 0, 0) + momentum * var;
    } else {
      mean = running_mean(0, ci, 0, 0);
      inv_std = T(1) / std::sqrt(running_var(0, ci, 0, 0) + eps);
    }
    const T g = gamma(0, ci, 0, 0), be = beta(0, ci, 0, 0);
    for (i64 b = 0; b < x.n; ++b) {
      const T* p = x.plane(b, ci);
      T* o = out.plane(b, ci);
      T* xh = cache ? cache->xhat.plane(b, ci) : nullptr;
      for (i64 i = 0; i < x.h * x.w; ++i) {
        const T xhat = (p[i] - mean) * inv_std;
        if (xh) xh[i] = xhat;
        o[i] = g * xhat + be;
      }
    }
    if (cache) cache->inv_std[static_cast<std::size_t>(ci)] = inv_std;
  }
  debug_check_finite(out, "batchnorm2d");
  return out;
}

template <typename T>
struct BnGrads {
  Tensor4<T> x;
  Tensor4<T> gamma;
  Tensor4<T> beta;
};

// Train-mode backward (batch statistics are functions of x).
template <typename T>
BnGrads<T> batchnorm2d_backward(const BnCache<T>& cache, const Tensor4<T>& gamma, const Tensor4<T>& grad_out) {
  const Tensor4<T>& xhat = cache.xhat;
  require_same_shape(xhat, grad_out, "batchnorm2d_backward");
  BnGrads<T> g{Tensor4<T>(xhat.shape()), Tensor4<T>(1, xhat.c, 1, 1), Tensor4<T>(1, xhat.c, 1, 1)};
  const i64 per_channel = xhat.n * xhat.h * xhat.w;
  for (i64 ci = 0; ci < xhat.c; ++ci) {
    T dg = 0, db = 0;
    for (i64 b = 0; b < xhat.n; ++b) {
      const T* gy = grad_out.plane(b, ci);
      const T* xh = xhat.plane(b, ci);
      for (i64 i = 0; i < xhat.h * xhat.w; ++i) {
        dg += gy[i] * xh[i];
        db += gy[i];
      }
    }
    g.gamma(0, ci, 0, 0) = dg;
    g.beta(0, ci, 0, 0) = db;
    const T scale = gamma(0, ci, 0, 0) * cache.inv_std[static_cast<std::size_t>(ci)];
    const T mean_dy = db / static_cast<T>(per_channel);
    const T mean_dyxh = dg / static_cast<T>(per_channel);
    for (i64 b = 0; b < xhat.n; ++b) {
      const T* gy = grad_out.plane(b, ci);
      const T* xh = xhat.plane(b, ci);
      T* gx = g.x.plane(b, ci);
      for (i64 i = 0; i < xhat.h * xhat.w; ++i) {
        gx[i] = scale * (gy[i] - mean_dy - xh[i] * mean_dyxh);
      }
    }
  }
  testing::apply_mutation("batchnorm2d", &g.x, &g.gamma, &g.beta);
  return g;
}

// ---------------------------------------------------------------------------
// Pointwise ops.
// ---------------------------------------------------------------------------

template <typename T>
inline T sigmoid_scalar(T x) {
  if (x >= 0) {
    return T(1) / (T(1) + std::exp(-x));
  }
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
Tensor4<T> relu(const Tensor4<T>& x) {
  Tensor4<T> out(x.shape());
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = x.data[i] > T(0) ? x.data[i] : T(0);
  return out;
}

template <typename T>
Tensor4<T> relu_backward(const Tensor4<T>& x, const Tensor4<T>& grad_out) {
  require_same_shape(x, grad_out, "relu_backward");
  Tensor4<T> gx(x.shape());
  for (std::size_t i = 0; i < x.data.size(); ++i) gx.data[i] = x.data[i] > T(0) ? grad_out.data[i] : T(0);
  testing::apply_mutation("relu", &gx);
  return gx;
}

template <typename T>
Tensor4<T> sigmoid(const Tensor4<T>& x) {
  Tensor4<T> out(x.shape());
  for (std::size_t i = 0; i < x.data.size(); ++i) out.data[i] = sigmoid_scalar(x.data[i]);
  return out;
}

// Takes the forward output y = sigmoid(x).
template <typename T>
Tensor4<T> sigmoid_backward(const Tensor4<T>& y, const Tensor4<T>& grad_out) {
  require_same_shape(y, grad_out, "sigmoid_backward");
  Tensor4<T> gx(y.shape());
  for (std::size_t i = 0; i < y.data.size(); ++i) gx.data[i] = grad_out.data[i] * y.data[i] * (T(1) - y.data[i]);
  testing::apply_mutation("sigmoid", &gx);
  return gx;
}

template <typename T>
Tensor4<T> add(const Tensor4<T>& a, const Tensor4<T>& b) {
  require_same_shape(a, b, "add");
  Tensor4<T> out(a.shape());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] + b.data[i];
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> add_backward(const Tensor4<T>& grad_out) {
  Tensor4<T> ga = grad_out, gb = grad_out;
  testing::apply_mutation("add", &ga, &gb);
  return {std::move(ga), std::move(gb)};
}

template <typename T>
Tensor4<T> mul(const Tensor4<T>& a, const Tensor4<T>& b) {
  require_same_shape(a, b, "mul");
  Tensor4<T> out(a.shape());
  for (std::size_t i = 0; i < a.data.size(); ++i) out.data[i] = a.data[i] * b.data[i];
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> mul_backward(const Tensor4<T>& a, const Tensor4<T>& b, const Tensor4<T>& grad_out) {
  require_same_shape(a, b, "mul_backward");
  require_same_shape(a, grad_out, "mul_backward");
  Tensor4<T> ga(a.shape()), gb(b.shape());
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    ga.data[i] = grad_out.data[i] * b.data[i];
    gb.data[i] = grad_out.data[i] * a.data[i];
  }
  testing::apply_mutation("mul", &ga, &gb);
  return {std::move(ga), std::move(gb)};
}

// Channel concatenation (skip connections).
template <typename T>
Tensor4<T> concat_channels(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (a.n != b.n || a.h != b.h || a.w != b.w) {
    throw ShapeError("concat_channels: non-channel dims differ, " + a.shape().str() + " vs " + b.shape().str());
  }
  Tensor4<T> out(a.n, a.c + b.c, a.h, a.w);
  for (i64 bt = 0; bt < a.n; ++bt) {
    for (i64 ci = 0; ci < a.c; ++ci) {
      std::copy(a.plane(bt, ci), a.plane(bt, ci) + a.h * a.w, out.plane(bt, ci));
    }
    for (i64 ci = 0; ci < b.c; ++ci) {
      std::copy(b.plane(bt, ci), b.plane(bt, ci) + b.h * b.w, out.plane(bt, a.c + ci));
    }
  }
  return out;
}

template <typename T>
std::pair<Tensor4<T>, Tensor4<T>> concat_channels_backward(i64 c_a, const Tensor4<T>& grad_out) {
  if (c_a < 1 || c_a >= grad_out.c) throw ShapeError("concat_channels_backward: bad split point");
  Tensor4<T> ga(grad_out.n, c_a, grad_out.h, grad_out.w);
  Tensor4<T> gb(grad_out.n, grad_out.c - c_a, grad_out.h, grad_out.w);
  for (i64 bt = 0; bt < grad_out.n; ++bt) {
    for (i64 ci = 0; ci < c_a; ++ci) {
      std::copy(grad_out.plane(bt, ci), grad_out.plane(bt, ci) + grad_out.h * grad_out.w, ga.plane(bt, ci));
    }
    for (i64 ci = 0; ci < gb.c; ++ci) {
      std::copy(grad_out.plane(bt, c_a + ci), grad_out.plane(bt, c_a + ci) + grad_out.h * grad_out.w,
                gb.plane(bt, ci));
    }
  }
  testing::apply_mutation("concat", &ga, &gb);
  return {std::move(ga), std::move(gb)};
}

}  // namespace speednet
