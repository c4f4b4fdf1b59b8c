#pragma once

#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "speednet/ops.hpp"
#include "speednet/tensor.hpp"

namespace speednet {

// A trainable tensor with its accumulated gradient.
template <typename T>
struct Param {
  Tensor4<T> value;
  Tensor4<T> grad;

  Param() = default;
  explicit Param(Shape4 s) : value(s), grad(s) {}

  void zero_grad() { grad.zero(); }
  i64 numel() const { return value.numel(); }
};

template <typename T>
using ParamVisitor = std::function<void(const std::string&, Param<T>&)>;
template <typename T>
using BufferVisitor = std::function<void(const std::string&, Tensor4<T>&)>;

template <typename T>
inline void accumulate(Tensor4<T>& dst, const Tensor4<T>& src) {
  require_same_shape(dst, src, "accumulate");
  for (std::size_t i = 0; i < dst.data.size(); ++i) dst.data[i] += src.data[i];
}

// ---------------------------------------------------------------------------
// Conv2d layer: owns kernel/bias parameters around the conv2d op.
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
  Param<T> weight;  // (out, in, k, k)
  Param<T> bias;    // (1, out, 1, 1)
  int stride = 1;
  int dilation = 1;
  int padding = 0;

  Conv2d() = default;
  Conv2d(i64 in_c, i64 out_c, int k, int stride_ = 1, int dilation_ = 1, int padding_ = -1)
      : weight(Shape4{out_c, in_c, k, k}),
        bias(Shape4{1, out_c, 1, 1}),
        stride(stride_),
        dilation(dilation_),
        padding(padding_ < 0 ? dilation_ * (k - 1) / 2 : padding_) {}

  // He-uniform weights (bound sqrt(6/fan_in)), zero bias. Draws are doubles so
  // the stream consumption is dtype-independent.
  void init(std::mt19937_64& rng) {
    const i64 fan_in = weight.value.c * weight.value.h * weight.value.w;
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
    for (auto& v : weight.value.data) v = static_cast<T>((2.0 * canonical(rng) - 1.0) * bound);
    bias.value.zero();
  }

  struct Cache {
    Tensor4<T> x;
  };

  Tensor4<T> forward(const Tensor4<T>& x, Cache* cache = nullptr) const {
    if (cache) cache->x = x;
    return conv2d(x, weight.value, bias.value, stride, dilation, padding);
  }

  Tensor4<T> backward(const Cache& cache, const Tensor4<T>& grad_out) {
    auto g = conv2d_backward(cache.x, weight.value, bias.value, stride, dilation, padding, grad_out);
    accumulate(weight.grad, g.kernel);
    accumulate(bias.grad, g.bias);
    return std::move(g.x);
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".weight", weight);
    f(prefix + ".bias", bias);
  }
};

// ---------------------------------------------------------------------------
// BatchNorm2d layer.
// ---------------------------------------------------------------------------

template <typename T>
struct BatchNorm2d {
  Param<T> gamma;
  Param<T> beta;
  Tensor4<T> running_mean;
  Tensor4<T> running_var;
  T eps = static_cast<T>(1e-5);
  T momentum = static_cast<T>(0.1);

  BatchNorm2d() = default;
  explicit BatchNorm2d(i64 c)
      : gamma(Shape4{1, c, 1, 1}),
        beta(Shape4{1, c, 1, 1}),
        running_mean(1, c, 1, 1),
        running_var(Tensor4<T>::full(1, c, 1, 1, T(1))) {
    gamma.value.fill(T(1));
  }

  using Cache = BnCache<T>;

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, Cache* cache = nullptr) {
    return batchnorm2d(x, gamma.value, beta.value, running_mean, running_var, mode, eps, momentum, cache);
  }

  Tensor4<T> backward(const Cache& cache, const Tensor4<T>& grad_out) {
    auto g = batchnorm2d_backward(cache, gamma.value, grad_out);
    accumulate(gamma.grad, g.gamma);
    accumulate(beta.grad, g.beta);
    return std::move(g.x);
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    f(prefix + ".gamma", gamma);
    f(prefix + ".beta", beta);
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor<T>& f) {
    f(prefix + ".running_mean", running_mean);
    f(prefix + ".running_var", running_var);
  }
};

// ---------------------------------------------------------------------------
// ConvBlock: conv -> ReLU -> BatchNorm (post-activation), in that order.
// ---------------------------------------------------------------------------

template <typename T>
struct ConvBlock {
  Conv2d<T> conv;
  BatchNorm2d<T> bn;

  ConvBlock() = default;
  ConvBlock(i64 in_c, i64 out_c, int k = 3, int dilation = 1) : conv(in_c, out_c, k, 1, dilation), bn(out_c) {}

  void init(std::mt19937_64& rng) { conv.init(rng); }

  struct Cache {
    typename Conv2d<T>::Cache conv;
    Tensor4<T> conv_out;  // pre-ReLU
    BnCache<T> bn;
  };

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, Cache* cache = nullptr) {
    Tensor4<T> y = conv.forward(x, cache ? &cache->conv : nullptr);
    Tensor4<T> r = relu(y);
    if (cache) cache->conv_out = std::move(y);
    return bn.forward(r, mode, cache ? &cache->bn : nullptr);
  }

  Tensor4<T> backward(const Cache& cache, const Tensor4<T>& grad_out) {
    Tensor4<T> gr = bn.backward(cache.bn, grad_out);
    Tensor4<T> gy = relu_backward(cache.conv_out, gr);
    return conv.backward(cache.conv, gy);
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    conv.visit_params(prefix + ".conv", f);
    bn.visit_params(prefix + ".bn", f);
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor<T>& f) { bn.visit_buffers(prefix + ".bn", f); }
};

// ---------------------------------------------------------------------------
// InvolutionLayer: learns a per-pixel kernel field from the input and applies
// it with involution2d. Generator: avgpool(stride) -> 1x1 conv (C -> C/r) ->
// ReLU -> BatchNorm -> 1x1 conv (C/r -> K*K*G), no activation on the logits.
// ---------------------------------------------------------------------------

template <typename T>
struct InvolutionLayer {
  int channels = 0;
  int K = 3;
  int G = 1;
  int reduction = 4;
  int stride = 1;
  int dilation = 1;
  Conv2d<T> reduce;
  BatchNorm2d<T> bn;
  Conv2d<T> span;

  InvolutionLayer() = default;
  InvolutionLayer(i64 c, int k, int groups, int r, int stride_ = 1, int dilation_ = 1)
      : channels(static_cast<int>(c)), K(k), G(groups), reduction(r), stride(stride_), dilation(dilation_) {
    if (k < 1 || k % 2 == 0) throw ShapeError("InvolutionLayer: kernel size must be odd, got " + std::to_string(k));
    if (groups < 1 || c % groups != 0) {
      throw ShapeError("InvolutionLayer: channels " + std::to_string(c) + " not divisible by groups " +
                       std::to_string(groups));
    }
    if (r < 1 || c % r != 0) {
      throw ShapeError("InvolutionLayer: channels " + std::to_string(c) + " not divisible by reduction " +
                       std::to_string(r));
    }
    reduce = Conv2d<T>(c, c / r, 1);
    bn = BatchNorm2d<T>(c / r);
    span = Conv2d<T>(c / r, static_cast<i64>(k) * k * groups, 1);
  }

  void init(std::mt19937_64& rng) {
    reduce.init(rng);
    span.init(rng);
  }

  struct Cache {
    Tensor4<T> x;
    typename Conv2d<T>::Cache reduce_c;
    Tensor4<T> reduce_out;  // pre-ReLU
    BnCache<T> bn_c;
    typename Conv2d<T>::Cache span_c;
    Tensor4<T> kernels;
  };

  Tensor4<T> forward(const Tensor4<T>& x, Mode mode, Cache* cache = nullptr) {
    if (x.c != channels) {
      throw ShapeError("InvolutionLayer: input channels " + std::to_string(x.c) + " != " + std::to_string(channels));
    }
    Tensor4<T> pooled = avgpool2d(x, stride);
    Tensor4<T> t = reduce.forward(pooled, cache ? &cache->reduce_c : nullptr);
    Tensor4<T> r = relu(t);
    if (cache) cache->reduce_out = std::move(t);
    Tensor4<T> b = bn.forward(r, mode, cache ? &cache->bn_c : nullptr);
    Tensor4<T> kernels = span.forward(b, cache ? &cache->span_c : nullptr);
    Tensor4<T> out = involution2d(x, kernels, K, G, stride, dilation);
    if (cache) {
      cache->x = x;
      cache->kernels = std::move(kernels);
    }
    return out;
  }

  Tensor4<T> backward(const Cache& cache, const Tensor4<T>& grad_out) {
    auto ig = involution2d_backward(cache.x, cache.kernels, K, G, stride, dilation, grad_out);
    Tensor4<T> gb = span.backward(cache.span_c, ig.kernels);
    Tensor4<T> gr = bn.backward(cache.bn_c, gb);
    Tensor4<T> gt = relu_backward(cache.reduce_out, gr);
    Tensor4<T> gpooled = reduce.backward(cache.reduce_c, gt);
    Tensor4<T> gx_gen = avgpool2d_backward(cache.x.shape(), stride, gpooled);
    accumulate(ig.x, gx_gen);
    return std::move(ig.x);
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    reduce.visit_params(prefix + ".reduce", f);
    bn.visit_params(prefix + ".bn", f);
    span.visit_params(prefix + ".span", f);
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor<T>& f) { bn.visit_buffers(prefix + ".bn", f); }
};

// ---------------------------------------------------------------------------
// DipcBlock: one encoder stage. Halves the spatial size and doubles channels.
//
// Dataflow for level n with c input channels (H, W even):
//   S  = maxpool^n(image)                  (b, 3, H/2, W/2)   salient maps
//   P  = maxpool(f, 2, 2)                  (b, c, H/2, W/2)   pooled features
//   E  = P + conv1x1(S)                    (b, c, H/2, W/2)   salient fusion
//   X  = conv_block(E), c -> k = 2c        (b, 2c, H/2, W/2)  expansion
//   Yi = dilated involution_i(X), d=1,2,4  (b, 2c, H/2, W/2)  pyramid
//   Z  = (Y1+Y2) + (Y2+Y3)                                     pairwise sums
//   A  = sigmoid(conv3x3(Z))                                   attention, in (0,1)
//   out = A*X + X   (residual configurable)
//
// The no-involution variant swaps each involution for a dense 3x3 dilated
// convolution at the same width.
// ---------------------------------------------------------------------------

inline int involution_groups(i64 channels) { return static_cast<int>(std::max<i64>(1, channels / 16)); }

template <typename T>
struct DipcBlock {
  int level = 1;        // n in {1,2,3,4}: how often the raw image is pooled
  i64 in_channels = 0;  // c
  bool use_involution = true;
  bool residual = true;
  std::vector<int> dilations{1, 2, 4};

  Conv2d<T> salient_proj;  // 1x1, 3 -> c
  ConvBlock<T> expand;     // 3x3, c -> 2c
  std::vector<InvolutionLayer<T>> pyramid;
  std::vector<Conv2d<T>> pyramid_convs;
  Conv2d<T> attention;  // 3x3, 2c -> 2c

  DipcBlock() = default;
  DipcBlock(int level_, i64 c, int k, int r, std::vector<int> dilations_, bool use_involution_ = true,
            bool residual_ = true)
      : level(level_),
        in_channels(c),
        use_involution(use_involution_),
        residual(residual_),
        dilations(std::move(dilations_)) {
    if (level < 1) throw ShapeError("DipcBlock: level must be >= 1");
    if (dilations.size() != 3) throw ShapeError("DipcBlock: expected exactly 3 pyramid dilations");
    const i64 k2c = 2 * c;
    salient_proj = Conv2d<T>(3, c, 1);
    expand = ConvBlock<T>(c, k2c, 3);
    for (int d : dilations) {
      if (use_involution) {
        pyramid.emplace_back(k2c, k, involution_groups(k2c), r, 1, d);
      } else {
        pyramid_convs.emplace_back(k2c, k2c, 3, 1, d);
      }
    }
    attention = Conv2d<T>(k2c, k2c, 3);
  }

  i64 out_channels() const { return 2 * in_channels; }

  void init(std::mt19937_64& rng) {
    salient_proj.init(rng);
    expand.init(rng);
    for (auto& p : pyramid) p.init(rng);
    for (auto& p : pyramid_convs) p.init(rng);
    attention.init(rng);
  }

  struct Cache {
    std::vector<std::vector<i64>> image_pool_argmax;
    std::vector<Shape4> image_pool_shapes;  // input shape of each image pooling step
    Shape4 f_shape;
    std::vector<i64> p_argmax;
    typename Conv2d<T>::Cache proj_c;
    typename ConvBlock<T>::Cache expand_c;
    Tensor4<T> x_expanded;
    std::vector<typename InvolutionLayer<T>::Cache> pyr_inv_c;
    std::vector<typename Conv2d<T>::Cache> pyr_conv_c;
    typename Conv2d<T>::Cache attn_c;
    Tensor4<T> attn;  // A = sigmoid(logits)
  };

  // f: encoder features (b, c, H, W); image: the raw input batch at full
  // resolution, (b, 3, H * 2^(level-1), ...).
  Tensor4<T> forward(const Tensor4<T>& f, const Tensor4<T>& image, Mode mode, Cache* cache = nullptr) {
    if (f.c != in_channels) {
      throw ShapeError("DipcBlock level " + std::to_string(level) + ": feature channels " + std::to_string(f.c) +
                       " != " + std::to_string(in_channels));
    }
    if (image.c != 3) throw ShapeError("DipcBlock: image must have 3 channels, got " + std::to_string(image.c));
    if (f.h % 2 != 0 || f.w % 2 != 0) {
      throw ShapeError("DipcBlock level " + std::to_string(level) + ": feature spatial dims must be even, got " +
                       f.shape().str());
    }
    const i64 expect = f.h << (level - 1);
    if (image.h != expect || image.w != f.w << (level - 1)) {
      throw ShapeError("DipcBlock level " + std::to_string(level) + ": image size " + image.shape().str() +
                       " does not match features " + f.shape().str());
    }

    // Salient maps: the raw image max-pooled down to half the feature size.
    Tensor4<T> s = image;
    if (cache) {
      cache->image_pool_argmax.clear();
      cache->image_pool_shapes.clear();
    }
    for (int i = 0; i < level; ++i) {
      auto pooled = maxpool2d(s, 2, 2);
      if (cache) {
        cache->image_pool_shapes.push_back(s.shape());
        cache->image_pool_argmax.push_back(std::move(pooled.argmax));
      }
      s = std::move(pooled.out);
    }

    auto p = maxpool2d(f, 2, 2);
    if (cache) {
      cache->f_shape = f.shape();
      cache->p_argmax = std::move(p.argmax);
    }

    Tensor4<T> proj = salient_proj.forward(s, cache ? &cache->proj_c : nullptr);
    Tensor4<T> e = add(p.out, proj);
    Tensor4<T> x = expand.forward(e, mode, cache ? &cache->expand_c : nullptr);

    std::vector<Tensor4<T>> ys;
    ys.reserve(3);
    if (cache) {
      cache->pyr_inv_c.assign(pyramid.size(), {});
      cache->pyr_conv_c.assign(pyramid_convs.size(), {});
    }
    for (std::size_t i = 0; i < 3; ++i) {
      if (use_involution) {
        ys.push_back(pyramid[i].forward(x, mode, cache ? &cache->pyr_inv_c[i] : nullptr));
      } else {
        ys.push_back(pyramid_convs[i].forward(x, cache ? &cache->pyr_conv_c[i] : nullptr));
      }
    }
    Tensor4<T> z = add(add(ys[0], ys[1]), add(ys[1], ys[2]));

    Tensor4<T> logits = attention.forward(z, cache ? &cache->attn_c : nullptr);
    Tensor4<T> a = sigmoid(logits);
    Tensor4<T> out = mul(a, x);
    if (residual) out = add(out, x);
    if (cache) {
      cache->x_expanded = std::move(x);
      cache->attn = std::move(a);
    }
    return out;
  }

  struct Grads {
    Tensor4<T> f;
    Tensor4<T> image;
  };

  Grads backward(const Cache& cache, const Tensor4<T>& grad_out) {
    const Tensor4<T>& x = cache.x_expanded;
    const Tensor4<T>& a = cache.attn;

    Tensor4<T> gx(x.shape());
    Tensor4<T> g_ax = grad_out;
    if (residual) {
      auto [g1, g2] = add_backward(grad_out);
      g_ax = std::move(g1);
      accumulate(gx, g2);
    }
    auto [ga, gx_mul] = mul_backward(a, x, g_ax);
    accumulate(gx, gx_mul);

    Tensor4<T> glogits = sigmoid_backward(a, ga);
    Tensor4<T> gz = attention.backward(cache.attn_c, glogits);

    // Z = (Y1+Y2) + (Y2+Y3)
    auto [g_left, g_right] = add_backward(gz);
    auto [gy1, gy2a] = add_backward(g_left);
    auto [gy2b, gy3] = add_backward(g_right);
    Tensor4<T> gy2 = gy2a;
    accumulate(gy2, gy2b);

    const Tensor4<T>* gys[3] = {&gy1, &gy2, &gy3};
    for (std::size_t i = 0; i < 3; ++i) {
      Tensor4<T> gxi = use_involution ? pyramid[i].backward(cache.pyr_inv_c[i], *gys[i])
                                      : pyramid_convs[i].backward(cache.pyr_conv_c[i], *gys[i]);
      accumulate(gx, gxi);
    }

    Tensor4<T> ge = expand.backward(cache.expand_c, gx);
    auto [gp, gproj] = add_backward(ge);
    Tensor4<T> gs = salient_proj.backward(cache.proj_c, gproj);

    Grads g;
    g.f = maxpool2d_backward(cache.f_shape, cache.p_argmax, gp);
    for (int i = level - 1; i >= 0; --i) {
      gs = maxpool2d_backward(cache.image_pool_shapes[static_cast<std::size_t>(i)],
                              cache.image_pool_argmax[static_cast<std::size_t>(i)], gs);
    }
    g.image = std::move(gs);
    return g;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    salient_proj.visit_params(prefix + ".salient_proj", f);
    expand.visit_params(prefix + ".expand", f);
    for (std::size_t i = 0; i < pyramid.size(); ++i) {
      pyramid[i].visit_params(prefix + ".pyr" + std::to_string(i), f);
    }
    for (std::size_t i = 0; i < pyramid_convs.size(); ++i) {
      pyramid_convs[i].visit_params(prefix + ".pyr" + std::to_string(i) + ".conv", f);
    }
    attention.visit_params(prefix + ".attention", f);
  }

  void visit_buffers(const std::string& prefix, const BufferVisitor<T>& f) {
    expand.visit_buffers(prefix + ".expand", f);
    for (std::size_t i = 0; i < pyramid.size(); ++i) {
      pyramid[i].visit_buffers(prefix + ".pyr" + std::to_string(i), f);
    }
  }
};

// Total trainable scalars reachable through a module's visit_params.
template <typename T, typename M>
i64 param_count(M& module) {
  i64 total = 0;
  module.visit_params("", [&](const std::string&, Param<T>& p) { total += p.numel(); });
  return total;
}

}  // namespace speednet
