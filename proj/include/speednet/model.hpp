#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "speednet/layers.hpp"

namespace speednet {

enum class Variant { Full, NoInvolution, DilatedBottleneck };

inline std::string variant_name(Variant v) {
  switch (v) {
    case Variant::Full: return "full";
    case Variant::NoInvolution: return "no-involution";
    case Variant::DilatedBottleneck: return "dilated-bottleneck";
  }
  return "full";
}

inline Variant parse_variant(const std::string& s) {
  if (s == "full") return Variant::Full;
  if (s == "no-involution" || s == "noinvolution") return Variant::NoInvolution;
  if (s == "dilated-bottleneck" || s == "dilatedbottleneck") return Variant::DilatedBottleneck;
  throw ConfigError("unknown variant '" + s + "' (expected full | no-involution | dilated-bottleneck)");
}

struct SpeedNetConfig {
  int img_size = 224;
  std::array<int, 4> channels{32, 32, 64, 128};  // DIPC input widths per level
  int bottleneck_channels = 64;
  int involution_k = 3;
  int involution_r = 4;
  std::array<int, 3> dilations{1, 2, 4};
  Variant variant = Variant::Full;
  int bottleneck_dilation = 2;  // used by the dilated-bottleneck variant only
  int classes = 1;
  bool dipc_residual = true;
  std::uint64_t seed = 0;

  void validate() const {
    if (img_size < 16 || img_size % 16 != 0) {
      throw ConfigError("img_size must be a positive multiple of 16 (four pooling stages), got " +
                        std::to_string(img_size));
    }
    for (std::size_t i = 0; i < channels.size(); ++i) {
      if (channels[i] < 1) throw ConfigError("channels[" + std::to_string(i) + "] must be >= 1");
      const i64 k2c = 2LL * channels[i];
      const int g = involution_groups(k2c);
      if (k2c % g != 0) {
        throw ConfigError("level " + std::to_string(i + 1) + ": pyramid width " + std::to_string(k2c) +
                          " not divisible by involution groups " + std::to_string(g));
      }
      if (k2c % involution_r != 0) {
        throw ConfigError("level " + std::to_string(i + 1) + ": pyramid width " + std::to_string(k2c) +
                          " not divisible by involution reduction " + std::to_string(involution_r));
      }
    }
    if (bottleneck_channels < 1) throw ConfigError("bottleneck_channels must be >= 1");
    if (involution_k < 1 || involution_k % 2 == 0) throw ConfigError("involution_k must be odd");
    if (classes < 1) throw ConfigError("classes must be >= 1");
    for (int d : dilations) {
      if (d < 1) throw ConfigError("pyramid dilations must be >= 1");
    }
  }
};

// ---------------------------------------------------------------------------
// SPEEDNet: stem, four DIPC encoder levels each followed by a pair of conv
// blocks, a two-block bottleneck, a UNet-style decoder with skip
// concatenation, and a 1x1 sigmoid head.
// ---------------------------------------------------------------------------

template <typename T>
struct SpeedNet {
  SpeedNetConfig config;

  ConvBlock<T> stem0, stem1;
  struct Level {
    DipcBlock<T> dipc;
    ConvBlock<T> pair0, pair1;
  };
  std::array<Level, 4> levels;
  ConvBlock<T> bott0, bott1;
  struct DecStage {
    ConvBlock<T> cb0, cb1;
  };
  std::array<DecStage, 4> dec;  // dec[0] deepest (1/16 -> 1/8), dec[3] restores full resolution
  Conv2d<T> head;

  SpeedNet() = default;

  explicit SpeedNet(const SpeedNetConfig& cfg) : config(cfg) {
    cfg.validate();
    const auto& ch = cfg.channels;
    const bool use_inv = cfg.variant != Variant::NoInvolution;
    const int bott_dil = cfg.variant == Variant::DilatedBottleneck ? cfg.bottleneck_dilation : 1;
    const std::vector<int> dils(cfg.dilations.begin(), cfg.dilations.end());

    stem0 = ConvBlock<T>(3, ch[0]);
    stem1 = ConvBlock<T>(ch[0], ch[0]);
    for (int n = 0; n < 4; ++n) {
      const i64 c = ch[static_cast<std::size_t>(n)];
      const i64 next = n < 3 ? ch[static_cast<std::size_t>(n + 1)] : cfg.bottleneck_channels;
      levels[static_cast<std::size_t>(n)].dipc =
          DipcBlock<T>(n + 1, c, cfg.involution_k, cfg.involution_r, dils, use_inv, cfg.dipc_residual);
      levels[static_cast<std::size_t>(n)].pair0 = ConvBlock<T>(2 * c, next);
      levels[static_cast<std::size_t>(n)].pair1 = ConvBlock<T>(next, next);
    }
    bott0 = ConvBlock<T>(cfg.bottleneck_channels, cfg.bottleneck_channels, 3, bott_dil);
    bott1 = ConvBlock<T>(cfg.bottleneck_channels, cfg.bottleneck_channels, 3, bott_dil);

    // Decoder widths mirror the encoder skip widths.
    const i64 skip_c[4] = {ch[3], ch[2], ch[1], ch[0]};
    i64 up_c = cfg.bottleneck_channels;
    for (int s = 0; s < 4; ++s) {
      const i64 out_c = skip_c[s];
      dec[static_cast<std::size_t>(s)].cb0 = ConvBlock<T>(up_c + skip_c[s], out_c);
      dec[static_cast<std::size_t>(s)].cb1 = ConvBlock<T>(out_c, out_c);
      up_c = out_c;
    }
    head = Conv2d<T>(ch[0], cfg.classes, 1);

    std::mt19937_64 rng(cfg.seed);
    stem0.init(rng);
    stem1.init(rng);
    for (auto& lv : levels) {
      lv.dipc.init(rng);
      lv.pair0.init(rng);
      lv.pair1.init(rng);
    }
    bott0.init(rng);
    bott1.init(rng);
    for (auto& d : dec) {
      d.cb0.init(rng);
      d.cb1.init(rng);
    }
    head.init(rng);
  }

  struct Cache {
    typename ConvBlock<T>::Cache stem0_c, stem1_c;
    struct LevelCache {
      typename DipcBlock<T>::Cache dipc;
      typename ConvBlock<T>::Cache pair0, pair1;
    };
    std::array<LevelCache, 4> levels;
    typename ConvBlock<T>::Cache bott0_c, bott1_c;
    struct DecCache {
      typename ConvBlock<T>::Cache cb0, cb1;
      i64 up_channels = 0;
    };
    std::array<DecCache, 4> dec;
    typename Conv2d<T>::Cache head_c;
    Tensor4<T> pred;  // sigmoid output
  };

  // batch: (b, 3, S, S) with S == config.img_size. Returns (b, classes, S, S)
  // probabilities in (0,1). Pass a cache to enable backward().
  Tensor4<T> forward(const Tensor4<T>& batch, Mode mode, Cache* cache = nullptr) {
    if (batch.c != 3 || batch.h != config.img_size || batch.w != config.img_size) {
      throw ShapeError("SpeedNet: expected input (b,3," + std::to_string(config.img_size) + "," +
                       std::to_string(config.img_size) + "), got " + batch.shape().str());
    }

    Tensor4<T> s0 = stem1.forward(stem0.forward(batch, mode, cache ? &cache->stem0_c : nullptr), mode,
                                  cache ? &cache->stem1_c : nullptr);

    std::array<Tensor4<T>, 4> skips;  // s0, e1, e2, e3 at full, 1/2, 1/4, 1/8 resolution
    skips[0] = s0;
    Tensor4<T> f = std::move(s0);
    for (int n = 0; n < 4; ++n) {
      auto* lc = cache ? &cache->levels[static_cast<std::size_t>(n)] : nullptr;
      Tensor4<T> d = levels[static_cast<std::size_t>(n)].dipc.forward(f, batch, mode, lc ? &lc->dipc : nullptr);
      f = levels[static_cast<std::size_t>(n)].pair1.forward(
          levels[static_cast<std::size_t>(n)].pair0.forward(d, mode, lc ? &lc->pair0 : nullptr), mode,
          lc ? &lc->pair1 : nullptr);
      if (n < 3) skips[static_cast<std::size_t>(n + 1)] = f;
    }

    Tensor4<T> b = bott1.forward(bott0.forward(f, mode, cache ? &cache->bott0_c : nullptr), mode,
                                 cache ? &cache->bott1_c : nullptr);

    Tensor4<T> d = std::move(b);
    for (int s = 0; s < 4; ++s) {
      auto* dc = cache ? &cache->dec[static_cast<std::size_t>(s)] : nullptr;
      Tensor4<T> up = upsample2x(d);
      if (dc) dc->up_channels = up.c;
      Tensor4<T> cat = concat_channels(up, skips[static_cast<std::size_t>(3 - s)]);
      d = dec[static_cast<std::size_t>(s)].cb1.forward(
          dec[static_cast<std::size_t>(s)].cb0.forward(cat, mode, dc ? &dc->cb0 : nullptr), mode,
          dc ? &dc->cb1 : nullptr);
    }

    Tensor4<T> logits = head.forward(d, cache ? &cache->head_c : nullptr);
    Tensor4<T> pred = sigmoid(logits);
    if (cache) cache->pred = pred;
    return pred;
  }

  // Backpropagates d(loss)/d(pred) through the whole network, accumulating
  // parameter gradients. Returns the gradient wrt the input batch (stem path
  // plus the salient-map paths of all four DIPC blocks).
  Tensor4<T> backward(const Cache& cache, const Tensor4<T>& grad_pred) {
    Tensor4<T> glogits = sigmoid_backward(cache.pred, grad_pred);
    Tensor4<T> gd = head.backward(cache.head_c, glogits);

    std::array<Tensor4<T>, 4> skip_grads;  // for s0, e1, e2, e3
    for (int s = 3; s >= 0; --s) {
      const auto& dc = cache.dec[static_cast<std::size_t>(s)];
      Tensor4<T> gcat = dec[static_cast<std::size_t>(s)].cb0.backward(
          dc.cb0, dec[static_cast<std::size_t>(s)].cb1.backward(dc.cb1, gd));
      auto [gup, gskip] = concat_channels_backward(dc.up_channels, gcat);
      skip_grads[static_cast<std::size_t>(3 - s)] = std::move(gskip);
      gd = upsample2x_backward(gup);
    }

    Tensor4<T> gf = bott0.backward(cache.bott0_c, bott1.backward(cache.bott1_c, gd));

    Tensor4<T> grad_input;  // accumulates DIPC image gradients
    for (int n = 3; n >= 0; --n) {
      const auto& lc = cache.levels[static_cast<std::size_t>(n)];
      Tensor4<T> gdipc = levels[static_cast<std::size_t>(n)].pair0.backward(
          lc.pair0, levels[static_cast<std::size_t>(n)].pair1.backward(lc.pair1, gf));
      auto g = levels[static_cast<std::size_t>(n)].dipc.backward(lc.dipc, gdipc);
      if (grad_input.numel() == 0) {
        grad_input = std::move(g.image);
      } else {
        accumulate(grad_input, g.image);
      }
      gf = std::move(g.f);
      accumulate(gf, skip_grads[static_cast<std::size_t>(n)]);
    }

    Tensor4<T> gx = stem0.backward(cache.stem0_c, stem1.backward(cache.stem1_c, gf));
    accumulate(grad_input, gx);
    return grad_input;
  }

  void visit_params(const std::string& prefix, const ParamVisitor<T>& f) {
    visit_params([&](const std::string& n, Param<T>& p) { f(prefix.empty() ? n : prefix + "." + n, p); });
  }

  void visit_params(const ParamVisitor<T>& f) {
    stem0.visit_params("stem.0", f);
    stem1.visit_params("stem.1", f);
    for (int n = 0; n < 4; ++n) {
      const std::string p = "enc" + std::to_string(n + 1);
      levels[static_cast<std::size_t>(n)].dipc.visit_params(p + ".dipc", f);
      levels[static_cast<std::size_t>(n)].pair0.visit_params(p + ".pair.0", f);
      levels[static_cast<std::size_t>(n)].pair1.visit_params(p + ".pair.1", f);
    }
    bott0.visit_params("bottleneck.0", f);
    bott1.visit_params("bottleneck.1", f);
    for (int s = 0; s < 4; ++s) {
      const std::string p = "dec" + std::to_string(s + 1);
      dec[static_cast<std::size_t>(s)].cb0.visit_params(p + ".0", f);
      dec[static_cast<std::size_t>(s)].cb1.visit_params(p + ".1", f);
    }
    head.visit_params("head", f);
  }

  void visit_buffers(const BufferVisitor<T>& f) {
    stem0.visit_buffers("stem.0", f);
    stem1.visit_buffers("stem.1", f);
    for (int n = 0; n < 4; ++n) {
      const std::string p = "enc" + std::to_string(n + 1);
      levels[static_cast<std::size_t>(n)].dipc.visit_buffers(p + ".dipc", f);
      levels[static_cast<std::size_t>(n)].pair0.visit_buffers(p + ".pair.0", f);
      levels[static_cast<std::size_t>(n)].pair1.visit_buffers(p + ".pair.1", f);
    }
    bott0.visit_buffers("bottleneck.0", f);
    bott1.visit_buffers("bottleneck.1", f);
    for (int s = 0; s < 4; ++s) {
      const std::string p = "dec" + std::to_string(s + 1);
      dec[static_cast<std::size_t>(s)].cb0.visit_buffers(p + ".0", f);
      dec[static_cast<std::size_t>(s)].cb1.visit_buffers(p + ".1", f);
    }
  }

  void zero_grads() {
    visit_params([](const std::string&, Param<T>& p) { p.zero_grad(); });
  }
};

struct ParamCounts {
  i64 trainable = 0;
  i64 total_with_stats = 0;
};

template <typename T>
ParamCounts count_parameters(SpeedNet<T>& model) {
  ParamCounts counts;
  model.visit_params([&](const std::string&, Param<T>& p) { counts.trainable += p.numel(); });
  counts.total_with_stats = counts.trainable;
  model.visit_buffers([&](const std::string&, Tensor4<T>& b) { counts.total_with_stats += b.numel(); });
  return counts;
}

using SpeedNetF = SpeedNet<float>;
using SpeedNetD = SpeedNet<double>;

}  // namespace speednet
