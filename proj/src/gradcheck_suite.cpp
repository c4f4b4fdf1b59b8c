#include "speednet/gradcheck_suite.hpp"

#include <algorithm>
#include <functional>

#include "speednet/layers.hpp"
#include "speednet/loss.hpp"
#include "speednet/model.hpp"
#include "speednet/ops.hpp"

namespace speednet {

namespace {

double weighted_sum(const Tensor4d& a, const Tensor4d& r) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) s += a.data[i] * r.data[i];
  return s;
}

Tensor4d rand_t(Shape4 s, std::uint64_t seed, double lo = -1.0, double hi = 1.0) {
  Tensor4d t(s);
  std::mt19937_64 rng(seed);
  t.fill_uniform(rng, lo, hi);
  return t;
}

// Magnitudes bounded away from zero: keeps finite differences clear of the
// ReLU kink and of max-pool ties.
Tensor4d rand_nonzero(Shape4 s, std::uint64_t seed, double margin = 0.05) {
  Tensor4d t(s);
  std::mt19937_64 rng(seed);
  for (auto& v : t.data) {
    const double mag = margin + (1.0 - margin) * canonical(rng);
    v = rng() % 2 == 0 ? mag : -mag;
  }
  return t;
}

void merge(GradCheckReport& worst, const GradCheckReport& r) {
  if (r.max_rel_err >= worst.max_rel_err) worst = r;
}

using CheckFn = std::function<GradCheckReport(std::uint64_t seed)>;

GradCheckReport over_seeds(const CheckFn& fn, int seeds, std::uint64_t base) {
  GradCheckReport worst;
  for (int s = 0; s < seeds; ++s) merge(worst, fn(base + static_cast<std::uint64_t>(s)));
  return worst;
}

// --- per-op checks ---------------------------------------------------------

GradCheckReport check_conv2d(std::uint64_t seed) {
  const int dil = 1 + static_cast<int>(seed % 3);
  auto x = rand_t({2, 4, 6, 6}, seed * 11 + 1);
  auto kernel = rand_t({3, 4, 3, 3}, seed * 11 + 2);
  auto bias = rand_t({1, 3, 1, 1}, seed * 11 + 3);
  const auto r = rand_t({2, 3, 6, 6}, seed * 11 + 4);
  auto loss = [&] { return weighted_sum(conv2d(x, kernel, bias, 1, dil, dil), r); };
  const auto g = conv2d_backward(x, kernel, bias, 1, dil, dil, r);
  return grad_check({{"x", &x, &g.x}, {"kernel", &kernel, &g.kernel}, {"bias", &bias, &g.bias}}, loss);
}

GradCheckReport check_involution2d(std::uint64_t seed) {
  const int dil = 1 + static_cast<int>(seed % 3);
  auto x = rand_t({2, 4, 6, 6}, seed * 13 + 1);
  auto kernels = rand_t({2, 2 * 9, 6, 6}, seed * 13 + 2);
  const auto r = rand_t({2, 4, 6, 6}, seed * 13 + 3);
  auto loss = [&] { return weighted_sum(involution2d(x, kernels, 3, 2, 1, dil), r); };
  const auto g = involution2d_backward(x, kernels, 3, 2, 1, dil, r);
  return grad_check({{"x", &x, &g.x}, {"kernels", &kernels, &g.kernels}}, loss);
}

GradCheckReport check_maxpool2d(std::uint64_t seed) {
  auto x = rand_nonzero({2, 4, 6, 6}, seed * 17 + 1);
  const auto r = rand_t({2, 4, 3, 3}, seed * 17 + 2);
  auto loss = [&] { return weighted_sum(maxpool2d(x, 2, 2).out, r); };
  const auto pooled = maxpool2d(x, 2, 2);
  const auto gx = maxpool2d_backward(x.shape(), pooled.argmax, r);
  return grad_check({{"x", &x, &gx}}, loss);
}

GradCheckReport check_avgpool2d(std::uint64_t seed) {
  auto x = rand_t({2, 4, 6, 6}, seed * 19 + 1);
  const auto r = rand_t({2, 4, 3, 3}, seed * 19 + 2);
  auto loss = [&] { return weighted_sum(avgpool2d(x, 2), r); };
  const auto gx = avgpool2d_backward(x.shape(), 2, r);
  return grad_check({{"x", &x, &gx}}, loss, 0.125);
}

GradCheckReport check_upsample2x(std::uint64_t seed) {
  auto x = rand_t({2, 4, 4, 4}, seed * 23 + 1);
  const auto r = rand_t({2, 4, 8, 8}, seed * 23 + 2);
  auto loss = [&] { return weighted_sum(upsample2x(x), r); };
  const auto gx = upsample2x_backward(r);
  return grad_check({{"x", &x, &gx}}, loss, 0.125);
}

GradCheckReport check_batchnorm2d(std::uint64_t seed) {
  auto x = rand_t({2, 4, 6, 6}, seed * 29 + 1);
  auto gamma = rand_nonzero({1, 4, 1, 1}, seed * 29 + 2, 0.2);
  auto beta = rand_t({1, 4, 1, 1}, seed * 29 + 3);
  const auto r = rand_t({2, 4, 6, 6}, seed * 29 + 4);
  Tensor4d rm(1, 4, 1, 1);
  auto rv = Tensor4d::full(1, 4, 1, 1, 1.0);
  auto loss = [&] {
    return weighted_sum(batchnorm2d(x, gamma, beta, rm, rv, Mode::Train, 1e-5, 0.1), r);
  };
  BnCache<double> cache;
  batchnorm2d(x, gamma, beta, rm, rv, Mode::Train, 1e-5, 0.1, &cache);
  const auto g = batchnorm2d_backward(cache, gamma, r);
  return grad_check({{"x", &x, &g.x}, {"gamma", &gamma, &g.gamma}, {"beta", &beta, &g.beta}}, loss);
}

GradCheckReport check_relu(std::uint64_t seed) {
  auto x = rand_nonzero({2, 4, 6, 6}, seed * 31 + 1);
  const auto r = rand_t({2, 4, 6, 6}, seed * 31 + 2);
  auto loss = [&] { return weighted_sum(relu(x), r); };
  const auto gx = relu_backward(x, r);
  return grad_check({{"x", &x, &gx}}, loss);
}

GradCheckReport check_sigmoid(std::uint64_t seed) {
  auto x = rand_t({2, 4, 6, 6}, seed * 37 + 1, -3.0, 3.0);
  const auto r = rand_t({2, 4, 6, 6}, seed * 37 + 2);
  auto loss = [&] { return weighted_sum(sigmoid(x), r); };
  const auto gx = sigmoid_backward(sigmoid(x), r);
  return grad_check({{"x", &x, &gx}}, loss);
}

GradCheckReport check_add(std::uint64_t seed) {
  auto a = rand_t({2, 4, 6, 6}, seed * 41 + 1);
  auto b = rand_t({2, 4, 6, 6}, seed * 41 + 2);
  const auto r = rand_t({2, 4, 6, 6}, seed * 41 + 3);
  auto loss = [&] { return weighted_sum(add(a, b), r); };
  const auto [ga, gb] = add_backward(r);
  return grad_check({{"a", &a, &ga}, {"b", &b, &gb}}, loss, 0.125);
}

GradCheckReport check_mul(std::uint64_t seed) {
  auto a = rand_t({2, 4, 6, 6}, seed * 43 + 1);
  auto b = rand_t({2, 4, 6, 6}, seed * 43 + 2);
  const auto r = rand_t({2, 4, 6, 6}, seed * 43 + 3);
  auto loss = [&] { return weighted_sum(mul(a, b), r); };
  const auto [ga, gb] = mul_backward(a, b, r);
  return grad_check({{"a", &a, &ga}, {"b", &b, &gb}}, loss);
}

GradCheckReport check_concat(std::uint64_t seed) {
  auto a = rand_t({2, 3, 4, 4}, seed * 47 + 1);
  auto b = rand_t({2, 5, 4, 4}, seed * 47 + 2);
  const auto r = rand_t({2, 8, 4, 4}, seed * 47 + 3);
  auto loss = [&] { return weighted_sum(concat_channels(a, b), r); };
  const auto [ga, gb] = concat_channels_backward(3, r);
  return grad_check({{"a", &a, &ga}, {"b", &b, &gb}}, loss, 0.125);
}

GradCheckReport check_tversky(std::uint64_t seed) {
  std::mt19937_64 rng(seed * 53 + 1);
  Tensor4d pred(2, 1, 6, 6);
  Tensor4d target(2, 1, 6, 6);
  for (auto& v : pred.data) v = 0.05 + 0.9 * canonical(rng);
  for (auto& v : target.data) v = rng() % 2 == 0 ? 0.0 : 1.0;
  TverskyParams params;  // alpha 0.3, beta 0.7, smooth 1
  auto loss = [&] { return tversky_loss(pred, target, params).loss; };
  const auto res = tversky_loss(pred, target, params);
  return grad_check({{"pred", &pred, &res.grad}}, loss);
}

// --- layer checks ----------------------------------------------------------

struct ParamInputs {
  std::vector<GradCheckInput> inputs;
  std::vector<Tensor4d> grads;  // snapshots backing the analytic pointers
};

// Snapshot every parameter's accumulated gradient and register (value, grad)
// pairs for finite differencing. Reserve up front so the snapshot pointers
// stay valid while the vector grows.
template <typename M>
void collect_param_inputs(M& module, ParamInputs& pi) {
  std::vector<std::pair<std::string, Param<double>*>> entries;
  module.visit_params("", [&](const std::string& n, Param<double>& p) { entries.emplace_back(n, &p); });
  pi.grads.reserve(pi.grads.size() + entries.size());
  for (auto& [name, p] : entries) {
    pi.grads.push_back(p->grad);
    pi.inputs.push_back({name, &p->value, &pi.grads.back()});
  }
}

template <typename M>
void zero_param_grads(M& module) {
  module.visit_params("", [](const std::string&, Param<double>& p) { p.zero_grad(); });
}

GradCheckReport check_involution_layer(std::uint64_t seed) {
  InvolutionLayer<double> layer(8, 3, 2, 4, 1, 2);
  std::mt19937_64 rng(seed * 59 + 1);
  layer.init(rng);
  auto x = rand_t({2, 8, 6, 6}, seed * 59 + 2);
  const auto r = rand_t({2, 8, 6, 6}, seed * 59 + 3);
  auto loss = [&] { return weighted_sum(layer.forward(x, Mode::Train), r); };

  zero_param_grads(layer);
  InvolutionLayer<double>::Cache cache;
  layer.forward(x, Mode::Train, &cache);
  Tensor4d gx = layer.backward(cache, r);

  ParamInputs pi;
  pi.inputs.push_back({"x", &x, &gx});
  collect_param_inputs(layer, pi);
  return grad_check(pi.inputs, loss);
}

GradCheckReport check_conv_block(std::uint64_t seed) {
  ConvBlock<double> block(4, 6, 3);
  std::mt19937_64 rng(seed * 61 + 1);
  block.init(rng);
  auto x = rand_t({2, 4, 6, 6}, seed * 61 + 2);
  const auto r = rand_t({2, 6, 6, 6}, seed * 61 + 3);
  auto loss = [&] { return weighted_sum(block.forward(x, Mode::Train), r); };

  zero_param_grads(block);
  ConvBlock<double>::Cache cache;
  block.forward(x, Mode::Train, &cache);
  Tensor4d gx = block.backward(cache, r);

  ParamInputs pi;
  pi.inputs.push_back({"x", &x, &gx});
  collect_param_inputs(block, pi);
  return grad_check(pi.inputs, loss);
}

GradCheckReport check_dipc_block(std::uint64_t seed) {
  DipcBlock<double> block(1, 4, 3, 4, {1, 2, 4}, true, true);
  std::mt19937_64 rng(seed * 67 + 1);
  block.init(rng);
  auto f = rand_t({2, 4, 8, 8}, seed * 67 + 2);
  auto image = rand_nonzero({2, 3, 8, 8}, seed * 67 + 3);
  const auto r = rand_t({2, 8, 4, 4}, seed * 67 + 4);
  auto loss = [&] { return weighted_sum(block.forward(f, image, Mode::Train), r); };

  zero_param_grads(block);
  DipcBlock<double>::Cache cache;
  block.forward(f, image, Mode::Train, &cache);
  auto g = block.backward(cache, r);

  ParamInputs pi;
  pi.inputs.push_back({"f", &f, &g.f});
  pi.inputs.push_back({"image", &image, &g.image});
  collect_param_inputs(block, pi);
  return grad_check(pi.inputs, loss);
}

GradCheckReport check_model(std::uint64_t seed) {
  SpeedNetConfig cfg;
  cfg.img_size = 32;
  cfg.channels = {4, 4, 8, 16};
  cfg.bottleneck_channels = 8;
  cfg.seed = seed;
  SpeedNet<double> model(cfg);
  auto x = rand_nonzero({1, 3, 32, 32}, seed * 71 + 1);
  const auto r = rand_t({1, 1, 32, 32}, seed * 71 + 2);
  auto loss = [&] { return weighted_sum(model.forward(x, Mode::Train), r); };

  model.zero_grads();
  SpeedNet<double>::Cache cache;
  model.forward(x, Mode::Train, &cache);
  model.backward(cache, r);

  ParamInputs pi;
  collect_param_inputs(model, pi);
  // >= 2 coordinates per parameter tensor, > 200 coordinates in total.
  return grad_check_sampled(pi.inputs, loss, 2, seed * 71 + 3);
}

struct NamedCheck {
  const char* name;
  double threshold;
  CheckFn fn;
  int seeds_override = 0;
};

}  // namespace

const std::vector<std::string>& mutable_backward_ops() {
  static const std::vector<std::string> ops = {
      "conv2d", "involution2d", "maxpool2d",  "avgpool2d", "upsample2x", "batchnorm2d",
      "relu",   "sigmoid",      "add",        "mul",       "concat",     "tversky_loss",
  };
  return ops;
}

std::vector<CheckOutcome> run_gradcheck_suite(const GradSuiteOptions& options) {
  const std::vector<NamedCheck> checks = {
      {"add", 1e-10, check_add},
      {"mul", 1e-4, check_mul},
      {"relu", 1e-4, check_relu},
      {"sigmoid", 1e-4, check_sigmoid},
      {"concat", 1e-10, check_concat},
      {"upsample2x", 1e-10, check_upsample2x},
      {"maxpool2d", 1e-4, check_maxpool2d},
      {"avgpool2d", 1e-4, check_avgpool2d},
      {"conv2d", 1e-4, check_conv2d},
      {"involution2d", 1e-4, check_involution2d},
      {"batchnorm2d", 1e-4, check_batchnorm2d},
      {"tversky_loss", 1e-6, check_tversky},
      {"involution_layer", 1e-4, check_involution_layer},
      {"conv_block", 1e-4, check_conv_block},
      {"dipc_block", 1e-4, check_dipc_block},
      {"model", 1e-3, check_model, 2},
  };

  std::vector<CheckOutcome> outcomes;
  for (const auto& check : checks) {
    if (!options.only.empty() && options.only != check.name) continue;
    const int seeds = check.seeds_override > 0 ? std::min(check.seeds_override, options.seeds) : options.seeds;
    CheckOutcome out;
    out.name = check.name;
    out.threshold = check.threshold;
    try {
      const auto rep = over_seeds(check.fn, seeds, 1000);
      out.max_rel_err = rep.max_rel_err;
      out.pass = rep.max_rel_err < check.threshold;
      out.worst = rep.worst_tensor + "[" + std::to_string(rep.worst_coord) +
                  "] analytic=" + std::to_string(rep.analytic) + " numeric=" + std::to_string(rep.numeric);
    } catch (const Error& e) {
      out.max_rel_err = std::numeric_limits<double>::infinity();
      out.pass = false;
      out.worst = e.what();
    }
    outcomes.push_back(std::move(out));
  }
  if (!options.only.empty() && outcomes.empty()) {
    throw ConfigError("unknown gradient check '" + options.only + "'");
  }
  return outcomes;
}

}  // namespace speednet
