#include <doctest.h>

#include "speednet/model.hpp"
#include "test_helpers.hpp"

using namespace speednet;
using helpers::random_tensor;

namespace {

SpeedNetConfig toy_config(std::uint64_t seed = 1) {
  SpeedNetConfig cfg;
  cfg.img_size = 32;
  cfg.channels = {4, 4, 8, 16};
  cfg.bottleneck_channels = 8;
  cfg.seed = seed;
  return cfg;
}

template <typename T>
std::vector<T> flatten_params(SpeedNet<T>& m) {
  std::vector<T> out;
  m.visit_params([&](const std::string&, Param<T>& p) {
    out.insert(out.end(), p.value.data.begin(), p.value.data.end());
  });
  return out;
}

}  // namespace

TEST_CASE("same seed builds bit-identical parameters, different seed differs") {
  SpeedNet<float> a(toy_config(7)), b(toy_config(7)), c(toy_config(8));
  CHECK(flatten_params(a) == flatten_params(b));
  CHECK(flatten_params(a) != flatten_params(c));
}

TEST_CASE("forward maps (b,3,S,S) to (b,1,S,S) probabilities") {
  SpeedNet<float> model(toy_config());
  auto x = random_tensor<float>(2, 3, 32, 32, 5, 0.0f, 1.0f);
  auto pred = model.forward(x, Mode::Infer);
  CHECK(pred.shape() == Shape4{2, 1, 32, 32});
  for (float v : pred.data) {
    CHECK(v > 0.0f);
    CHECK(v < 1.0f);
  }
}

TEST_CASE("forward rejects wrong input sizes") {
  SpeedNet<float> model(toy_config());
  auto bad = random_tensor<float>(1, 3, 16, 16, 6);
  CHECK_THROWS_AS(model.forward(bad, Mode::Infer), ShapeError);
}

TEST_CASE("all-zero weights with a head bias produce a constant sigmoid(b) map") {
  SpeedNet<double> model(toy_config());
  model.visit_params([](const std::string&, Param<double>& p) { p.value.zero(); });
  model.visit_params([](const std::string& name, Param<double>& p) {
    if (name.ends_with(".gamma")) p.value.fill(1.0);
    if (name == "head.bias") p.value.fill(0.7);
  });
  auto x = random_tensor<double>(1, 3, 32, 32, 7, 0.0, 1.0);
  auto pred = model.forward(x, Mode::Train);
  const double expected = 1.0 / (1.0 + std::exp(-0.7));
  for (double v : pred.data) CHECK(v == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("infer-mode forward is pure: repeated calls identical, no state mutated") {
  SpeedNet<float> model(toy_config(3));
  // Fill running stats with something non-trivial first.
  auto warm = random_tensor<float>(2, 3, 32, 32, 8, 0.0f, 1.0f);
  model.forward(warm, Mode::Train);

  std::vector<float> stats_before;
  model.visit_buffers([&](const std::string&, Tensor4<float>& b) {
    stats_before.insert(stats_before.end(), b.data.begin(), b.data.end());
  });

  auto x = random_tensor<float>(1, 3, 32, 32, 9, 0.0f, 1.0f);
  auto p1 = model.forward(x, Mode::Infer);
  auto p2 = model.forward(x, Mode::Infer);
  CHECK(helpers::exactly_equal(p1, p2));

  std::vector<float> stats_after;
  model.visit_buffers([&](const std::string&, Tensor4<float>& b) {
    stats_after.insert(stats_after.end(), b.data.begin(), b.data.end());
  });
  CHECK(stats_before == stats_after);
}

TEST_CASE("encoder level n output spatial size is img/2^n") {
  SpeedNet<float> model(toy_config(4));
  auto x = random_tensor<float>(1, 3, 32, 32, 10, 0.0f, 1.0f);
  SpeedNet<float>::Cache cache;
  model.forward(x, Mode::Train, &cache);
  for (int n = 0; n < 4; ++n) {
    const auto& bn_xhat = cache.levels[static_cast<std::size_t>(n)].pair1.bn.xhat;
    const i64 expect = 32 >> (n + 1);
    CHECK(bn_xhat.h == expect);
    CHECK(bn_xhat.w == expect);
  }
}

TEST_CASE("dilated-bottleneck variant differs from full only in bottleneck dilation") {
  auto cfg = toy_config(11);
  SpeedNet<float> full(cfg);
  cfg.variant = Variant::DilatedBottleneck;
  SpeedNet<float> db(cfg);

  auto fc = count_parameters(full);
  auto dc = count_parameters(db);
  CHECK(fc.trainable == dc.trainable);
  CHECK(fc.total_with_stats == dc.total_with_stats);

  // Same structure per parameter name and shape...
  std::vector<std::pair<std::string, Shape4>> fs, ds;
  full.visit_params([&](const std::string& n, Param<float>& p) { fs.emplace_back(n, p.value.shape()); });
  db.visit_params([&](const std::string& n, Param<float>& p) { ds.emplace_back(n, p.value.shape()); });
  CHECK(fs == ds);

  // ...except the bottleneck conv dilation/padding.
  CHECK(full.bott0.conv.dilation == 1);
  CHECK(db.bott0.conv.dilation == cfg.bottleneck_dilation);
  CHECK(db.bott1.conv.dilation == cfg.bottleneck_dilation);
  CHECK(full.levels[0].dipc.use_involution == db.levels[0].dipc.use_involution);
}

TEST_CASE("count_parameters equals the per-layer sum") {
  SpeedNet<float> model(toy_config(12));
  i64 by_layer = 0;
  by_layer += param_count<float>(model.stem0) + param_count<float>(model.stem1);
  for (auto& lv : model.levels) {
    by_layer += param_count<float>(lv.dipc) + param_count<float>(lv.pair0) + param_count<float>(lv.pair1);
  }
  by_layer += param_count<float>(model.bott0) + param_count<float>(model.bott1);
  for (auto& d : model.dec) by_layer += param_count<float>(d.cb0) + param_count<float>(d.cb1);
  by_layer += param_count<float>(model.head);

  auto counts = count_parameters(model);
  CHECK(counts.trainable == by_layer);
  CHECK(counts.total_with_stats > counts.trainable);  // BN running stats on top
}

TEST_CASE("full variant has strictly fewer parameters than no-involution") {
  auto cfg = toy_config(13);
  SpeedNet<float> full(cfg);
  cfg.variant = Variant::NoInvolution;
  SpeedNet<float> noinv(cfg);
  CHECK(count_parameters(full).trainable < count_parameters(noinv).trainable);
}

TEST_CASE("default configuration lands inside the published parameter windows") {
  SpeedNetConfig cfg;
  SpeedNet<float> full(cfg);
  const auto fc = count_parameters(full);
  CHECK(fc.trainable > 2'040'000);
  CHECK(fc.trainable < 2'760'000);

  cfg.variant = Variant::NoInvolution;
  SpeedNet<float> noinv(cfg);
  const auto nc = count_parameters(noinv);
  CHECK(nc.trainable > 4'207'500);
  CHECK(nc.trainable < 5'692'500);
  CHECK(fc.trainable < nc.trainable);
}

TEST_CASE("config validation reports the offending level") {
  SpeedNetConfig cfg = toy_config();
  cfg.img_size = 40;  // not a multiple of 16
  CHECK_THROWS_AS((void)SpeedNet<float>(cfg), ConfigError);

  cfg = toy_config();
  cfg.channels = {4, 6, 8, 16};  // level 2 pyramid width 12 is not divisible by r=8
  cfg.involution_r = 8;
  CHECK_THROWS_WITH_AS((void)SpeedNet<float>(cfg), doctest::Contains("level"), ConfigError);
}
