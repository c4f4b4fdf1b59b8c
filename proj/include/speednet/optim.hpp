#pragma once

#include <cmath>
#include <limits>
#include <string>
#include <vector>

#include "speednet/layers.hpp"

namespace speednet {

// Bias-corrected Adam over a fixed parameter list. Update order is the
// registration order, so training is deterministic.
template <typename T>
struct Adam {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::uint64_t t = 0;

  struct Slot {
    std::string name;
    Param<T>* param = nullptr;
    Tensor4<T> m;
    Tensor4<T> v;
  };
  std::vector<Slot> slots;

  template <typename M>
  void attach(M& module) {
    slots.clear();
    module.visit_params("", [&](const std::string& name, Param<T>& p) {
      slots.push_back(Slot{name, &p, Tensor4<T>(p.value.shape()), Tensor4<T>(p.value.shape())});
    });
    t = 0;
  }

  void step(double lr) {
    ++t;
    const T c1 = static_cast<T>(1.0 / (1.0 - std::pow(beta1, static_cast<double>(t))));
    const T c2 = static_cast<T>(1.0 / (1.0 - std::pow(beta2, static_cast<double>(t))));
    const T b1 = static_cast<T>(beta1), b2 = static_cast<T>(beta2);
    const T e = static_cast<T>(eps), step_size = static_cast<T>(lr);
    for (auto& slot : slots) {
      const auto& g = slot.param->grad;
      for (std::size_t i = 0; i < g.data.size(); ++i) {
        if (!std::isfinite(g.data[i])) {
          throw NumericError("adam_step: non-finite gradient in " + slot.name + "[" + std::to_string(i) + "]");
        }
        slot.m.data[i] = b1 * slot.m.data[i] + (T(1) - b1) * g.data[i];
        slot.v.data[i] = b2 * slot.v.data[i] + (T(1) - b2) * g.data[i] * g.data[i];
        const T mhat = slot.m.data[i] * c1;
        const T vhat = slot.v.data[i] * c2;
        slot.param->value.data[i] -= step_size * mhat / (std::sqrt(vhat) + e);
      }
    }
  }
};

// Reduce-on-plateau: multiply the rate by `factor` after `patience`
// consecutive epochs without the monitored loss improving by more than
// `min_delta`. Never increases the rate.
struct PlateauScheduler {
  double lr = 1e-3;
  double factor = 0.1;
  int patience = 12;
  double min_delta = 1e-6;

  double best = std::numeric_limits<double>::infinity();
  int epochs_since_improvement = 0;

  double step(double epoch_loss) {
    if (epoch_loss < best - min_delta) {
      best = epoch_loss;
      epochs_since_improvement = 0;
    } else {
      ++epochs_since_improvement;
      if (epochs_since_improvement >= patience) {
        lr *= factor;
        epochs_since_improvement = 0;
      }
    }
    return lr;
  }
};

}  // namespace speednet
