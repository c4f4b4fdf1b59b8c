#pragma once

#include <random>

#include "speednet/tensor.hpp"

namespace helpers {

using speednet::Tensor4;

template <typename T>
Tensor4<T> random_tensor(speednet::i64 n, speednet::i64 c, speednet::i64 h, speednet::i64 w, std::uint64_t seed,
                         T lo = T(-1), T hi = T(1)) {
  Tensor4<T> t(n, c, h, w);
  std::mt19937_64 rng(seed);
  t.fill_uniform(rng, lo, hi);
  return t;
}

// Random values bounded away from zero; keeps finite differences clear of the
// ReLU kink and max-pool ties.
template <typename T>
Tensor4<T> random_tensor_nonzero(speednet::i64 n, speednet::i64 c, speednet::i64 h, speednet::i64 w,
                                 std::uint64_t seed, T margin = T(0.05)) {
  Tensor4<T> t(n, c, h, w);
  std::mt19937_64 rng(seed);
  for (auto& v : t.data) {
    const double mag = margin + (1.0 - margin) * speednet::canonical(rng);
    v = static_cast<T>(rng() % 2 == 0 ? mag : -mag);
  }
  return t;
}

template <typename T>
bool exactly_equal(const Tensor4<T>& a, const Tensor4<T>& b) {
  if (!a.same_shape(b)) return false;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    if (a.data[i] != b.data[i]) return false;
  }
  return true;
}

template <typename T>
double max_abs_diff(const Tensor4<T>& a, const Tensor4<T>& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.data.size(); ++i) {
    m = std::max(m, std::fabs(static_cast<double>(a.data[i]) - static_cast<double>(b.data[i])));
  }
  return m;
}

}  // namespace helpers
