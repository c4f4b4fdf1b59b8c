#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <type_traits>
#include <vector>

#include "speednet/errors.hpp"

namespace speednet {

using i64 = std::int64_t;

enum class Mode { Train, Infer };

// Uniform draw in [0,1) from the top 53 bits of a mt19937_64 word.
// Pinned bit pattern, unlike std::uniform_real_distribution.
inline double canonical(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Simple modulo draw; the tiny bias is irrelevant
// here and the result is identical on every platform.
inline i64 uniform_index(std::mt19937_64& rng, i64 n) {
  assert(n > 0);
  return static_cast<i64>(rng() % static_cast<std::uint64_t>(n));
}

struct Shape4 {
  i64 n = 0, c = 0, h = 0, w = 0;

  bool operator==(const Shape4&) const = default;
  i64 numel() const { return n * c * h * w; }

  std::string str() const {
    return "(" + std::to_string(n) + "," + std::to_string(c) + "," +
           std::to_string(h) + "," + std::to_string(w) + ")";
  }
};

// Dense rank-4 array in row-major (batch, channel, row, col) order.
template <typename T>
struct Tensor4 {
  static_assert(std::is_floating_point_v<T>, "Tensor4 holds 32/64-bit reals");

  i64 n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor4() = default;

  Tensor4(i64 n_, i64 c_, i64 h_, i64 w_) : n(n_), c(c_), h(h_), w(w_) {
    if (n < 1 || c < 1 || h < 1 || w < 1) {
      throw ShapeError("Tensor4: all dimensions must be >= 1, got " + shape().str());
    }
    data.assign(static_cast<std::size_t>(numel()), T(0));
  }

  explicit Tensor4(Shape4 s) : Tensor4(s.n, s.c, s.h, s.w) {}

  static Tensor4 full(i64 n, i64 c, i64 h, i64 w, T value) {
    Tensor4 t(n, c, h, w);
    std::fill(t.data.begin(), t.data.end(), value);
    return t;
  }

  Shape4 shape() const { return Shape4{n, c, h, w}; }
  i64 numel() const { return n * c * h * w; }
  bool same_shape(const Tensor4& o) const { return shape() == o.shape(); }

  i64 index(i64 b, i64 ci, i64 y, i64 x) const {
    assert(b >= 0 && b < n && ci >= 0 && ci < c && y >= 0 && y < h && x >= 0 && x < w);
    return ((b * c + ci) * h + y) * w + x;
  }

  T& operator()(i64 b, i64 ci, i64 y, i64 x) { return data[static_cast<std::size_t>(index(b, ci, y, x))]; }
  T operator()(i64 b, i64 ci, i64 y, i64 x) const { return data[static_cast<std::size_t>(index(b, ci, y, x))]; }

  // Pointer to the start of one (b, ci) plane; rows are contiguous.
  T* plane(i64 b, i64 ci) { return data.data() + (b * c + ci) * h * w; }
  const T* plane(i64 b, i64 ci) const { return data.data() + (b * c + ci) * h * w; }

  void fill(T v) { std::fill(data.begin(), data.end(), v); }
  void zero() { fill(T(0)); }

  void fill_uniform(std::mt19937_64& rng, T lo, T hi) {
    for (auto& v : data) v = lo + static_cast<T>(canonical(rng)) * (hi - lo);
  }

  template <typename U>
  Tensor4<U> cast() const {
    Tensor4<U> out(n, c, h, w);
    for (std::size_t i = 0; i < data.size(); ++i) out.data[i] = static_cast<U>(data[i]);
    return out;
  }

  bool all_finite() const {
    for (T v : data) {
      if (!std::isfinite(v)) return false;
    }
    return true;
  }
};

using Tensor4f = Tensor4<float>;
using Tensor4d = Tensor4<double>;

template <typename T>
void require_same_shape(const Tensor4<T>& a, const Tensor4<T>& b, const char* where) {
  if (!a.same_shape(b)) {
    throw ShapeError(std::string(where) + ": shape mismatch " + a.shape().str() + " vs " + b.shape().str());
  }
}

// Debug-build invariant: finite inputs must produce finite outputs.
template <typename T>
inline void debug_check_finite(const Tensor4<T>& t, const char* where) {
#ifndef NDEBUG
  if (!t.all_finite()) throw NumericError(std::string(where) + ": non-finite value in output");
#else
  (void)t;
  (void)where;
#endif
}

}  // namespace speednet
