#pragma once

#include <string>

#include "speednet/tensor.hpp"

namespace speednet::testing {

// Verification hook used by the gradient-check suite: while a backward
// mutation is armed for op `name`, that op's backward negates every gradient
// it produces. This lets the suite prove it would catch a sign bug in any
// single backward implementation. Empty name (the default) disarms it.
void set_backward_mutation(const std::string& name);
const std::string& backward_mutation();

inline bool mutated(const char* op) { return backward_mutation() == op; }

template <typename T>
void apply_mutation(const char* op, Tensor4<T>* g0, Tensor4<T>* g1 = nullptr, Tensor4<T>* g2 = nullptr) {
  if (!mutated(op)) return;
  for (Tensor4<T>* g : {g0, g1, g2}) {
    if (!g) continue;
    for (auto& v : g->data) v = -v;
  }
}

}  // namespace speednet::testing
