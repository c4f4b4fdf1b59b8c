#pragma once

#include "speednet/tensor.hpp"
#include "speednet/testing.hpp"

namespace speednet {

struct TverskyParams {
  double alpha = 0.3;   // false-positive weight
  double beta = 0.7;    // false-negative weight
  double smooth = 1.0;
};

template <typename T>
struct TverskyResult {
  double loss = 0.0;
  Tensor4<T> grad;  // d(loss)/d(pred)
};

// Soft Tversky loss, averaged over the batch. Per batch item:
//   TP = sum p*t, FP = sum p*(1-t), FN = sum (1-p)*t
//   TI = (TP + smooth) / (TP + alpha*FP + beta*FN + smooth)
//   loss_b = 1 - TI
// pred must hold probabilities in [0,1] and target binary {0,1} values.
template <typename T>
TverskyResult<T> tversky_loss(const Tensor4<T>& pred, const Tensor4<T>& target, const TverskyParams& p) {
  require_same_shape(pred, target, "tversky_loss");
#ifndef NDEBUG
  for (T v : pred.data) {
    if (!(v >= T(0) && v <= T(1))) throw NumericError("tversky_loss: prediction outside [0,1]");
  }
#endif
  TverskyResult<T> result;
  result.grad = Tensor4<T>(pred.shape());
  const i64 per_item = pred.c * pred.h * pred.w;
  double loss_sum = 0.0;
  for (i64 b = 0; b < pred.n; ++b) {
    const T* pp = pred.data.data() + b * per_item;
    const T* tt = target.data.data() + b * per_item;
    double tp = 0.0, fp = 0.0, fn = 0.0;
    for (i64 i = 0; i < per_item; ++i) {
      const double pv = pp[i], tv = tt[i];
      tp += pv * tv;
      fp += pv * (1.0 - tv);
      fn += (1.0 - pv) * tv;
    }
    const double num = tp + p.smooth;
    const double den = tp + p.alpha * fp + p.beta * fn + p.smooth;
    loss_sum += 1.0 - num / den;

    // d(TI)/dp_i = (t*den - num*(t + alpha*(1-t) - beta*t)) / den^2
    T* gg = result.grad.data.data() + b * per_item;
    const double inv_den2 = 1.0 / (den * den);
    for (i64 i = 0; i < per_item; ++i) {
      const double tv = tt[i];
      const double dden = tv + p.alpha * (1.0 - tv) - p.beta * tv;
      const double dti = (tv * den - num * dden) * inv_den2;
      gg[i] = static_cast<T>(-dti / static_cast<double>(pred.n));
    }
  }
  result.loss = loss_sum / static_cast<double>(pred.n);
  testing::apply_mutation("tversky_loss", &result.grad);
  return result;
}

}  // namespace speednet
