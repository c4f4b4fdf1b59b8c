#pragma once

#include <cmath>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "speednet/tensor.hpp"

namespace speednet {

struct GradCheckReport {
  double max_rel_err = 0.0;
  std::string worst_tensor;
  i64 worst_coord = -1;
  double analytic = 0.0;
  double numeric = 0.0;
};

// One perturbable input of the check: a pointer into live 64-bit storage the
// loss closure reads, plus the analytic gradient claimed for it.
struct GradCheckInput {
  std::string name;
  Tensor4<double>* value = nullptr;
  const Tensor4<double>* analytic_grad = nullptr;
};

namespace detail {

// Absolute agreement below this is indistinguishable from the float64
// finite-difference noise floor. Parameters whose gradient is structurally
// zero (a conv bias feeding BatchNorm, whose uniform shift the normalization
// cancels) live there; any real backward defect sits orders of magnitude
// above it.
inline constexpr double kGradAbsTol = 1e-9;

inline double rel_err(double analytic, double numeric) {
  if (std::fabs(analytic - numeric) <= kGradAbsTol) return 0.0;
  return std::fabs(analytic - numeric) / std::max({std::fabs(analytic), std::fabs(numeric), 1e-8});
}

inline double central_difference(const GradCheckInput& in, i64 coord, const std::function<double()>& loss, double h) {
  double& slot = in.value->data[static_cast<std::size_t>(coord)];
  const double saved = slot;
  slot = saved + h;
  const double fp = loss();
  slot = saved - h;
  const double fm = loss();
  slot = saved;
  if (!std::isfinite(fp) || !std::isfinite(fm)) {
    throw NumericError("grad_check: non-finite loss while perturbing " + in.name + "[" + std::to_string(coord) + "]");
  }
  return (fp - fm) / (2.0 * h);
}

// Relative error |a-n| / max(|a|, |n|, 1e-8) for one coordinate. A single
// step size is unreliable near ReLU kinks (the difference interval straddles
// the kink) and for near-zero gradients (rounding noise dominates), so
// suspicious coordinates are re-measured over a step ladder and the best
// estimate kept. A wrong backward is wrong at every step size, so this only
// filters step-size artifacts, never real defects.
inline void check_coord(GradCheckReport& rep, const GradCheckInput& in, i64 coord,
                        const std::function<double()>& loss, double h) {
  const double analytic = in.analytic_grad->data[static_cast<std::size_t>(coord)];
  if (!std::isfinite(analytic)) {
    throw NumericError("grad_check: non-finite analytic gradient for " + in.name + "[" + std::to_string(coord) + "]");
  }
  double numeric = central_difference(in, coord, loss, h);
  double rel = rel_err(analytic, numeric);
  if (rel >= 1e-6) {
    for (double factor : {0.125, 0.015625, 1.0 / 512.0, 8.0, 64.0}) {
      const double n2 = central_difference(in, coord, loss, h * factor);
      const double r2 = rel_err(analytic, n2);
      if (r2 < rel) {
        rel = r2;
        numeric = n2;
      }
    }
  }
  if (rel > rep.max_rel_err) {
    rep.max_rel_err = rel;
    rep.worst_tensor = in.name;
    rep.worst_coord = coord;
    rep.analytic = analytic;
    rep.numeric = numeric;
  }
}

}  // namespace detail

// Central finite differences over every coordinate of every input, compared
// against the supplied analytic gradients. `loss` must be a pure function of
// the current input values. Relative error per coordinate is
// |a - n| / max(|a|, |n|, 1e-8); the worst coordinate is reported.
inline GradCheckReport grad_check(const std::vector<GradCheckInput>& inputs, const std::function<double()>& loss,
                                  double h = 1e-5) {
  GradCheckReport rep;
  for (const auto& in : inputs) {
    if (!in.value || !in.analytic_grad || !in.value->same_shape(*in.analytic_grad)) {
      throw ShapeError("grad_check: input '" + in.name + "' missing value/gradient or shape mismatch");
    }
    for (i64 coord = 0; coord < in.value->numel(); ++coord) {
      detail::check_coord(rep, in, coord, loss, h);
    }
  }
  return rep;
}

// Same, but probing only `max_coords` seeded-random coordinates per input
// (all coordinates when the input is smaller). For end-to-end model checks.
inline GradCheckReport grad_check_sampled(const std::vector<GradCheckInput>& inputs,
                                          const std::function<double()>& loss, i64 max_coords, std::uint64_t seed,
                                          double h = 1e-5) {
  GradCheckReport rep;
  std::mt19937_64 rng(seed);
  for (const auto& in : inputs) {
    if (!in.value || !in.analytic_grad || !in.value->same_shape(*in.analytic_grad)) {
      throw ShapeError("grad_check: input '" + in.name + "' missing value/gradient or shape mismatch");
    }
    const i64 total = in.value->numel();
    if (total <= max_coords) {
      for (i64 coord = 0; coord < total; ++coord) {
        detail::check_coord(rep, in, coord, loss, h);
      }
    } else {
      for (i64 k = 0; k < max_coords; ++k) {
        detail::check_coord(rep, in, uniform_index(rng, total), loss, h);
      }
    }
  }
  return rep;
}

}  // namespace speednet
