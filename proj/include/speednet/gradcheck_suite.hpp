#pragma once

#include <string>
#include <vector>

#include "speednet/grad_check.hpp"

namespace speednet {

struct CheckOutcome {
  std::string name;
  double max_rel_err = 0.0;
  double threshold = 0.0;
  bool pass = false;
  std::string worst;  // tensor name and coordinate of the worst error
};

struct GradSuiteOptions {
  int seeds = 5;
  std::string only;  // run a single named check when non-empty
};

// Runs 64-bit central-finite-difference checks for every differentiable op,
// every learned layer, and a sampled end-to-end toy model. Thresholds:
// 1e-10 for exactly-linear ops, 1e-6 for the Tversky gradient, 1e-3 for the
// end-to-end model, 1e-4 for everything else.
std::vector<CheckOutcome> run_gradcheck_suite(const GradSuiteOptions& options = {});

// Names accepted by testing::set_backward_mutation, one per primitive backward.
const std::vector<std::string>& mutable_backward_ops();

}  // namespace speednet
