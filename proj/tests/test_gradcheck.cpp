#include <doctest.h>

#include "speednet/gradcheck_suite.hpp"
#include "speednet/ops.hpp"
#include "speednet/testing.hpp"
#include "test_helpers.hpp"

using namespace speednet;

TEST_CASE("gradient suite passes for every op and layer") {
  const auto outcomes = run_gradcheck_suite();
  REQUIRE(outcomes.size() >= 16);
  for (const auto& o : outcomes) {
    INFO(o.name, ": max_rel_err=", o.max_rel_err, " worst=", o.worst);
    CHECK(o.pass);
  }
}

TEST_CASE("linear ops finite-difference almost exactly") {
  const auto outcomes = run_gradcheck_suite({1, "add"});
  REQUIRE(outcomes.size() == 1);
  CHECK(outcomes[0].max_rel_err < 1e-10);
}

TEST_CASE("grad_check aborts on non-finite values with coordinates") {
  Tensor4d x(1, 1, 1, 2);
  x(0, 0, 0, 0) = 1.0;
  Tensor4d g(1, 1, 1, 2);
  auto loss = [&] { return 1.0 / (x(0, 0, 0, 0) - 1.0); };  // blows up when perturbed back to 1
  std::vector<GradCheckInput> inputs{{"x", &x, &g}};
  CHECK_THROWS_AS((void)grad_check(inputs, loss), NumericError);
}

TEST_CASE("a sign flip in any primitive backward is caught and named") {
  // Mutation testing at suite level: arm the negation hook for one op and the
  // check with that exact name must fail.
  for (const auto& op : mutable_backward_ops()) {
    testing::set_backward_mutation(op);
    const auto outcomes = run_gradcheck_suite({1, op});
    testing::set_backward_mutation("");
    REQUIRE(outcomes.size() == 1);
    INFO("op=", op);
    CHECK(outcomes[0].name == op);
    CHECK(!outcomes[0].pass);
  }
}
