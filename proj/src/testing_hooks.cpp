#include "speednet/testing.hpp"

namespace speednet::testing {

namespace {
std::string g_mutated_op;
}

void set_backward_mutation(const std::string& name) { g_mutated_op = name; }
const std::string& backward_mutation() { return g_mutated_op; }

}  // namespace speednet::testing
