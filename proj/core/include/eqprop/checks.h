#pragma once

#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

namespace eqprop {

struct CheckResult {
  std::string name;
  bool passed = false;
  std::string detail;
  double seconds = 0.0;
};

// Instance counts of 0 use the suite defaults (50 gradient instances, 100
// nudged-cost instances, 20 cross-derivative instances).
struct GradcheckOptions {
  std::uint64_t seed = 1234;
  int gradient_instances = 0;
  int prop1_instances = 0;
  int lemma1_instances = 0;
};

struct StochasticCheckOptions {
  std::uint64_t seed = 1234;
  int grid_points = 401;
  long langevin_steps = 20'000'000;
};

// Oracle comparisons on seeded interior instances of a 6-5-4 network.
CheckResult check_gradient_equivalence(const GradcheckOptions& options);  // eqprop vs finite differences
CheckResult check_oracle_triangle(const GradcheckOptions& options);       // recurrent backprop vs both
CheckResult check_nudge_lowers_cost(const GradcheckOptions& options);
CheckResult check_cross_derivative_symmetry(const GradcheckOptions& options);
CheckResult check_stdp_telescoping(const GradcheckOptions& options);
CheckResult check_stdp_left_point(const GradcheckOptions& options);

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& options);

// Quadrature checks on a 1-1-1 network (two state units).
CheckResult check_stochastic_gradient(const StochasticCheckOptions& options);
CheckResult check_cost_variance(const StochasticCheckOptions& options);
CheckResult check_langevin_vs_quadrature(const StochasticCheckOptions& options);

std::vector<CheckResult> run_stochastic_suite(const StochasticCheckOptions& options);

// One line per check: PASS/FAIL, name, seconds, detail.
void print_check_table(std::ostream& out, const std::vector<CheckResult>& results);
bool all_passed(const std::vector<CheckResult>& results);

}  // namespace eqprop
