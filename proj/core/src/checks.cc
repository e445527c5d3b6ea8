#include "eqprop/checks.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <numbers>

#include "eqprop/errors.h"
#include "eqprop/model.h"
#include "eqprop/oracles.h"
#include "eqprop/relaxation.h"
#include "eqprop/rng.h"
#include "eqprop/stochastic.h"

namespace eqprop {

namespace {

const Topology& oracle_topology() {
  static const Topology topology({6, 5, 4});
  return topology;
}

std::string format(const char* fmt, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof(buf), fmt, args...);
  return buf;
}

int or_default(int value, int fallback) { return value > 0 ? value : fallback; }

OracleInstance instance(std::uint64_t seed, int i) {
  return sample_interior_instance(oracle_topology(), derive_seed(seed, static_cast<std::uint64_t>(i)));
}

CheckResult timed(std::string name, const std::function<void(CheckResult&)>& body) {
  CheckResult r;
  r.name = std::move(name);
  const auto start = std::chrono::steady_clock::now();
  try {
    body(r);
  } catch (const Error& e) {
    r.passed = false;
    r.detail = std::string("error: ") + e.what();
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return r;
}

// 1-1-1 network for the quadrature checks.
struct Toy {
  LayeredParams<double> params;
  VectorXd x;
  VectorXd target;
};

Toy stochastic_toy(std::uint64_t seed) {
  Rng rng(derive_seed(seed, 0x70e));
  Toy toy;
  toy.params = LayeredParams<double>::zeros(Topology({1, 1, 1}));
  for (auto& w : toy.params.weights) w(0, 0) = rng.uniform(-1.0, 1.0);
  for (auto& b : toy.params.biases) b[0] = rng.uniform(-0.5, 0.5);
  toy.x = VectorXd::Constant(1, rng.uniform(0.2, 0.8));
  toy.target = VectorXd::Constant(1, rng.uniform(0.0, 1.0));
  return toy;
}

}  // namespace

CheckResult check_gradient_equivalence(const GradcheckOptions& options) {
  return timed("eqprop_vs_finite_difference", [&](CheckResult& r) {
    const int n = or_default(options.gradient_instances, 50);
    int good = 0;
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const OracleInstance inst = instance(options.seed, i);
      const GradEstimate ep = eqprop_grad(inst.params, inst.x, inst.target, 1e-4, EstimatorMode::kCentral);
      const GradEstimate fd = fd_objective_grad(inst.params, inst.x, inst.target, 1e-6);
      const double err = relative_error(ep, fd);
      worst = std::max(worst, err);
      if (err < 1e-3) ++good;
    }
    r.passed = good >= static_cast<int>(std::ceil(0.95 * n));
    r.detail = format("%d/%d instances below 1e-3 (need 95%%), worst %.3g", good, n, worst);
  });
}

CheckResult check_oracle_triangle(const GradcheckOptions& options) {
  return timed("rbp_vs_fd_and_eqprop", [&](CheckResult& r) {
    const int n = or_default(options.gradient_instances, 50);
    double worst_fd = 0.0;
    double worst_ep = 0.0;
    for (int i = 0; i < n; ++i) {
      const OracleInstance inst = instance(options.seed, i);
      const GradEstimate rbp = rbp_grad(inst.params, inst.x, inst.target);
      const GradEstimate fd = fd_objective_grad(inst.params, inst.x, inst.target, 1e-6);
      const GradEstimate ep = eqprop_grad(inst.params, inst.x, inst.target, 1e-4, EstimatorMode::kCentral);
      worst_fd = std::max(worst_fd, relative_error(rbp, fd));
      worst_ep = std::max(worst_ep, relative_error(rbp, ep));
    }
    r.passed = worst_fd < 1e-5 && worst_ep < 1e-4;
    r.detail = format("%d instances, worst rbp/fd %.3g (< 1e-5), worst rbp/eqprop %.3g (< 1e-4)", n, worst_fd,
                      worst_ep);
  });
}

CheckResult check_nudge_lowers_cost(const GradcheckOptions& options) {
  return timed("nudged_cost_not_above_free", [&](CheckResult& r) {
    const int n = or_default(options.prop1_instances, 100);
    int violations = 0;
    double worst = -INFINITY;
    for (int i = 0; i < n; ++i) {
      const OracleInstance inst = instance(options.seed, i);
      const Prop1Result p = prop1_check(inst.params, inst.x, inst.target, 1e-3);
      const double excess = p.cost_nudged - p.cost_free;
      worst = std::max(worst, excess);
      if (excess > 1e-9) ++violations;
    }
    r.passed = violations == 0;
    r.detail = format("%d instances at beta 1e-3, %d violations, max C(s^b) - C(s^0) = %.3g", n, violations, worst);
  });
}

CheckResult check_cross_derivative_symmetry(const GradcheckOptions& options) {
  return timed("cross_derivative_symmetry", [&](CheckResult& r) {
    const int n = or_default(options.lemma1_instances, 20);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      const OracleInstance inst = instance(options.seed, i);
      worst = std::max(worst, lemma1_check(inst.params, inst.x, inst.target, 1e-4, 1e-4).max_asymmetry);
    }
    r.passed = worst < 1e-4;
    r.detail = format("%d instances, max asymmetry %.3g (< 1e-4)", n, worst);
  });
}

CheckResult check_stdp_telescoping(const GradcheckOptions& options) {
  return timed("stdp_telescoping", [&](CheckResult& r) {
    double worst = 0.0;
    const int n = 10;
    for (int i = 0; i < n; ++i) {
      const OracleInstance inst = instance(options.seed, i);
      std::vector<NetState<double>> trajectory;
      PhaseConfig phase;
      phase.beta = 1.0;
      phase.max_iters = 50;
      relax_observed<double>(inst.free_state, inst.params, inst.x, inst.target, phase,
                             [&](const NetState<double>& s) { trajectory.push_back(s); });
      const StdpIntegral integral = stdp_integral_check(trajectory, inst.x);
      for (std::size_t k = 0; k < integral.telescoping.size(); ++k) {
        worst = std::max(worst, (integral.telescoping[k] - integral.endpoint[k]).cwiseAbs().maxCoeff());
      }
    }
    r.passed = worst <= 1e-12;
    r.detail = format("%d clamped-phase trajectories, max |telescoping - endpoint| = %.3g", n, worst);
  });
}

CheckResult check_stdp_left_point(const GradcheckOptions& options) {
  return timed("stdp_left_point_convergence", [&](CheckResult& r) {
    // Smooth path between two interior states, sampled at T + 1 points.
    const Topology topology({3, 4, 2});
    Rng rng(derive_seed(options.seed, 0x57d9));
    NetState<double> a = NetState<double>::zeros(topology);
    NetState<double> b = NetState<double>::zeros(topology);
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      for (Eigen::Index j = 0; j < a.layers[k].size(); ++j) {
        a.layers[k][j] = rng.uniform(0.1, 0.9);
        b.layers[k][j] = rng.uniform(0.1, 0.9);
      }
    }
    VectorXd x(3);
    for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform();

    std::vector<double> errors;
    for (int steps : {4, 16, 64}) {
      std::vector<NetState<double>> trajectory;
      for (int t = 0; t <= steps; ++t) {
        const double w = 0.5 * (1.0 - std::cos(std::numbers::pi * t / steps));
        NetState<double> s = a;
        for (std::size_t k = 0; k < s.layers.size(); ++k) s.layers[k] = (1.0 - w) * a.layers[k] + w * b.layers[k];
        trajectory.push_back(std::move(s));
      }
      const StdpIntegral integral = stdp_integral_check(trajectory, x);
      double err = 0.0;
      for (std::size_t k = 0; k < integral.left_point.size(); ++k) {
        err = std::max(err, (integral.left_point[k] - integral.endpoint[k]).cwiseAbs().maxCoeff());
      }
      errors.push_back(err);
    }
    r.passed = errors[1] < errors[0] && errors[2] < errors[1];
    r.detail = format("left-point error T=4: %.3g, T=16: %.3g, T=64: %.3g", errors[0], errors[1], errors[2]);
  });
}

std::vector<CheckResult> run_gradcheck_suite(const GradcheckOptions& options) {
  return {check_gradient_equivalence(options), check_oracle_triangle(options), check_nudge_lowers_cost(options),
          check_cross_derivative_symmetry(options), check_stdp_telescoping(options), check_stdp_left_point(options)};
}

CheckResult check_stochastic_gradient(const StochasticCheckOptions& options) {
  return timed("stochastic_gradient_unbiased", [&](CheckResult& r) {
    const Toy toy = stochastic_toy(options.seed);
    const Theorem2Result t =
        theorem2_check(toy.params, toy.x, toy.target, 1e-3, QuadratureGrid::uniform(2, -4.0, 5.0, options.grid_points));
    const double err = t.max_relative_error();
    r.passed = err < 1e-2;
    r.detail = format("%d^2 grid, beta 1e-3, max elementwise relative error %.3g (< 1e-2)%s", options.grid_points,
                      err, t.boundary_warning ? ", boundary mass warning" : "");
  });
}

CheckResult check_cost_variance(const StochasticCheckOptions& options) {
  return timed("cost_derivative_is_neg_variance", [&](CheckResult& r) {
    const Toy toy = stochastic_toy(options.seed);
    const Prop2Result p =
        prop2_check(toy.params, toy.x, toy.target, QuadratureGrid::uniform(2, -4.0, 5.0, options.grid_points));
    const double rel = std::abs(p.derivative - p.neg_variance) / std::max(std::abs(p.neg_variance), 1e-300);
    r.passed = rel < 1e-3 && p.derivative <= 0.0 && p.neg_variance <= 0.0;
    r.detail = format("dE[C]/dbeta %.6g, -Var[C] %.6g, relative gap %.3g (< 1e-3)", p.derivative, p.neg_variance, rel);
  });
}

CheckResult check_langevin_vs_quadrature(const StochasticCheckOptions& options) {
  return timed("langevin_vs_quadrature", [&](CheckResult& r) {
    const Toy toy = stochastic_toy(options.seed);
    LangevinConfig cfg;
    cfg.n_steps = options.langevin_steps;
    cfg.rng_seed = derive_seed(options.seed, 0x1a9);
    const long burn_in = cfg.n_steps / 20;
    constexpr int kBatches = 40;
    const long per_batch = (cfg.n_steps - burn_in) / kBatches;
    std::vector<double> batch_sum(kBatches, 0.0);
    long step = 0;
    NetState<double> start = NetState<double>::zeros(toy.params.topology());
    langevin_run(start, toy.params, toy.x, 0.0, toy.target, cfg, [&](const NetState<double>& s) {
      const long t = step++ - burn_in;
      if (t < 0 || t / per_batch >= kBatches) return;
      batch_sum[static_cast<std::size_t>(t / per_batch)] += s.layers.back()[0];
    });
    double mean = 0.0;
    for (double& b : batch_sum) {
      b /= static_cast<double>(per_batch);
      mean += b / kBatches;
    }
    double var = 0.0;
    for (double b : batch_sum) var += (b - mean) * (b - mean) / (kBatches - 1);
    const double se = std::sqrt(var / kBatches);

    const QuadratureResult q = boltzmann_expectation(
        [](const NetState<double>& s) { return s.layers.back()[0]; }, toy.params, toy.x, 0.0, toy.target,
        QuadratureGrid::uniform(2, -4.0, 5.0, options.grid_points));
    const double diff = std::abs(mean - q.values[0]);
    r.passed = diff <= 3.0 * se;
    r.detail = format("output mean: Langevin %.5f +- %.5f (batch means), quadrature %.5f, |diff| = %.2f SE", mean,
                      se, q.values[0], diff / se);
  });
}

std::vector<CheckResult> run_stochastic_suite(const StochasticCheckOptions& options) {
  return {check_stochastic_gradient(options), check_cost_variance(options), check_langevin_vs_quadrature(options)};
}

void print_check_table(std::ostream& out, const std::vector<CheckResult>& results) {
  for (const CheckResult& r : results) {
    out << format("%-4s  %-32s %8.2fs  ", r.passed ? "PASS" : "FAIL", r.name.c_str(), r.seconds) << r.detail << '\n';
  }
}

bool all_passed(const std::vector<CheckResult>& results) {
  return std::all_of(results.begin(), results.end(), [](const CheckResult& r) { return r.passed; });
}

}  // namespace eqprop
