#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <vector>

#include "eqprop/params.h"
#include "eqprop/rng.h"
#include "eqprop/types.h"

namespace eqprop {

// Langevin dynamics ds = -dF/ds dt + sigma dB(t) on the unconstrained state.
// sigma = sqrt(2) gives temperature 1, whose stationary law is p(s) ~ exp(-F).
struct LangevinConfig {
  double dt = 1e-3;
  double sigma = std::sqrt(2.0);
  long n_steps = 0;
  std::uint64_t rng_seed = 0;

  void validate() const;
};

// One Euler-Maruyama step, s <- s - dF/ds dt + sigma sqrt(dt) xi, with xi
// drawn from `rng`. The state is not clipped. Throws NumericError if the
// state stops being finite.
NetState<double> langevin_step(const NetState<double>& state, const LayeredParams<double>& params,
                               const VectorXd& x, double beta, const VectorXd& target, const LangevinConfig& cfg,
                               Rng& rng);

// cfg.n_steps steps from `state` with a generator seeded from cfg.rng_seed;
// `observer` sees the state after every step. Returns the final state.
NetState<double> langevin_run(const NetState<double>& state, const LayeredParams<double>& params,
                              const VectorXd& x, double beta, const VectorXd& target, const LangevinConfig& cfg,
                              const std::function<void(const NetState<double>&)>& observer = {});

// Tensor-product composite Simpson grid over the state, at most 3 dimensions.
struct QuadratureAxis {
  double lo = -4.0;
  double hi = 5.0;
  int points = 401;
};

struct QuadratureGrid {
  std::vector<QuadratureAxis> axes;

  static QuadratureGrid uniform(int dims, double lo = -4.0, double hi = 5.0, int points = 401);
  // Throws ConfigError: hi > lo, points odd and >= 3, 1 to 3 axes.
  void validate() const;
};

// Boundary-mass guard: largest Boltzmann weight on the grid's outer faces
// relative to the peak weight. A warning is raised above 1e-12.
inline constexpr double kBoundaryWarningRatio = 1e-12;

struct QuadratureResult {
  VectorXd values;
  bool boundary_warning = false;
  double boundary_ratio = 0.0;
};

using StateFunction = std::function<VectorXd(const NetState<double>&)>;

// E^beta[fn] = int fn(s) exp(-F(s)) ds / int exp(-F(s)) ds by Simpson's rule,
// with weights stabilised by the maximum of -F. Throws PreconditionError if
// the state dimension differs from the grid's or exceeds 3.
QuadratureResult boltzmann_expectation(const StateFunction& fn, const LayeredParams<double>& params,
                                       const VectorXd& x, double beta, const VectorXd& target,
                                       const QuadratureGrid& grid);

// Scalar convenience overload.
QuadratureResult boltzmann_expectation(const std::function<double(const NetState<double>&)>& fn,
                                       const LayeredParams<double>& params, const VectorXd& x, double beta,
                                       const VectorXd& target, const QuadratureGrid& grid);

struct Theorem2Result {
  // d/dtheta E^0[C] by central differences with step theta_delta.
  VectorXd lhs;
  // (1/beta) (E^beta[dF/dtheta] - E^0[dF/dtheta]).
  VectorXd rhs;
  bool boundary_warning = false;

  double max_relative_error() const;
};

Theorem2Result theorem2_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                              double beta, const QuadratureGrid& grid, double theta_delta = 1e-5);

struct Prop2Result {
  // d/dbeta E^beta[C] at 0, central difference with step beta_step.
  double derivative = 0.0;
  // -Var^0[C].
  double neg_variance = 0.0;
  bool boundary_warning = false;
};

Prop2Result prop2_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                        const QuadratureGrid& grid, double beta_step = 1e-4);

}  // namespace eqprop
