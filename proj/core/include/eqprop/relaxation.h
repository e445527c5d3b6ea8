#pragma once

#include <functional>
#include <vector>

#include "eqprop/params.h"
#include "eqprop/types.h"

namespace eqprop {

// beta: influence parameter (0 = free phase, may be negative).
// epsilon: step size of the clipped update, in (0, 1].
// max_iters: iteration budget.
// residual_tol: stop once the projected residual is <= tol; 0 runs the full
// budget (training mode).
struct PhaseConfig {
  double beta = 0.0;
  double epsilon = 0.5;
  int max_iters = 20;
  double residual_tol = 0.0;

  // Throws ConfigError.
  void validate() const;

  // Settings used by the gradient oracles: eps 0.5, tol 1e-12, 10^6 iterations.
  static PhaseConfig oracle(double beta = 0.0);
};

template <typename T>
struct FixedPointResult {
  NetState<T> state;
  // Euclidean norm of the projected force at `state`.
  double residual = 0.0;
  int iterations = 0;
  // Internal energy E and cost C at `state`.
  double energy = 0.0;
  double cost = 0.0;
  // True when residual_tol > 0 and the residual reached it.
  bool converged = false;
};

// One synchronous clipped gradient step on F:
//   s_i <- max(0, min(s_i - epsilon dF/ds_i, 1)).
// Throws NumericError naming the layer if the force is not finite.
template <typename T>
NetState<T> step(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x, T beta,
                 const Vector<T>& target, T epsilon);

// Iterates `step` from `state` until the budget is spent or the projected
// residual drops to phase.residual_tol. Deterministic.
template <typename T>
FixedPointResult<T> relax(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                          const Vector<T>& target, const PhaseConfig& phase);

// Norm of the force with outward components removed on the box boundary:
// r_i = max(f_i, 0) where s_i = 0, r_i = min(f_i, 0) where s_i = 1.
template <typename T>
double projected_residual(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x, T beta,
                          const Vector<T>& target);

// Same as relax but calls `observer` with the initial state and after every
// step. Used to record second-phase trajectories.
template <typename T>
FixedPointResult<T> relax_observed(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                                   const Vector<T>& target, const PhaseConfig& phase,
                                   const std::function<void(const NetState<T>&)>& observer);

// Fully clamped relaxation (beta -> infinity): the output layer is pinned to
// `target` and only the hidden layers move. phase.beta is ignored.
template <typename T>
FixedPointResult<T> relax_clamped_output(const NetState<T>& state, const LayeredParams<T>& params,
                                         const Vector<T>& x, const Vector<T>& target, const PhaseConfig& phase);

namespace detail {

// relax without input validation, reusing a precomputed input drive
// (see detail::input_drive). Callers validate once per example.
template <typename T>
FixedPointResult<T> relax_prevalidated(const NetState<T>& state, const LayeredParams<T>& params,
                                       const Vector<T>& x, const Vector<T>& drive, const Vector<T>& target,
                                       const PhaseConfig& phase);

}  // namespace detail

}  // namespace eqprop
