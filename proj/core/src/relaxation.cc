#include "eqprop/relaxation.h"

#include <cmath>
#include <string>
#include <type_traits>

#include "eqprop/errors.h"
#include "eqprop/model.h"

namespace eqprop {

void PhaseConfig::validate() const {
  if (!(epsilon > 0.0) || epsilon > 1.0) {
    throw ConfigError("epsilon must lie in (0, 1], got " + std::to_string(epsilon));
  }
  if (max_iters < 1) throw ConfigError("max_iters must be >= 1, got " + std::to_string(max_iters));
  if (!(residual_tol >= 0.0)) throw ConfigError("residual_tol must be >= 0");
  if (!std::isfinite(beta)) throw ConfigError("beta must be finite");
}

PhaseConfig PhaseConfig::oracle(double beta) {
  return PhaseConfig{.beta = beta, .epsilon = 0.5, .max_iters = 1'000'000, .residual_tol = 1e-12};
}

namespace {

template <typename T>
void check_relax_inputs(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                        const Vector<T>& target) {
  params.validate();
  const Topology topology = params.topology();
  if (x.size() != topology.input_size()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " entries, network expects " +
                         std::to_string(topology.input_size()));
  }
  if (!x.allFinite()) throw NumericError("non-finite input vector");
  state.validate(topology);
  if (target.size() != topology.output_size()) {
    throw DimensionError("target has " + std::to_string(target.size()) + " entries, output layer has " +
                         std::to_string(topology.output_size()));
  }
  if (!target.allFinite()) throw NumericError("non-finite target vector");
}

template <typename T>
void check_force(const NetState<T>& f) {
  for (std::size_t l = 0; l < f.layers.size(); ++l) {
    if (!f.layers[l].allFinite()) {
      throw NumericError("non-finite force in layer " + std::to_string(l + 1));
    }
  }
}

// Projected residual from a precomputed force. `frozen_output` drops the
// output layer (fully clamped phase).
template <typename T>
double residual_from_force(const NetState<T>& s, const NetState<T>& f, bool frozen_output = false) {
  double sum = 0.0;
  const std::size_t n = s.layers.size() - (frozen_output ? 1 : 0);
  for (std::size_t l = 0; l < n; ++l) {
    const auto& sl = s.layers[l];
    const auto& fl = f.layers[l];
    for (Eigen::Index i = 0; i < sl.size(); ++i) {
      double r = static_cast<double>(fl[i]);
      if (sl[i] <= T(0)) r = std::max(r, 0.0);
      else if (sl[i] >= T(1)) r = std::min(r, 0.0);
      sum += r * r;
    }
  }
  return std::sqrt(sum);
}

template <typename T>
void apply_step(NetState<T>& s, const NetState<T>& f, T epsilon, bool frozen_output = false) {
  const std::size_t n = s.layers.size() - (frozen_output ? 1 : 0);
  for (std::size_t l = 0; l < n; ++l) {
    s.layers[l] = (s.layers[l] + epsilon * f.layers[l]).cwiseMax(T(0)).cwiseMin(T(1));
  }
}

template <typename T>
FixedPointResult<T> relax_core(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                               const Vector<T>& drive, const Vector<T>& target, const PhaseConfig& phase,
                               bool frozen_output,
                               const std::type_identity_t<std::function<void(const NetState<T>&)>>* observer) {
  const T beta = frozen_output ? T(0) : static_cast<T>(phase.beta);
  const T epsilon = static_cast<T>(phase.epsilon);

  FixedPointResult<T> result;
  result.state = state;
  if (frozen_output) result.state.output() = target;
  NetState<T>& s = result.state;
  NetState<T> f;
  if (observer) (*observer)(s);

  bool have_force = false;
  for (int it = 0; it < phase.max_iters; ++it) {
    detail::force_into(params, drive, s, beta, target, f);
    check_force(f);
    if (phase.residual_tol > 0.0 && residual_from_force(s, f, frozen_output) <= phase.residual_tol) {
      have_force = true;
      result.converged = true;
      break;
    }
    apply_step(s, f, epsilon, frozen_output);
    ++result.iterations;
    if (observer) (*observer)(s);
  }
  if (!have_force) {
    detail::force_into(params, drive, s, beta, target, f);
    check_force(f);
  }
  result.residual = residual_from_force(s, f, frozen_output);
  if (phase.residual_tol > 0.0 && result.residual <= phase.residual_tol) result.converged = true;
  result.energy = static_cast<double>(detail::energy_unchecked(params, x, s));
  result.cost = static_cast<double>(detail::cost_unchecked(s, target));
  return result;
}

template <typename T>
FixedPointResult<T> relax_impl(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                               const Vector<T>& target, const PhaseConfig& phase, bool frozen_output,
                               const std::type_identity_t<std::function<void(const NetState<T>&)>>* observer) {
  phase.validate();
  check_relax_inputs(state, params, x, target);
  return relax_core(state, params, x, detail::input_drive(params, x), target, phase, frozen_output, observer);
}

}  // namespace

namespace detail {

template <typename T>
FixedPointResult<T> relax_prevalidated(const NetState<T>& state, const LayeredParams<T>& params,
                                       const Vector<T>& x, const Vector<T>& drive, const Vector<T>& target,
                                       const PhaseConfig& phase) {
  return relax_core(state, params, x, drive, target, phase, false, nullptr);
}

}  // namespace detail

template <typename T>
NetState<T> step(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x, T beta,
                 const Vector<T>& target, T epsilon) {
  if (!(epsilon > T(0)) || epsilon > T(1)) {
    throw ConfigError("epsilon must lie in (0, 1], got " + std::to_string(static_cast<double>(epsilon)));
  }
  check_relax_inputs(state, params, x, target);
  NetState<T> f;
  detail::force_into(params, detail::input_drive(params, x), state, beta, target, f);
  check_force(f);
  NetState<T> next = state;
  apply_step(next, f, epsilon);
  return next;
}

template <typename T>
FixedPointResult<T> relax(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                          const Vector<T>& target, const PhaseConfig& phase) {
  return relax_impl(state, params, x, target, phase, false, nullptr);
}

template <typename T>
double projected_residual(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x, T beta,
                          const Vector<T>& target) {
  check_relax_inputs(state, params, x, target);
  NetState<T> f;
  detail::force_into(params, detail::input_drive(params, x), state, beta, target, f);
  check_force(f);
  return residual_from_force(state, f);
}

template <typename T>
FixedPointResult<T> relax_observed(const NetState<T>& state, const LayeredParams<T>& params, const Vector<T>& x,
                                   const Vector<T>& target, const PhaseConfig& phase,
                                   const std::function<void(const NetState<T>&)>& observer) {
  return relax_impl(state, params, x, target, phase, false, &observer);
}

template <typename T>
FixedPointResult<T> relax_clamped_output(const NetState<T>& state, const LayeredParams<T>& params,
                                         const Vector<T>& x, const Vector<T>& target, const PhaseConfig& phase) {
  return relax_impl(state, params, x, target, phase, true, nullptr);
}

#define EQPROP_INSTANTIATE_RELAX(T)                                                                           \
  template NetState<T> step(const NetState<T>&, const LayeredParams<T>&, const Vector<T>&, T, const Vector<T>&, \
                            T);                                                                               \
  template FixedPointResult<T> relax(const NetState<T>&, const LayeredParams<T>&, const Vector<T>&,            \
                                     const Vector<T>&, const PhaseConfig&);                                   \
  template double projected_residual(const NetState<T>&, const LayeredParams<T>&, const Vector<T>&, T,        \
                                     const Vector<T>&);                                                       \
  template FixedPointResult<T> relax_observed(const NetState<T>&, const LayeredParams<T>&, const Vector<T>&,   \
                                              const Vector<T>&, const PhaseConfig&,                           \
                                              const std::function<void(const NetState<T>&)>&);                \
  template FixedPointResult<T> relax_clamped_output(const NetState<T>&, const LayeredParams<T>&,              \
                                                    const Vector<T>&, const Vector<T>&, const PhaseConfig&); \
  template FixedPointResult<T> detail::relax_prevalidated(const NetState<T>&, const LayeredParams<T>&,          \
                                                          const Vector<T>&, const Vector<T>&, const Vector<T>&,  \
                                                          const PhaseConfig&);

EQPROP_INSTANTIATE_RELAX(float)
EQPROP_INSTANTIATE_RELAX(double)

#undef EQPROP_INSTANTIATE_RELAX

}  // namespace eqprop
