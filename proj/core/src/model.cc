#include "eqprop/model.h"

#include <string>

#include "eqprop/activation.h"
#include "eqprop/errors.h"

namespace eqprop {

namespace {

template <typename T>
void check_inputs(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s) {
  params.validate();
  if (x.size() != params.weights.front().rows()) {
    throw DimensionError("input has " + std::to_string(x.size()) + " entries, network expects " +
                         std::to_string(params.weights.front().rows()));
  }
  if (!x.allFinite()) throw NumericError("non-finite input vector");
  s.validate(params.topology());
}

template <typename T>
void check_target(const NetState<T>& s, const Vector<T>& target) {
  if (s.layers.empty()) throw DimensionError("state has no layers");
  if (target.size() != s.output().size()) {
    throw DimensionError("target has " + std::to_string(target.size()) + " entries, output layer has " +
                         std::to_string(s.output().size()));
  }
  if (!target.allFinite()) throw NumericError("non-finite target vector");
}

}  // namespace

namespace detail {

template <typename T>
Vector<T> input_drive(const LayeredParams<T>& params, const Vector<T>& x) {
  return params.weights.front().transpose() * rho(x);
}

template <typename T>
void force_into(const LayeredParams<T>& params, const Vector<T>& drive, const NetState<T>& s, T beta,
                const Vector<T>& target, NetState<T>& out) {
  const std::size_t n = s.layers.size();
  out.layers.resize(n);
  for (std::size_t l = 0; l < n; ++l) {
    const Vector<T>& sl = s.layers[l];
    Vector<T> pre = params.biases[l];
    if (l == 0) {
      pre += drive;
    } else {
      pre.noalias() += params.weights[l].transpose() * rho(s.layers[l - 1]);
    }
    if (l + 1 < n) pre.noalias() += params.weights[l + 1] * rho(s.layers[l + 1]);
    out.layers[l] = rho_prime(sl).cwiseProduct(pre) - sl;
  }
  if (beta != T(0)) out.layers.back() += beta * (target - s.layers.back());
}

template <typename T>
T energy_unchecked(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s) {
  T e = 0;
  Vector<T> below = rho(x);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const Vector<T>& sl = s.layers[l];
    const Vector<T> above = rho(sl);
    e += T(0.5) * sl.squaredNorm();
    e -= below.dot(params.weights[l] * above);
    e -= params.biases[l].dot(above);
    below = above;
  }
  return e;
}

template <typename T>
T cost_unchecked(const NetState<T>& s, const Vector<T>& target) {
  return T(0.5) * (s.output() - target).squaredNorm();
}

}  // namespace detail

template <typename T>
T energy(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s) {
  check_inputs(params, x, s);
  return detail::energy_unchecked(params, x, s);
}

template <typename T>
T cost(const NetState<T>& s, const Vector<T>& target) {
  check_target(s, target);
  if (!s.output().allFinite()) throw NumericError("non-finite output state");
  return detail::cost_unchecked(s, target);
}

template <typename T>
T total_energy(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
               const Vector<T>& target) {
  check_inputs(params, x, s);
  check_target(s, target);
  return detail::energy_unchecked(params, x, s) + beta * detail::cost_unchecked(s, target);
}

template <typename T>
NetState<T> force(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
                  const Vector<T>& target) {
  check_inputs(params, x, s);
  check_target(s, target);
  NetState<T> out;
  detail::force_into(params, detail::input_drive(params, x), s, beta, target, out);
  return out;
}

template <typename T>
EnergyGradient<T> grad_theta(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
                             const Vector<T>& target) {
  check_inputs(params, x, s);
  check_target(s, target);
  (void)beta;
  EnergyGradient<T> g;
  Vector<T> below = rho(x);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const Vector<T> above = rho(s.layers[l]);
    g.theta.weights.push_back(-below * above.transpose());
    g.theta.biases.push_back(-above);
    below = above;
  }
  g.beta = detail::cost_unchecked(s, target);
  return g;
}

#define EQPROP_INSTANTIATE_MODEL(T)                                                                              \
  template T energy(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&);                              \
  template T cost(const NetState<T>&, const Vector<T>&);                                                         \
  template T total_energy(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&, T, const Vector<T>&);   \
  template NetState<T> force(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&, T, const Vector<T>&); \
  template EnergyGradient<T> grad_theta(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&, T,        \
                                        const Vector<T>&);                                                       \
  template Vector<T> detail::input_drive(const LayeredParams<T>&, const Vector<T>&);                             \
  template void detail::force_into(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&, T,             \
                                   const Vector<T>&, NetState<T>&);                                              \
  template T detail::energy_unchecked(const LayeredParams<T>&, const Vector<T>&, const NetState<T>&);            \
  template T detail::cost_unchecked(const NetState<T>&, const Vector<T>&);

EQPROP_INSTANTIATE_MODEL(float)
EQPROP_INSTANTIATE_MODEL(double)

#undef EQPROP_INSTANTIATE_MODEL

}  // namespace eqprop
