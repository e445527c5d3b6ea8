#pragma once

#include "eqprop/types.h"

namespace eqprop {

// Hard sigmoid rho(v) = max(0, min(v, 1)), the firing-rate nonlinearity.
// rho'(v) is 1 on the closed interval [0, 1] and 0 outside it. Taking the
// one-sided derivative from inside the box at the kinks keeps a unit resting
// at 0 (or 1) responsive to an inward drive; with rho'(0) = 0 the all-zero
// state would be a fixed point of every network.
template <typename T>
inline T hard_sigmoid(T v) {
  return v < T(0) ? T(0) : (v > T(1) ? T(1) : v);
}

template <typename T>
inline T hard_sigmoid_prime(T v) {
  return (v >= T(0) && v <= T(1)) ? T(1) : T(0);
}

template <typename Derived>
auto rho(const Eigen::MatrixBase<Derived>& v) {
  using T = typename Derived::Scalar;
  return v.cwiseMax(T(0)).cwiseMin(T(1));
}

template <typename Derived>
auto rho_prime(const Eigen::MatrixBase<Derived>& v) {
  using T = typename Derived::Scalar;
  return ((v.array() >= T(0)) && (v.array() <= T(1))).template cast<T>().matrix();
}

}  // namespace eqprop
