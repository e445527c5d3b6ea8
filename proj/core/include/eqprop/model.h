#pragma once

#include "eqprop/params.h"
#include "eqprop/types.h"

namespace eqprop {

// Closed-form evaluations of the layered Hopfield-style energy
//
//   E(x, s) = 1/2 sum_i s_i^2 - sum_k rho(u_{k-1})^T W_k rho(u_k) - sum_k b_k^T rho(s_k)
//
// with u_0 = x and u_k = s_k, the quadratic cost C = 1/2 |y - target|^2 and
// the total energy F = E + beta * C. Each symmetric pair is counted once.
// Terms that depend on the clamped input alone (1/2 |x|^2, input biases) are
// left out; they shift E by a constant and do not affect dynamics or
// parameter gradients.
//
// All functions validate shapes (DimensionError) and finiteness of x, s and
// target (NumericError).

template <typename T>
T energy(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s);

template <typename T>
T cost(const NetState<T>& s, const Vector<T>& target);

template <typename T>
T total_energy(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
               const Vector<T>& target);

// -dF/ds, one vector per state layer:
//   rho'(s_i) (sum_j W_ij rho(u_j) + b_i) - s_i   (+ beta (target_i - y_i) on outputs)
template <typename T>
NetState<T> force(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
                  const Vector<T>& target);

// dF/dtheta and dF/dbeta at fixed s.
template <typename T>
struct EnergyGradient {
  // dF/dW_k = -rho(u_{k-1}) rho(u_k)^T, dF/db_k = -rho(s_k).
  LayeredParams<T> theta;
  // dF/dbeta = C.
  T beta = 0;
};

template <typename T>
EnergyGradient<T> grad_theta(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s, T beta,
                             const Vector<T>& target);

namespace detail {

// Unchecked kernels shared by the relaxation and training loops.

// W_1^T rho(x): the bottom-up drive into layer 1, constant while x is clamped.
template <typename T>
Vector<T> input_drive(const LayeredParams<T>& params, const Vector<T>& x);

// Writes -dF/ds into `out` (resized as needed) given the precomputed input drive.
template <typename T>
void force_into(const LayeredParams<T>& params, const Vector<T>& drive, const NetState<T>& s, T beta,
                const Vector<T>& target, NetState<T>& out);

template <typename T>
T energy_unchecked(const LayeredParams<T>& params, const Vector<T>& x, const NetState<T>& s);

template <typename T>
T cost_unchecked(const NetState<T>& s, const Vector<T>& target);

}  // namespace detail

}  // namespace eqprop
