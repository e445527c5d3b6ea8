#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "eqprop/params.h"
#include "eqprop/relaxation.h"
#include "eqprop/topology.h"
#include "eqprop/types.h"

namespace eqprop {

// Independent routes to dJ/dtheta, where J(theta) = C(s^0_theta) is the cost
// at the free fixed point. Everything here is float64 and relaxes to tight
// fixed points (PhaseConfig::oracle unless overridden); a relaxation that
// misses its tolerance throws ConvergenceError carrying the final residual.

enum class GradMethod { kEqProp, kFdObjective, kRbp, kChl };
const char* to_string(GradMethod method);

struct GradEstimate {
  LayeredParams<double> grad;
  GradMethod method = GradMethod::kEqProp;
  std::optional<double> beta_used;

  VectorXd flat() const { return grad.flatten(); }
};

// |a - reference| / |reference| over all parameters (l2).
double relative_error(const GradEstimate& a, const GradEstimate& reference);

enum class EstimatorMode { kOneSided, kCentral };

// Relaxes to a tight fixed point, throwing ConvergenceError otherwise.
FixedPointResult<double> relax_tight(const NetState<double>& state, const LayeredParams<double>& params,
                                     const VectorXd& x, const VectorXd& target, const PhaseConfig& phase);

// one_sided: (1/beta)   (dF/dtheta(s^beta)  - dF/dtheta(s^0))
// central:   (1/2 beta) (dF/dtheta(s^+beta) - dF/dtheta(s^-beta))
// The free phase starts from zeros; clamped phases start from s^0.
GradEstimate eqprop_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                         double beta, EstimatorMode mode, const PhaseConfig& phase = PhaseConfig::oracle());

// Central differences of J with step `delta`; each perturbed J relaxes from
// the unperturbed free fixed point.
GradEstimate fd_objective_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                               double delta = 1e-6, const PhaseConfig& phase = PhaseConfig::oracle());

// Dense Hessian d2E/ds2 at s (hard sigmoid, so rho'' = 0 away from the kinks).
MatrixXd energy_hessian(const LayeredParams<double>& params, const NetState<double>& s);

// Costate lambda = -H^{-1} dC/ds at the free fixed point; equals ds^beta/dbeta
// at beta = 0. Throws PreconditionError if the fixed point touches the box
// boundary or H is not positive definite.
NetState<double> costate(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                         const PhaseConfig& phase = PhaseConfig::oracle());

// Recurrent-backprop gradient: dC/dtheta + lambda^T d2E/(ds dtheta) at s^0.
GradEstimate rbp_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                      const PhaseConfig& phase = PhaseConfig::oracle());

struct ChlResult {
  // dF/dtheta(u^inf) - dF/dtheta(u^0); the CHL weight change is its negative.
  GradEstimate update;
  // E(u^inf) - E(u^0). Can be negative when the two phases settle in
  // different energy basins.
  double chl_objective = 0.0;
  FixedPointResult<double> free;
  FixedPointResult<double> clamped;
};

// Free phase, then a fully clamped phase (outputs pinned to target, hidden
// layers relax from the free fixed point).
ChlResult chl_update(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                     const PhaseConfig& phase = PhaseConfig::oracle());

struct Prop1Result {
  double cost_free = 0.0;
  double cost_nudged = 0.0;
};

// C at s^0 and at s^beta (warm started from s^0). For small beta > 0 the
// nudged cost should not exceed the free one.
Prop1Result prop1_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                        double beta, const PhaseConfig& phase = PhaseConfig::oracle());

// A family F(theta, beta, s) with a way to reach its minimiser s^beta_theta.
class FixedPointFamily {
 public:
  virtual ~FixedPointFamily() = default;
  virtual VectorXd theta() const = 0;
  virtual VectorXd fixed_point(const VectorXd& theta, double beta) const = 0;
  virtual double dF_dbeta(const VectorXd& theta, double beta, const VectorXd& s) const = 0;
  virtual VectorXd dF_dtheta(const VectorXd& theta, double beta, const VectorXd& s) const = 0;
};

struct CrossDerivatives {
  // d/dtheta [dF/dbeta(theta, beta, s^beta_theta)] at beta = 0.
  VectorXd theta_of_beta;
  // d/dbeta [dF/dtheta(theta, beta, s^beta_theta)] at beta = 0.
  VectorXd beta_of_theta;
  double max_asymmetry = 0.0;
};

// Both sides by central finite differences.
CrossDerivatives cross_derivatives(const FixedPointFamily& family, double theta_step, double beta_step);

// The layered network as a FixedPointFamily over the flat parameter vector.
// Fixed points are tight relaxations warm started from the free fixed point
// of the unperturbed parameters.
class NetworkFamily final : public FixedPointFamily {
 public:
  NetworkFamily(LayeredParams<double> params, VectorXd x, VectorXd target,
                const PhaseConfig& phase = PhaseConfig::oracle());

  VectorXd theta() const override { return params_.flatten(); }
  VectorXd fixed_point(const VectorXd& theta, double beta) const override;
  double dF_dbeta(const VectorXd& theta, double beta, const VectorXd& s) const override;
  VectorXd dF_dtheta(const VectorXd& theta, double beta, const VectorXd& s) const override;

 private:
  LayeredParams<double> with_theta(const VectorXd& theta) const;

  LayeredParams<double> params_;
  Topology topology_;
  VectorXd x_;
  VectorXd target_;
  PhaseConfig phase_;
  NetState<double> free_state_;
};

CrossDerivatives lemma1_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                              double theta_step = 1e-4, double beta_step = 1e-4,
                              const PhaseConfig& phase = PhaseConfig::oracle());

// Flat indices (LayeredParams::flatten order) of the bias entries.
std::vector<std::size_t> bias_flat_indices(const Topology& topology);

// Discrete forms of the path integral of d(rho(u_i) rho(u_j)) over a recorded
// trajectory, one matrix per W_k:
//   telescoping: sum_t Delta(rho_i rho_j)
//   left_point:  sum_t rho_i^t Delta rho_j + rho_j^t Delta rho_i
//   endpoint:    rho_i^T rho_j^T - rho_i^0 rho_j^0
struct StdpIntegral {
  std::vector<MatrixXd> telescoping;
  std::vector<MatrixXd> left_point;
  std::vector<MatrixXd> endpoint;
};

// Throws PreconditionError on an empty trajectory.
StdpIntegral stdp_integral_check(const std::vector<NetState<double>>& trajectory, const VectorXd& x);

// Random instances whose free fixed point lies strictly inside the box (every
// unit at least `margin` away from 0 and 1) with a positive definite Hessian.
// Weights are Glorot, redrawn until the smallest eigenvalue of the interior
// Hessian is at least min_hessian_eigenvalue (below 0 every interior
// stationary point is a saddle; near 0 a residual of 1e-12 no longer pins the
// state).
// An interior state s* ~ U[state_lo, state_hi] is drawn and the biases are set
// so that s* is the free fixed point; relaxation from zeros must reach it.
struct InstanceOptions {
  double margin = 0.02;
  double state_lo = 0.1;
  double state_hi = 0.9;
  double min_hessian_eigenvalue = 0.1;
  int max_draws = 200'000;
  PhaseConfig phase = PhaseConfig::oracle();
};

struct OracleInstance {
  LayeredParams<double> params;
  VectorXd x;
  VectorXd target;
  NetState<double> free_state;
  std::uint64_t seed = 0;
  int draws = 0;
};

bool is_interior(const NetState<double>& s, double margin);

// x ~ U[0,1]^d_0, target ~ U[0,1]^d_N. Deterministic per seed; throws
// PreconditionError if no instance is found within max_draws.
OracleInstance sample_interior_instance(const Topology& topology, std::uint64_t seed,
                                        const InstanceOptions& options = {});

}  // namespace eqprop
