#include "eqprop/oracles.h"

#include <cmath>
#include <string>

#include "eqprop/activation.h"
#include "eqprop/errors.h"
#include "eqprop/model.h"
#include "eqprop/rng.h"
#include "eqprop/train.h"

namespace eqprop {

const char* to_string(GradMethod method) {
  switch (method) {
    case GradMethod::kEqProp:
      return "eqprop";
    case GradMethod::kFdObjective:
      return "fd_objective";
    case GradMethod::kRbp:
      return "rbp";
    case GradMethod::kChl:
      return "chl";
  }
  return "unknown";
}

double relative_error(const GradEstimate& a, const GradEstimate& reference) {
  const VectorXd ref = reference.flat();
  const VectorXd diff = a.flat() - ref;
  const double denom = ref.norm();
  if (denom == 0.0) return diff.norm() == 0.0 ? 0.0 : INFINITY;
  return diff.norm() / denom;
}

FixedPointResult<double> relax_tight(const NetState<double>& state, const LayeredParams<double>& params,
                                     const VectorXd& x, const VectorXd& target, const PhaseConfig& phase) {
  FixedPointResult<double> r = relax(state, params, x, target, phase);
  if (phase.residual_tol > 0.0 && !r.converged) {
    throw ConvergenceError("relaxation at beta = " + std::to_string(phase.beta) + " stopped after " +
                               std::to_string(r.iterations) + " iterations with residual " +
                               std::to_string(r.residual) + " > " + std::to_string(phase.residual_tol),
                           r.residual);
  }
  return r;
}

namespace {

PhaseConfig with_beta(PhaseConfig phase, double beta) {
  phase.beta = beta;
  return phase;
}

LayeredParams<double> theta_grad(const LayeredParams<double>& params, const VectorXd& x,
                                 const NetState<double>& s, double beta, const VectorXd& target) {
  return grad_theta(params, x, s, beta, target).theta;
}

FixedPointResult<double> free_fixed_point(const LayeredParams<double>& params, const VectorXd& x,
                                          const VectorXd& target, const PhaseConfig& phase) {
  return relax_tight(NetState<double>::zeros(params.topology()), params, x, target, with_beta(phase, 0.0));
}

}  // namespace

GradEstimate eqprop_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                         double beta, EstimatorMode mode, const PhaseConfig& phase) {
  if (beta == 0.0 || !std::isfinite(beta)) throw ConfigError("eqprop_grad needs a finite nonzero beta");
  const auto free = free_fixed_point(params, x, target, phase);
  GradEstimate est;
  est.method = GradMethod::kEqProp;
  est.beta_used = beta;
  if (mode == EstimatorMode::kOneSided) {
    const auto nudged = relax_tight(free.state, params, x, target, with_beta(phase, beta));
    est.grad = theta_grad(params, x, nudged.state, beta, target);
    est.grad -= theta_grad(params, x, free.state, 0.0, target);
    est.grad *= 1.0 / beta;
  } else {
    const auto plus = relax_tight(free.state, params, x, target, with_beta(phase, beta));
    const auto minus = relax_tight(free.state, params, x, target, with_beta(phase, -beta));
    est.grad = theta_grad(params, x, plus.state, beta, target);
    est.grad -= theta_grad(params, x, minus.state, -beta, target);
    est.grad *= 1.0 / (2.0 * beta);
  }
  return est;
}

GradEstimate fd_objective_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                               double delta, const PhaseConfig& phase) {
  if (!(delta > 0.0)) throw ConfigError("finite-difference step must be positive");
  const PhaseConfig free_phase = with_beta(phase, 0.0);
  const auto free = free_fixed_point(params, x, target, phase);
  GradEstimate est;
  est.method = GradMethod::kFdObjective;
  est.grad = LayeredParams<double>::zeros(params.topology());
  LayeredParams<double> perturbed = params;
  for (std::size_t p = 0; p < params.flat_size(); ++p) {
    const double original = params.entry(p);
    perturbed.entry(p) = original + delta;
    const double j_plus = relax_tight(free.state, perturbed, x, target, free_phase).cost;
    perturbed.entry(p) = original - delta;
    const double j_minus = relax_tight(free.state, perturbed, x, target, free_phase).cost;
    perturbed.entry(p) = original;
    est.grad.entry(p) = (j_plus - j_minus) / (2.0 * delta);
  }
  return est;
}

MatrixXd energy_hessian(const LayeredParams<double>& params, const NetState<double>& s) {
  const Topology topology = params.topology();
  s.validate(topology);
  const int n = topology.state_size();
  MatrixXd h = MatrixXd::Identity(n, n);
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < s.layers.size(); ++l) {
    const Eigen::Index rows = s.layers[l].size();
    const Eigen::Index cols = s.layers[l + 1].size();
    const MatrixXd block = -(rho_prime(s.layers[l]).asDiagonal() * params.weights[l + 1] *
                             rho_prime(s.layers[l + 1]).asDiagonal());
    h.block(offset, offset + rows, rows, cols) = block;
    h.block(offset + rows, offset, cols, rows) = block.transpose();
    offset += rows;
  }
  return h;
}

namespace {

void require_interior(const NetState<double>& s) {
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < s.layers[l].size(); ++i) {
      const double v = s.layers[l][i];
      if (v <= 0.0 || v >= 1.0) {
        throw PreconditionError("free fixed point touches the box boundary (layer " + std::to_string(l + 1) +
                                ", unit " + std::to_string(i) + ", value " + std::to_string(v) + ")");
      }
    }
  }
}

struct CostateSolution {
  FixedPointResult<double> free;
  NetState<double> lambda;
};

CostateSolution solve_costate(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                              const PhaseConfig& phase) {
  CostateSolution out{free_fixed_point(params, x, target, phase), {}};
  const NetState<double>& s = out.free.state;
  require_interior(s);
  const Topology topology = params.topology();
  const MatrixXd h = energy_hessian(params, s);
  const Eigen::LLT<MatrixXd> llt(h);
  if (llt.info() != Eigen::Success) {
    throw PreconditionError("energy Hessian at the free fixed point is not positive definite");
  }
  VectorXd dc_ds = VectorXd::Zero(topology.state_size());
  dc_ds.tail(topology.output_size()) = s.output() - target;
  out.lambda = NetState<double>::unflatten(topology, -llt.solve(dc_ds));
  return out;
}

}  // namespace

NetState<double> costate(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                         const PhaseConfig& phase) {
  return solve_costate(params, x, target, phase).lambda;
}

GradEstimate rbp_grad(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                      const PhaseConfig& phase) {
  const CostateSolution sol = solve_costate(params, x, target, phase);
  const NetState<double>& s = sol.free.state;
  GradEstimate est;
  est.method = GradMethod::kRbp;
  // C has no explicit theta dependence, so only lambda^T d2E/(ds dtheta) remains.
  VectorXd below = rho(x);
  for (std::size_t l = 0; l < s.layers.size(); ++l) {
    const VectorXd above = rho(s.layers[l]);
    const VectorXd lam_above = sol.lambda.layers[l].cwiseProduct(rho_prime(s.layers[l]));
    MatrixXd gw = -below * lam_above.transpose();
    if (l > 0) {
      const VectorXd lam_below = sol.lambda.layers[l - 1].cwiseProduct(rho_prime(s.layers[l - 1]));
      gw -= lam_below * above.transpose();
    }
    est.grad.weights.push_back(std::move(gw));
    est.grad.biases.push_back(-lam_above);
    below = above;
  }
  return est;
}

ChlResult chl_update(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                     const PhaseConfig& phase) {
  ChlResult out;
  out.free = free_fixed_point(params, x, target, phase);
  out.clamped = relax_clamped_output(out.free.state, params, x, target, with_beta(phase, 0.0));
  if (phase.residual_tol > 0.0 && !out.clamped.converged) {
    throw ConvergenceError("clamped CHL phase did not converge (residual " + std::to_string(out.clamped.residual) +
                               ")",
                           out.clamped.residual);
  }
  out.update.method = GradMethod::kChl;
  out.update.grad = theta_grad(params, x, out.clamped.state, 0.0, target);
  out.update.grad -= theta_grad(params, x, out.free.state, 0.0, target);
  out.chl_objective = out.clamped.energy - out.free.energy;
  return out;
}

Prop1Result prop1_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                        double beta, const PhaseConfig& phase) {
  if (!(beta > 0.0)) throw ConfigError("prop1_check needs beta > 0");
  const auto free = free_fixed_point(params, x, target, phase);
  const auto nudged = relax_tight(free.state, params, x, target, with_beta(phase, beta));
  return {free.cost, nudged.cost};
}

CrossDerivatives cross_derivatives(const FixedPointFamily& family, double theta_step, double beta_step) {
  if (!(theta_step > 0.0) || !(beta_step > 0.0)) throw ConfigError("finite-difference steps must be positive");
  const VectorXd theta = family.theta();
  CrossDerivatives out;
  out.theta_of_beta.resize(theta.size());
  VectorXd t = theta;
  for (Eigen::Index p = 0; p < theta.size(); ++p) {
    t[p] = theta[p] + theta_step;
    const double up = family.dF_dbeta(t, 0.0, family.fixed_point(t, 0.0));
    t[p] = theta[p] - theta_step;
    const double down = family.dF_dbeta(t, 0.0, family.fixed_point(t, 0.0));
    t[p] = theta[p];
    out.theta_of_beta[p] = (up - down) / (2.0 * theta_step);
  }
  const VectorXd plus = family.dF_dtheta(theta, beta_step, family.fixed_point(theta, beta_step));
  const VectorXd minus = family.dF_dtheta(theta, -beta_step, family.fixed_point(theta, -beta_step));
  out.beta_of_theta = (plus - minus) / (2.0 * beta_step);
  out.max_asymmetry = (out.theta_of_beta - out.beta_of_theta).cwiseAbs().maxCoeff();
  return out;
}

NetworkFamily::NetworkFamily(LayeredParams<double> params, VectorXd x, VectorXd target, const PhaseConfig& phase)
    : params_(std::move(params)),
      topology_(params_.topology()),
      x_(std::move(x)),
      target_(std::move(target)),
      phase_(phase) {
  free_state_ = free_fixed_point(params_, x_, target_, phase_).state;
}

LayeredParams<double> NetworkFamily::with_theta(const VectorXd& theta) const {
  if (static_cast<std::size_t>(theta.size()) != params_.flat_size()) {
    throw DimensionError("theta has " + std::to_string(theta.size()) + " entries, network has " +
                         std::to_string(params_.flat_size()));
  }
  LayeredParams<double> p = params_;
  for (std::size_t i = 0; i < p.flat_size(); ++i) p.entry(i) = theta[static_cast<Eigen::Index>(i)];
  return p;
}

VectorXd NetworkFamily::fixed_point(const VectorXd& theta, double beta) const {
  return relax_tight(free_state_, with_theta(theta), x_, target_, with_beta(phase_, beta)).state.flatten();
}

double NetworkFamily::dF_dbeta(const VectorXd& theta, double beta, const VectorXd& s) const {
  (void)theta;
  (void)beta;
  return cost(NetState<double>::unflatten(topology_, s), target_);
}

VectorXd NetworkFamily::dF_dtheta(const VectorXd& theta, double beta, const VectorXd& s) const {
  return theta_grad(with_theta(theta), x_, NetState<double>::unflatten(topology_, s), beta, target_).flatten();
}

CrossDerivatives lemma1_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                              double theta_step, double beta_step, const PhaseConfig& phase) {
  return cross_derivatives(NetworkFamily(params, x, target, phase), theta_step, beta_step);
}

std::vector<std::size_t> bias_flat_indices(const Topology& topology) {
  std::vector<std::size_t> out;
  std::size_t pos = 0;
  for (int k = 1; k <= topology.num_layers(); ++k) {
    pos += static_cast<std::size_t>(topology.layer_size(k - 1)) * static_cast<std::size_t>(topology.layer_size(k));
    for (int j = 0; j < topology.layer_size(k); ++j) out.push_back(pos++);
  }
  return out;
}

StdpIntegral stdp_integral_check(const std::vector<NetState<double>>& trajectory, const VectorXd& x) {
  if (trajectory.empty()) throw PreconditionError("STDP integral needs a non-empty trajectory");
  const std::size_t n = trajectory.front().layers.size();
  for (const auto& s : trajectory) {
    if (s.layers.size() != n) throw DimensionError("trajectory states have different layer counts");
  }
  // Firing rates per time step, with the clamped input as layer 0.
  auto rates = [&](const NetState<double>& s) {
    std::vector<VectorXd> r{rho(x)};
    for (const auto& l : s.layers) r.push_back(rho(l));
    return r;
  };
  StdpIntegral out;
  const auto first = rates(trajectory.front());
  const auto last = rates(trajectory.back());
  for (std::size_t k = 1; k <= n; ++k) {
    out.telescoping.push_back(MatrixXd::Zero(first[k - 1].size(), first[k].size()));
    out.left_point.push_back(MatrixXd::Zero(first[k - 1].size(), first[k].size()));
    out.endpoint.push_back(last[k - 1] * last[k].transpose() - first[k - 1] * first[k].transpose());
  }
  auto prev = first;
  for (std::size_t t = 1; t < trajectory.size(); ++t) {
    const auto cur = rates(trajectory[t]);
    for (std::size_t k = 1; k <= n; ++k) {
      const VectorXd& a0 = prev[k - 1];
      const VectorXd& b0 = prev[k];
      const VectorXd& a1 = cur[k - 1];
      const VectorXd& b1 = cur[k];
      out.telescoping[k - 1] += a1 * b1.transpose() - a0 * b0.transpose();
      out.left_point[k - 1] += a0 * (b1 - b0).transpose() + (a1 - a0) * b0.transpose();
    }
    prev = cur;
  }
  return out;
}

bool is_interior(const NetState<double>& s, double margin) {
  for (const auto& l : s.layers) {
    if (l.size() > 0 && (l.minCoeff() < margin || l.maxCoeff() > 1.0 - margin)) return false;
  }
  return true;
}

OracleInstance sample_interior_instance(const Topology& topology, std::uint64_t seed,
                                        const InstanceOptions& options) {
  Rng rng(derive_seed(seed, 0x1a57a9ceULL));
  VectorXd x(topology.input_size());
  for (Eigen::Index i = 0; i < x.size(); ++i) x[i] = rng.uniform();
  VectorXd target(topology.output_size());
  for (Eigen::Index i = 0; i < target.size(); ++i) target[i] = rng.uniform();

  NetState<double> interior = NetState<double>::zeros(topology);
  for (auto& l : interior.layers) l.setConstant(0.5);
  for (int draw = 1; draw <= options.max_draws; ++draw) {
    LayeredParams<double> params = init_params(topology, rng());
    const Eigen::SelfAdjointEigenSolver<MatrixXd> eig(energy_hessian(params, interior), Eigen::EigenvaluesOnly);
    if (eig.eigenvalues().minCoeff() < options.min_hessian_eigenvalue) continue;

    NetState<double> s_star = NetState<double>::zeros(topology);
    for (auto& l : s_star.layers) {
      for (Eigen::Index j = 0; j < l.size(); ++j) l[j] = rng.uniform(options.state_lo, options.state_hi);
    }
    // With zero biases the free force at s* is -s* + drive; b = -force makes it vanish.
    const NetState<double> f = force(params, x, s_star, 0.0, target);
    for (std::size_t k = 0; k < params.biases.size(); ++k) params.biases[k] = -f.layers[k];

    const auto free = relax(NetState<double>::zeros(topology), params, x, target, with_beta(options.phase, 0.0));
    if (!free.converged || !is_interior(free.state, options.margin)) continue;
    OracleInstance inst;
    inst.params = std::move(params);
    inst.x = x;
    inst.target = target;
    inst.free_state = free.state;
    inst.seed = seed;
    inst.draws = draw;
    return inst;
  }
  throw PreconditionError("no interior instance for topology " + topology.to_string() + " within " +
                          std::to_string(options.max_draws) + " draws");
}

}  // namespace eqprop
