#include "eqprop/stochastic.h"

#include <algorithm>
#include <limits>
#include <string>

#include "eqprop/errors.h"
#include "eqprop/model.h"

namespace eqprop {

void LangevinConfig::validate() const {
  if (!(dt > 0.0)) throw ConfigError("Langevin dt must be positive");
  if (!(sigma > 0.0)) throw ConfigError("Langevin sigma must be positive");
  if (n_steps < 0) throw ConfigError("Langevin n_steps must be >= 0");
}

NetState<double> langevin_step(const NetState<double>& state, const LayeredParams<double>& params,
                               const VectorXd& x, double beta, const VectorXd& target, const LangevinConfig& cfg,
                               Rng& rng) {
  cfg.validate();
  const NetState<double> f = force(params, x, state, beta, target);
  const double noise = cfg.sigma * std::sqrt(cfg.dt);
  NetState<double> next = state;
  for (std::size_t l = 0; l < next.layers.size(); ++l) {
    for (Eigen::Index i = 0; i < next.layers[l].size(); ++i) {
      next.layers[l][i] += f.layers[l][i] * cfg.dt + noise * rng.normal();
    }
    if (!next.layers[l].allFinite()) {
      throw NumericError("Langevin state overflowed in layer " + std::to_string(l + 1));
    }
  }
  return next;
}

NetState<double> langevin_run(const NetState<double>& state, const LayeredParams<double>& params,
                              const VectorXd& x, double beta, const VectorXd& target, const LangevinConfig& cfg,
                              const std::function<void(const NetState<double>&)>& observer) {
  cfg.validate();
  params.validate();
  Rng rng(cfg.rng_seed);
  const VectorXd drive = detail::input_drive(params, x);
  const double noise = cfg.sigma * std::sqrt(cfg.dt);
  NetState<double> s = state;
  NetState<double> f;
  s.validate(params.topology());
  for (long t = 0; t < cfg.n_steps; ++t) {
    detail::force_into(params, drive, s, beta, target, f);
    for (std::size_t l = 0; l < s.layers.size(); ++l) {
      for (Eigen::Index i = 0; i < s.layers[l].size(); ++i) {
        s.layers[l][i] += f.layers[l][i] * cfg.dt + noise * rng.normal();
      }
      if (!s.layers[l].allFinite()) {
        throw NumericError("Langevin state overflowed in layer " + std::to_string(l + 1) + " at step " +
                           std::to_string(t));
      }
    }
    if (observer) observer(s);
  }
  return s;
}

QuadratureGrid QuadratureGrid::uniform(int dims, double lo, double hi, int points) {
  QuadratureGrid g;
  g.axes.assign(static_cast<std::size_t>(std::max(dims, 0)), QuadratureAxis{lo, hi, points});
  return g;
}

void QuadratureGrid::validate() const {
  if (axes.empty() || axes.size() > 3) {
    throw ConfigError("quadrature grid must have 1 to 3 axes, got " + std::to_string(axes.size()));
  }
  for (const auto& a : axes) {
    if (!(a.hi > a.lo)) throw ConfigError("quadrature axis needs hi > lo");
    if (a.points < 3 || a.points % 2 == 0) {
      throw ConfigError("Simpson's rule needs an odd point count >= 3, got " + std::to_string(a.points));
    }
  }
}

namespace {

struct AxisNodes {
  std::vector<double> nodes;
  std::vector<double> weights;
};

AxisNodes simpson_nodes(const QuadratureAxis& a) {
  AxisNodes out;
  const int n = a.points;
  const double h = (a.hi - a.lo) / (n - 1);
  out.nodes.resize(static_cast<std::size_t>(n));
  out.weights.resize(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    out.nodes[static_cast<std::size_t>(i)] = a.lo + h * i;
    const double w = (i == 0 || i == n - 1) ? 1.0 : (i % 2 == 1 ? 4.0 : 2.0);
    out.weights[static_cast<std::size_t>(i)] = w * h / 3.0;
  }
  return out;
}

// Visits every grid point with its state, log Simpson weight and a flag
// telling whether it lies on an outer face of the grid.
template <typename Visit>
void for_each_point(const Topology& topology, const QuadratureGrid& grid, Visit&& visit) {
  std::vector<AxisNodes> axes;
  for (const auto& a : grid.axes) axes.push_back(simpson_nodes(a));
  const std::size_t dims = axes.size();
  std::vector<std::size_t> idx(dims, 0);
  VectorXd flat(static_cast<Eigen::Index>(dims));
  while (true) {
    double log_w = 0.0;
    bool on_face = false;
    for (std::size_t d = 0; d < dims; ++d) {
      flat[static_cast<Eigen::Index>(d)] = axes[d].nodes[idx[d]];
      log_w += std::log(axes[d].weights[idx[d]]);
      on_face = on_face || idx[d] == 0 || idx[d] + 1 == axes[d].nodes.size();
    }
    visit(NetState<double>::unflatten(topology, flat), log_w, on_face);
    std::size_t d = 0;
    while (d < dims && ++idx[d] == axes[d].nodes.size()) idx[d++] = 0;
    if (d == dims) break;
  }
}

// Several expectations under one Boltzmann law, sharing the grid pass.
std::vector<QuadratureResult> expectations(const std::vector<StateFunction>& fns,
                                           const LayeredParams<double>& params, const VectorXd& x, double beta,
                                           const VectorXd& target, const QuadratureGrid& grid) {
  grid.validate();
  const Topology topology = params.topology();
  if (topology.state_size() > 3) {
    throw PreconditionError("quadrature supports state dimension <= 3, network has " +
                            std::to_string(topology.state_size()));
  }
  if (static_cast<int>(grid.axes.size()) != topology.state_size()) {
    throw PreconditionError("grid has " + std::to_string(grid.axes.size()) + " axes, state dimension is " +
                            std::to_string(topology.state_size()));
  }
  if (x.size() != topology.input_size() || target.size() != topology.output_size()) {
    throw DimensionError("input/target sizes do not match topology " + topology.to_string());
  }

  // First pass: log-density (minus F) and the stabilising maximum.
  std::vector<double> neg_f;
  std::vector<double> log_w;
  std::vector<char> face;
  double max_neg_f = -std::numeric_limits<double>::infinity();
  double max_face_neg_f = -std::numeric_limits<double>::infinity();
  std::vector<NetState<double>> states;
  for_each_point(topology, grid, [&](NetState<double> s, double lw, bool on_face) {
    const double v = -(detail::energy_unchecked(params, x, s) + beta * detail::cost_unchecked(s, target));
    neg_f.push_back(v);
    log_w.push_back(lw);
    face.push_back(on_face ? 1 : 0);
    max_neg_f = std::max(max_neg_f, v);
    if (on_face) max_face_neg_f = std::max(max_face_neg_f, v);
    states.push_back(std::move(s));
  });

  std::vector<QuadratureResult> out(fns.size());
  std::vector<VectorXd> sums(fns.size());
  double z = 0.0;
  for (std::size_t p = 0; p < states.size(); ++p) {
    const double w = std::exp(log_w[p] + neg_f[p] - max_neg_f);
    z += w;
    for (std::size_t f = 0; f < fns.size(); ++f) {
      const VectorXd v = fns[f](states[p]);
      if (sums[f].size() == 0) sums[f] = VectorXd::Zero(v.size());
      sums[f] += w * v;
    }
  }
  const double ratio = std::exp(max_face_neg_f - max_neg_f);
  for (std::size_t f = 0; f < fns.size(); ++f) {
    out[f].values = sums[f] / z;
    out[f].boundary_ratio = ratio;
    out[f].boundary_warning = ratio > kBoundaryWarningRatio;
  }
  return out;
}

}  // namespace

QuadratureResult boltzmann_expectation(const StateFunction& fn, const LayeredParams<double>& params,
                                       const VectorXd& x, double beta, const VectorXd& target,
                                       const QuadratureGrid& grid) {
  return expectations({fn}, params, x, beta, target, grid).front();
}

QuadratureResult boltzmann_expectation(const std::function<double(const NetState<double>&)>& fn,
                                       const LayeredParams<double>& params, const VectorXd& x, double beta,
                                       const VectorXd& target, const QuadratureGrid& grid) {
  return boltzmann_expectation(
      StateFunction([&fn](const NetState<double>& s) { return VectorXd::Constant(1, fn(s)); }), params, x, beta,
      target, grid);
}

double Theorem2Result::max_relative_error() const {
  double worst = 0.0;
  for (Eigen::Index i = 0; i < lhs.size(); ++i) {
    const double denom = std::abs(lhs[i]);
    const double err = std::abs(rhs[i] - lhs[i]);
    worst = std::max(worst, denom > 0.0 ? err / denom : (err == 0.0 ? 0.0 : INFINITY));
  }
  return worst;
}

Theorem2Result theorem2_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                              double beta, const QuadratureGrid& grid, double theta_delta) {
  if (beta == 0.0) throw ConfigError("theorem2_check needs beta != 0");
  if (!(theta_delta > 0.0)) throw ConfigError("theta_delta must be positive");
  auto cost_fn = StateFunction(
      [&target](const NetState<double>& s) { return VectorXd::Constant(1, detail::cost_unchecked(s, target)); });
  Theorem2Result out;

  // Left side: finite differences of J~(theta) = E^0[C].
  LayeredParams<double> perturbed = params;
  out.lhs.resize(static_cast<Eigen::Index>(params.flat_size()));
  for (std::size_t p = 0; p < params.flat_size(); ++p) {
    const double original = params.entry(p);
    perturbed.entry(p) = original + theta_delta;
    const auto up = boltzmann_expectation(cost_fn, perturbed, x, 0.0, target, grid);
    perturbed.entry(p) = original - theta_delta;
    const auto down = boltzmann_expectation(cost_fn, perturbed, x, 0.0, target, grid);
    perturbed.entry(p) = original;
    out.lhs[static_cast<Eigen::Index>(p)] = (up.values[0] - down.values[0]) / (2.0 * theta_delta);
    out.boundary_warning = out.boundary_warning || up.boundary_warning || down.boundary_warning;
  }

  // Right side: one-sided contrast of the expected parameter gradients.
  auto dtheta = [&](double b) {
    return StateFunction([&params, &x, &target, b](const NetState<double>& s) {
      return grad_theta(params, x, s, b, target).theta.flatten();
    });
  };
  const auto nudged = boltzmann_expectation(dtheta(beta), params, x, beta, target, grid);
  const auto free = boltzmann_expectation(dtheta(0.0), params, x, 0.0, target, grid);
  out.rhs = (nudged.values - free.values) / beta;
  out.boundary_warning = out.boundary_warning || nudged.boundary_warning || free.boundary_warning;
  return out;
}

Prop2Result prop2_check(const LayeredParams<double>& params, const VectorXd& x, const VectorXd& target,
                        const QuadratureGrid& grid, double beta_step) {
  if (!(beta_step > 0.0)) throw ConfigError("beta_step must be positive");
  auto cost_fn = StateFunction([&target](const NetState<double>& s) {
    const double c = detail::cost_unchecked(s, target);
    return VectorXd{{c, c * c}};
  });
  const auto plus = boltzmann_expectation(cost_fn, params, x, beta_step, target, grid);
  const auto minus = boltzmann_expectation(cost_fn, params, x, -beta_step, target, grid);
  const auto free = boltzmann_expectation(cost_fn, params, x, 0.0, target, grid);
  Prop2Result out;
  out.derivative = (plus.values[0] - minus.values[0]) / (2.0 * beta_step);
  out.neg_variance = -(free.values[1] - free.values[0] * free.values[0]);
  out.boundary_warning = plus.boundary_warning || minus.boundary_warning || free.boundary_warning;
  return out;
}

}  // namespace eqprop
