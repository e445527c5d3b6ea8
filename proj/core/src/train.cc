#include "eqprop/train.h"

#include <chrono>
#include <cmath>
#include <exception>
#include <string>
#include <thread>

#include "eqprop/activation.h"
#include "eqprop/errors.h"
#include "eqprop/model.h"

namespace eqprop {

const char* to_string(Precision p) { return p == Precision::kF32 ? "f32" : "f64"; }

void TrainConfig::validate(const Topology& topology) const {
  if (!(beta_magnitude > 0.0) || !std::isfinite(beta_magnitude)) {
    throw ConfigError("beta must be a positive finite magnitude, got " + std::to_string(beta_magnitude));
  }
  if (!(epsilon > 0.0) || epsilon > 1.0) throw ConfigError("epsilon must lie in (0, 1]");
  if (free_iters < 1 || clamped_iters < 1) throw ConfigError("free_iters and clamped_iters must be >= 1");
  if (static_cast<int>(learning_rates.size()) != topology.num_layers()) {
    throw ConfigError("topology " + topology.to_string() + " needs " + std::to_string(topology.num_layers()) +
                      " learning rates, got " + std::to_string(learning_rates.size()));
  }
  for (double a : learning_rates) {
    if (!(a > 0.0) || !std::isfinite(a)) throw ConfigError("learning rates must be positive and finite");
  }
  if (minibatch_size < 1) throw ConfigError("minibatch_size must be >= 1");
  if (epochs < 0) throw ConfigError("epochs must be >= 0");
  if (threads < 1) throw ConfigError("threads must be >= 1");
}

PhaseConfig TrainConfig::free_phase() const {
  return PhaseConfig{.beta = 0.0, .epsilon = epsilon, .max_iters = free_iters, .residual_tol = 0.0};
}

PhaseConfig TrainConfig::clamped_phase(double beta) const {
  return PhaseConfig{.beta = beta, .epsilon = epsilon, .max_iters = clamped_iters, .residual_tol = 0.0};
}

std::optional<TrainConfig> table_hyperparameters(const Topology& topology) {
  TrainConfig c;
  c.beta_magnitude = 1.0;
  c.epsilon = 0.5;
  c.minibatch_size = 20;
  const auto& s = topology.sizes();
  if (s == std::vector<int>{784, 500, 10}) {
    c.free_iters = 20;
    c.clamped_iters = 4;
    c.learning_rates = {0.1, 0.05};
  } else if (s == std::vector<int>{784, 500, 500, 10}) {
    c.free_iters = 100;
    c.clamped_iters = 6;
    c.learning_rates = {0.4, 0.1, 0.01};
  } else if (s == std::vector<int>{784, 500, 500, 500, 10}) {
    c.free_iters = 500;
    c.clamped_iters = 8;
    c.learning_rates = {0.128, 0.032, 0.008, 0.002};
  } else {
    return std::nullopt;
  }
  return c;
}

LayeredParams<double> init_params(const Topology& topology, std::uint64_t seed) {
  Rng rng(seed);
  LayeredParams<double> p = LayeredParams<double>::zeros(topology);
  for (int k = 1; k <= topology.num_layers(); ++k) {
    const double bound = std::sqrt(6.0 / (topology.layer_size(k - 1) + topology.layer_size(k)));
    auto& w = p.weights[static_cast<std::size_t>(k - 1)];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = rng.uniform(-bound, bound);
    }
  }
  return p;
}

template <typename T>
const NetState<T>* ParticleStore<T>::find(std::size_t index) const {
  if (index >= slots_.size() || !filled_[index]) return nullptr;
  return &slots_[index];
}

template <typename T>
void ParticleStore<T>::store(std::size_t index, NetState<T> state) {
  if (index >= slots_.size()) {
    throw DimensionError("example index " + std::to_string(index) + " outside particle store of capacity " +
                         std::to_string(slots_.size()));
  }
  if (!filled_[index]) {
    filled_[index] = 1;
    ++count_;
  }
  slots_[index] = std::move(state);
}

template <typename T>
int argmax(const Vector<T>& v) {
  if (v.size() == 0) throw DimensionError("argmax of an empty vector");
  int best = 0;
  for (Eigen::Index i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = static_cast<int>(i);
  }
  return best;
}

template <typename T>
int predict(const LayeredParams<T>& params, const Vector<T>& x, const TrainConfig& config,
            const NetState<T>* initial) {
  const Topology topology = params.topology();
  const NetState<T> start = initial ? *initial : NetState<T>::zeros(topology);
  const Vector<T> no_target = Vector<T>::Zero(topology.output_size());
  return argmax(relax(start, params, x, no_target, config.free_phase()).state.output());
}

namespace {

template <typename T>
void check_example(const Topology& topology, const Vector<T>& x, const Vector<T>& target) {
  if (x.size() != topology.input_size() || target.size() != topology.output_size()) {
    throw DimensionError("example has input/target sizes " + std::to_string(x.size()) + "/" +
                         std::to_string(target.size()) + ", topology " + topology.to_string() + " expects " +
                         std::to_string(topology.input_size()) + "/" + std::to_string(topology.output_size()));
  }
  if (!x.allFinite() || !target.allFinite()) throw NumericError("non-finite example values");
}

double draw_beta(const TrainConfig& config, Rng& rng) {
  if (!(config.beta_magnitude > 0.0)) throw ConfigError("beta must be nonzero for the clamped phase");
  if (!config.random_beta_sign) return config.beta_magnitude;
  return rng.coin() ? -config.beta_magnitude : config.beta_magnitude;
}

template <typename T>
struct PhasePair {
  FixedPointResult<T> free;
  FixedPointResult<T> clamped;
};

// Both phases for one example; params already validated.
template <typename T>
PhasePair<T> run_phases(const LayeredParams<T>& params, const Vector<T>& x, const Vector<T>& target,
                        const NetState<T>& state0, const TrainConfig& config, double beta) {
  const Vector<T> drive = detail::input_drive(params, x);
  PhasePair<T> out;
  out.free = detail::relax_prevalidated(state0, params, x, drive, target, config.free_phase());
  out.clamped = detail::relax_prevalidated(out.free.state, params, x, drive, target, config.clamped_phase(beta));
  return out;
}

// acc += (alpha_k / beta) (rho-products at s^beta - rho-products at s^0).
template <typename T>
void accumulate_delta(const Vector<T>& x, const NetState<T>& free, const NetState<T>& clamped, double beta,
                      const std::vector<double>& rates, LayeredParams<T>& acc) {
  const Vector<T> rho_x = rho(x);
  Vector<T> below_free = rho_x;
  Vector<T> below_clamped = rho_x;
  for (std::size_t l = 0; l < free.layers.size(); ++l) {
    const T scale = static_cast<T>(rates[l] / beta);
    const Vector<T> above_free = rho(free.layers[l]);
    const Vector<T> above_clamped = rho(clamped.layers[l]);
    acc.weights[l].noalias() += (scale * below_clamped) * above_clamped.transpose();
    acc.weights[l].noalias() -= (scale * below_free) * above_free.transpose();
    acc.biases[l] += scale * (above_clamped - above_free);
    below_free = above_free;
    below_clamped = above_clamped;
  }
}

}  // namespace

template <typename T>
EqPropUpdate<T> eqprop_update(const LayeredParams<T>& params, const Vector<T>& x, const Vector<T>& target,
                              const NetState<T>& state0, const TrainConfig& config, Rng& rng) {
  const Topology topology = params.topology();
  config.validate(topology);
  check_example(topology, x, target);
  state0.validate(topology);
  EqPropUpdate<T> u;
  u.beta = draw_beta(config, rng);
  PhasePair<T> phases = run_phases(params, x, target, state0, config, u.beta);
  u.delta = LayeredParams<T>::zeros(topology);
  accumulate_delta(x, phases.free.state, phases.clamped.state, u.beta, config.learning_rates, u.delta);
  u.free = std::move(phases.free);
  u.clamped = std::move(phases.clamped);
  return u;
}

template <typename T>
MinibatchResult train_minibatch(LayeredParams<T>& params, std::span<const Example<T>> batch,
                                ParticleStore<T>& store, const TrainConfig& config, Rng& rng) {
  if (batch.empty()) throw ConfigError("minibatch is empty");
  const Topology topology = params.topology();
  config.validate(topology);
  for (const auto& ex : batch) check_example(topology, ex.x, ex.target);

  // Signs are drawn in batch order before any work is farmed out.
  std::vector<double> betas(batch.size());
  for (auto& b : betas) b = draw_beta(config, rng);

  std::vector<PhasePair<T>> phases(batch.size());
  const NetState<T> zero_state = NetState<T>::zeros(topology);
  auto work = [&](std::size_t i) {
    const NetState<T>* warm = store.find(batch[i].index);
    phases[i] = run_phases(params, batch[i].x, batch[i].target, warm ? *warm : zero_state, config, betas[i]);
  };

  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(config.threads), batch.size());
  if (workers <= 1) {
    for (std::size_t i = 0; i < batch.size(); ++i) work(i);
  } else {
    std::vector<std::exception_ptr> errors(workers);
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&, w] {
        try {
          for (std::size_t i = w; i < batch.size(); i += workers) work(i);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  LayeredParams<T> sum = LayeredParams<T>::zeros(topology);
  MinibatchResult result;
  result.examples.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    accumulate_delta(batch[i].x, phases[i].free.state, phases[i].clamped.state, betas[i], config.learning_rates,
                     sum);
    result.examples.push_back({batch[i].index, betas[i], phases[i].free.energy, phases[i].free.cost,
                               phases[i].free.residual});
  }
  const T inv = T(1) / static_cast<T>(batch.size());
  if (batch.size() > 1) sum *= inv;
  for (std::size_t l = 0; l < sum.weights.size(); ++l) {
    const double wn = static_cast<double>(params.weights[l].norm());
    result.relative_weight_change.push_back(wn > 0.0 ? static_cast<double>(sum.weights[l].norm()) / wn : 0.0);
  }
  params += sum;
  for (std::size_t i = 0; i < batch.size(); ++i) store.store(batch[i].index, std::move(phases[i].free.state));
  return result;
}

template <typename T>
Example<T> make_example(const Dataset& data, std::size_t index, int classes) {
  if (index >= data.size()) {
    throw DimensionError("example index " + std::to_string(index) + " outside dataset of size " +
                         std::to_string(data.size()));
  }
  return Example<T>{data.image(index).template cast<T>(), one_hot(data.labels[index], classes).template cast<T>(),
                    index};
}

template <typename T>
double error_rate(const LayeredParams<T>& params, const Dataset& data, std::span<const std::size_t> indices,
                  const TrainConfig& config) {
  if (indices.empty()) return 0.0;
  const Topology topology = params.topology();
  if (topology.input_size() != data.image_size) {
    throw DimensionError("network input size " + std::to_string(topology.input_size()) +
                         " does not match image size " + std::to_string(data.image_size));
  }
  const NetState<T> zero_state = NetState<T>::zeros(topology);
  const Vector<T> no_target = Vector<T>::Zero(topology.output_size());
  const PhaseConfig phase = config.free_phase();
  std::size_t wrong = 0;
  for (std::size_t idx : indices) {
    const Vector<T> x = data.image(idx).template cast<T>();
    const Vector<T> drive = detail::input_drive(params, x);
    const auto fp = detail::relax_prevalidated(zero_state, params, x, drive, no_target, phase);
    if (argmax(fp.state.output()) != static_cast<int>(data.labels[idx])) ++wrong;
  }
  return static_cast<double>(wrong) / static_cast<double>(indices.size());
}

template <typename T>
TrainResult<T> train(LayeredParams<T> params, const Dataset& data, const TrainSplit& split,
                     const TrainConfig& config, MetricsSink* sink, const EpochCallback<T>& on_epoch,
                     const TrainResume& resume) {
  const Topology topology = params.topology();
  config.validate(topology);
  if (topology.input_size() != data.image_size) {
    throw DimensionError("network input size " + std::to_string(topology.input_size()) +
                         " does not match image size " + std::to_string(data.image_size));
  }
  TrainResult<T> result{std::move(params), {}, Rng(derive_seed(config.rng_seed, 1))};
  if (resume.rng_state) result.rng = Rng::from_state(*resume.rng_state);

  ParticleStore<T> store(data.size());
  const int classes = topology.output_size();
  for (int epoch = resume.completed_epochs + 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const auto batches = minibatches(split.train, static_cast<std::size_t>(config.minibatch_size),
                                     config.rng_seed, static_cast<std::uint64_t>(epoch));
    double energy_sum = 0.0;
    double cost_sum = 0.0;
    std::size_t seen = 0;
    std::vector<Example<T>> examples;
    for (const auto& batch : batches) {
      examples.clear();
      for (std::size_t idx : batch) examples.push_back(make_example<T>(data, idx, classes));
      const MinibatchResult mb =
          train_minibatch(result.params, std::span<const Example<T>>(examples), store, config, result.rng);
      for (const auto& d : mb.examples) {
        energy_sum += d.free_energy;
        cost_sum += d.free_cost;
      }
      seen += mb.examples.size();
    }
    MetricsRecord rec;
    rec.epoch = epoch;
    rec.train_error_rate = error_rate(result.params, data, split.train, config);
    rec.val_error_rate = error_rate(result.params, data, split.validation, config);
    rec.mean_energy = seen ? energy_sum / static_cast<double>(seen) : 0.0;
    rec.mean_cost = seen ? cost_sum / static_cast<double>(seen) : 0.0;
    rec.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.history.push_back(rec);
    if (sink) sink->record(rec);
    if (on_epoch) on_epoch(epoch, result.params, result.rng);
  }
  return result;
}

#define EQPROP_INSTANTIATE_TRAIN(T)                                                                              \
  template class ParticleStore<T>;                                                                               \
  template int argmax(const Vector<T>&);                                                                         \
  template int predict(const LayeredParams<T>&, const Vector<T>&, const TrainConfig&, const NetState<T>*);        \
  template EqPropUpdate<T> eqprop_update(const LayeredParams<T>&, const Vector<T>&, const Vector<T>&,            \
                                         const NetState<T>&, const TrainConfig&, Rng&);                          \
  template MinibatchResult train_minibatch(LayeredParams<T>&, std::span<const Example<T>>, ParticleStore<T>&,    \
                                           const TrainConfig&, Rng&);                                            \
  template Example<T> make_example(const Dataset&, std::size_t, int);                                            \
  template double error_rate(const LayeredParams<T>&, const Dataset&, std::span<const std::size_t>,              \
                             const TrainConfig&);                                                                \
  template TrainResult<T> train(LayeredParams<T>, const Dataset&, const TrainSplit&, const TrainConfig&,         \
                                MetricsSink*, const EpochCallback<T>&, const TrainResume&);

EQPROP_INSTANTIATE_TRAIN(float)
EQPROP_INSTANTIATE_TRAIN(double)

#undef EQPROP_INSTANTIATE_TRAIN

}  // namespace eqprop
