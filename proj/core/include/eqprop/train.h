#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "eqprop/mnist.h"
#include "eqprop/params.h"
#include "eqprop/relaxation.h"
#include "eqprop/rng.h"
#include "eqprop/topology.h"

namespace eqprop {

enum class Precision : std::uint8_t { kF32 = 4, kF64 = 8 };

const char* to_string(Precision p);

struct TrainConfig {
  double beta_magnitude = 1.0;
  // Draw the sign of beta at random (once per example per update).
  bool random_beta_sign = true;
  double epsilon = 0.5;
  int free_iters = 20;
  int clamped_iters = 4;
  // alpha_k for W_k and b_k, one per non-input layer.
  std::vector<double> learning_rates;
  int minibatch_size = 20;
  int epochs = 1;
  std::uint64_t rng_seed = 0;
  Precision precision = Precision::kF64;
  // Worker threads for the per-example relaxations of a minibatch. Results do
  // not depend on this value.
  int threads = 1;

  // Throws ConfigError.
  void validate(const Topology& topology) const;

  PhaseConfig free_phase() const;
  PhaseConfig clamped_phase(double beta) const;
};

// Published settings for 784-500-10, 784-500-500-10 and 784-500-500-500-10;
// nullopt for any other topology.
std::optional<TrainConfig> table_hyperparameters(const Topology& topology);

// Glorot uniform init: W_k ~ U[-r, r], r = sqrt(6 / (d_{k-1} + d_k)).
// Biases are zero. Deterministic per seed.
LayeredParams<double> init_params(const Topology& topology, std::uint64_t seed);

// Last free-phase fixed point of each training example, used to warm start
// the next free phase on that example. Slots are indexed by example index and
// never alias, so concurrent writes to distinct indices are safe.
template <typename T>
class ParticleStore {
 public:
  explicit ParticleStore(std::size_t capacity) : slots_(capacity), filled_(capacity, 0) {}

  const NetState<T>* find(std::size_t index) const;
  // Throws DimensionError if index >= capacity.
  void store(std::size_t index, NetState<T> state);
  std::size_t size() const { return count_; }
  std::size_t capacity() const { return slots_.size(); }

 private:
  std::vector<NetState<T>> slots_;
  std::vector<char> filled_;
  std::size_t count_ = 0;
};

struct MetricsRecord {
  int epoch = 0;
  double train_error_rate = 0.0;
  double val_error_rate = 0.0;
  double mean_energy = 0.0;
  double mean_cost = 0.0;
  double wall_seconds = 0.0;
};

class MetricsSink {
 public:
  virtual ~MetricsSink() = default;
  virtual void record(const MetricsRecord& record) = 0;
};

// Index of the largest entry; ties go to the lowest index.
template <typename T>
int argmax(const Vector<T>& v);

// Runs the free phase (config.free_iters steps) from `initial` or from zeros
// and returns argmax of the output layer.
template <typename T>
int predict(const LayeredParams<T>& params, const Vector<T>& x, const TrainConfig& config,
            const NetState<T>* initial = nullptr);

template <typename T>
struct EqPropUpdate {
  // Parameter change for this example (not applied).
  LayeredParams<T> delta;
  FixedPointResult<T> free;
  FixedPointResult<T> clamped;
  double beta = 0.0;
};

// Two-phase update for one example. The free phase starts at `state0`, the
// weakly clamped phase at the free fixed point, with beta = +-beta_magnitude
// (sign drawn from `rng` when random_beta_sign). Returns
//   dW_k = (alpha_k / beta) (rho(u^b_{k-1}) rho(u^b_k)^T - rho(u^0_{k-1}) rho(u^0_k)^T)
//   db_k = (alpha_k / beta) (rho(s^b_k) - rho(s^0_k)).
// Throws ConfigError if the magnitude is 0.
template <typename T>
EqPropUpdate<T> eqprop_update(const LayeredParams<T>& params, const Vector<T>& x, const Vector<T>& target,
                              const NetState<T>& state0, const TrainConfig& config, Rng& rng);

template <typename T>
struct Example {
  Vector<T> x;
  Vector<T> target;
  std::size_t index = 0;
};

struct ExampleDiagnostics {
  std::size_t index = 0;
  double beta = 0.0;
  double free_energy = 0.0;
  double free_cost = 0.0;
  double free_residual = 0.0;
};

struct MinibatchResult {
  std::vector<ExampleDiagnostics> examples;
  // |mean dW_k|_F / |W_k|_F per layer, measured before the update is applied.
  std::vector<double> relative_weight_change;
};

// Runs eqprop_update for every example of the batch (warm started from
// `store`, zeros on first visit), applies the mean delta once and writes each
// free fixed point back to the store. Deltas are summed in batch order, so the
// result is the same for any thread count.
template <typename T>
MinibatchResult train_minibatch(LayeredParams<T>& params, std::span<const Example<T>> batch,
                                ParticleStore<T>& store, const TrainConfig& config, Rng& rng);

// Fraction of `indices` misclassified by predict (zero initial state).
template <typename T>
double error_rate(const LayeredParams<T>& params, const Dataset& data, std::span<const std::size_t> indices,
                  const TrainConfig& config);

template <typename T>
Example<T> make_example(const Dataset& data, std::size_t index, int classes);

struct TrainSplit {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

// Where to pick up an interrupted run. The particle store is not persisted;
// it re-warms over one epoch.
struct TrainResume {
  int completed_epochs = 0;
  std::optional<Rng::State> rng_state;
};

template <typename T>
using EpochCallback = std::function<void(int epoch, const LayeredParams<T>& params, const Rng& rng)>;

template <typename T>
struct TrainResult {
  LayeredParams<T> params;
  std::vector<MetricsRecord> history;
  Rng rng;
};

// Epoch loop: seeded shuffled minibatches over split.train, one
// MetricsRecord per epoch sent to `sink` (if any), then `on_epoch` (used for
// checkpointing). Runs epochs completed_epochs+1 .. config.epochs.
template <typename T>
TrainResult<T> train(LayeredParams<T> params, const Dataset& data, const TrainSplit& split,
                     const TrainConfig& config, MetricsSink* sink = nullptr, const EpochCallback<T>& on_epoch = {},
                     const TrainResume& resume = {});

}  // namespace eqprop
