#include <benchmark/benchmark.h>

#include <vector>

#include "eqprop/relaxation.h"
#include "eqprop/rng.h"
#include "eqprop/train.h"

namespace {

using namespace eqprop;

Topology mnist_topology(int hidden_layers) {
  std::vector<int> sizes{784};
  for (int i = 0; i < hidden_layers; ++i) sizes.push_back(500);
  sizes.push_back(10);
  return Topology(sizes);
}

template <typename T>
struct Fixture {
  explicit Fixture(int hidden_layers) : topology(mnist_topology(hidden_layers)) {
    params = init_params(topology, 7).cast<T>();
    config = *table_hyperparameters(topology);
    Rng rng(11);
    x.resize(784);
    for (auto& v : x) v = static_cast<T>(rng.uniform());
    target = Vector<T>::Zero(10);
    target[3] = T(1);
  }
  Topology topology;
  LayeredParams<T> params;
  TrainConfig config;
  Vector<T> x;
  Vector<T> target;
};

template <typename T>
void BM_FreePhase(benchmark::State& st) {
  Fixture<T> f(static_cast<int>(st.range(0)));
  const auto phase = f.config.free_phase();
  const auto s0 = NetState<T>::zeros(f.topology);
  for (auto _ : st) {
    auto r = relax(s0, f.params, f.x, f.target, phase);
    benchmark::DoNotOptimize(r.energy);
  }
  st.counters["steps"] = phase.max_iters;
}

template <typename T>
void BM_EqPropUpdate(benchmark::State& st) {
  Fixture<T> f(static_cast<int>(st.range(0)));
  const auto s0 = NetState<T>::zeros(f.topology);
  Rng rng(3);
  for (auto _ : st) {
    auto u = eqprop_update(f.params, f.x, f.target, s0, f.config, rng);
    benchmark::DoNotOptimize(u.delta.weights.front().data());
  }
}

BENCHMARK_TEMPLATE(BM_FreePhase, double)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);
BENCHMARK_TEMPLATE(BM_FreePhase, float)->Arg(1)->Arg(2)->Unit(benchmark::kMicrosecond);
BENCHMARK_TEMPLATE(BM_EqPropUpdate, double)->Arg(1)->Arg(2)->Arg(3)->Unit(benchmark::kMicrosecond);
BENCHMARK_TEMPLATE(BM_EqPropUpdate, float)->Arg(1)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
