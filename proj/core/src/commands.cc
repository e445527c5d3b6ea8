#include "eqprop/commands.h"

#include <filesystem>
#include <iomanip>

#include "eqprop/checkpoint.h"
#include "eqprop/checks.h"
#include "eqprop/errors.h"
#include "eqprop/metrics.h"
#include "eqprop/mnist.h"

namespace eqprop {

namespace {

void require_mnist_shape(const Topology& topology) {
  if (topology.input_size() != 784 || topology.output_size() != 10) {
    throw DimensionError("MNIST commands need 784 inputs and 10 outputs, topology is " + topology.to_string());
  }
}

template <typename T>
void train_at(const RunConfig& cfg, const Dataset& data, const TrainSplit& split, LayeredParams<double> start,
              const TrainResume& resume, std::ostream& out) {
  const std::filesystem::path metrics_path = cfg.output_dir / "metrics.csv";
  CsvMetricsSink sink(metrics_path, resume.completed_epochs > 0);
  const EpochCallback<T> on_epoch = [&](int epoch, const LayeredParams<T>& params, const Rng& rng) {
    Checkpoint c;
    c.precision = cfg.train.precision;
    c.topology = cfg.topology;
    c.params = params.template cast<double>();
    c.epoch = static_cast<std::uint64_t>(epoch);
    c.rng_state = rng.state();
    save_checkpoint(cfg.checkpoint, c);
  };
  struct Echo final : MetricsSink {
    MetricsSink& inner;
    std::ostream& out;
    Echo(MetricsSink& i, std::ostream& o) : inner(i), out(o) {}
    void record(const MetricsRecord& r) override {
      inner.record(r);
      out << "epoch " << r.epoch << std::fixed << std::setprecision(4) << "  train_error " << r.train_error_rate
          << "  val_error " << r.val_error_rate << "  mean_energy " << r.mean_energy << "  mean_cost " << r.mean_cost
          << std::setprecision(1) << "  " << r.wall_seconds << "s" << std::defaultfloat << std::endl;
    }
  } echo(sink, out);
  train<T>(start.cast<T>(), data, split, cfg.train, &echo, on_epoch, resume);
  out << "metrics: " << metrics_path.string() << "\ncheckpoint: " << cfg.checkpoint.string() << '\n';
}

int run_train(const RunConfig& cfg, std::ostream& out) {
  require_mnist_shape(cfg.topology);
  const Dataset data = load_mnist_training(cfg.data_dir);
  TrainSplit split;
  split.train = data.train_indices();
  split.validation = data.validation_indices();
  if (cfg.train_subset > 0) {
    if (cfg.train_subset > split.train.size()) {
      throw ConfigError("train_subset " + std::to_string(cfg.train_subset) + " exceeds the " +
                        std::to_string(split.train.size()) + " training examples");
    }
    split.train = sample_subset(split.train, cfg.train_subset, derive_seed(cfg.train.rng_seed, 2));
  }
  std::filesystem::create_directories(cfg.output_dir);

  LayeredParams<double> start;
  TrainResume resume;
  if (cfg.resume) {
    const Checkpoint c = load_checkpoint(cfg.checkpoint);
    if (!(c.topology == cfg.topology)) {
      throw DimensionError("checkpoint topology " + c.topology.to_string() + " does not match configured " +
                           cfg.topology.to_string());
    }
    if (c.precision != cfg.train.precision) {
      throw ConfigError(std::string("checkpoint precision is ") + to_string(c.precision) + ", config asks for " +
                        to_string(cfg.train.precision));
    }
    start = c.params;
    resume.completed_epochs = static_cast<int>(c.epoch);
    resume.rng_state = c.rng_state;
    out << "resuming after epoch " << c.epoch << '\n';
  } else {
    start = init_params(cfg.topology, derive_seed(cfg.train.rng_seed, 0));
  }
  out << "train " << cfg.topology.to_string() << " on " << split.train.size() << " examples, "
      << to_string(cfg.train.precision) << ", " << cfg.train.epochs << " epochs\n";
  if (cfg.train.precision == Precision::kF32) {
    train_at<float>(cfg, data, split, std::move(start), resume, out);
  } else {
    train_at<double>(cfg, data, split, std::move(start), resume, out);
  }
  return kExitOk;
}

int run_eval(const RunConfig& cfg, std::ostream& out) {
  const Checkpoint c = load_checkpoint(cfg.checkpoint);
  if (!(c.topology == cfg.topology)) {
    throw DimensionError("checkpoint topology " + c.topology.to_string() + " does not match configured " +
                         cfg.topology.to_string());
  }
  require_mnist_shape(c.topology);
  const Dataset data = cfg.eval_split == "test" ? load_mnist_test(cfg.data_dir) : load_mnist_training(cfg.data_dir);
  const std::vector<std::size_t> indices =
      cfg.eval_split == "validation" ? data.validation_indices() : data.train_indices();
  if (indices.empty()) throw ConfigError("split '" + cfg.eval_split + "' is empty");
  double rate = 0.0;
  if (c.precision == Precision::kF32) {
    rate = error_rate(c.params.cast<float>(), data, indices, cfg.train);
  } else {
    rate = error_rate(c.params, data, indices, cfg.train);
  }
  out << cfg.eval_split << " error rate: " << std::fixed << std::setprecision(4) << rate << " ("
      << static_cast<long>(std::lround(rate * static_cast<double>(indices.size()))) << "/" << indices.size()
      << ", epoch " << c.epoch << ")\n"
      << std::defaultfloat;
  return kExitOk;
}

int report(const std::vector<CheckResult>& results, std::ostream& out) {
  print_check_table(out, results);
  const bool ok = all_passed(results);
  out << (ok ? "all checks passed\n" : "some checks FAILED\n");
  return ok ? kExitOk : kExitCheckFailed;
}

}  // namespace

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const NumericError*>(&e)) return kExitNumeric;
  if (dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e)) return kExitIo;
  if (dynamic_cast<const std::filesystem::filesystem_error*>(&e)) return kExitIo;
  if (dynamic_cast<const Error*>(&e)) return kExitUsage;
  return kExitNumeric;
}

int run(const RunConfig& cfg, std::ostream& out, std::ostream& err) {
  try {
    switch (cfg.command) {
      case Command::kTrain:
        return run_train(cfg, out);
      case Command::kEval:
        return run_eval(cfg, out);
      case Command::kGradcheck: {
        GradcheckOptions options;
        options.seed = cfg.check_seed;
        options.gradient_instances = options.prop1_instances = options.lemma1_instances = cfg.instances;
        return report(run_gradcheck_suite(options), out);
      }
      case Command::kStochasticCheck: {
        StochasticCheckOptions options;
        options.seed = cfg.check_seed;
        return report(run_stochastic_suite(options), out);
      }
    }
  } catch (const std::exception& e) {
    err << "eqprop " << to_string(cfg.command) << ": " << e.what() << '\n';
    return exit_code_for(e);
  }
  return kExitUsage;
}

}  // namespace eqprop
