#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "eqprop/topology.h"
#include "eqprop/train.h"

namespace eqprop {

enum class Command { kTrain, kEval, kGradcheck, kStochasticCheck };

const char* to_string(Command command);

struct RunConfig {
  Command command = Command::kTrain;
  Topology topology{{784, 500, 10}};
  TrainConfig train;
  std::filesystem::path data_dir = "data/mnist";
  std::filesystem::path output_dir = "runs/latest";
  // Defaults to output_dir / "checkpoint.eqp".
  std::filesystem::path checkpoint;
  // Train on a seeded subset of this many training examples (0 = all).
  std::size_t train_subset = 0;
  // eval: "train", "validation" or "test".
  std::string eval_split = "validation";
  bool resume = false;
  // gradcheck / stochastic-check: instance count override (0 = suite default).
  int instances = 0;
  std::uint64_t check_seed = 1234;
};

// Every key accepted in a config file or as --key on the command line.
const std::vector<std::string>& config_keys();

// Builds a RunConfig from a UTF-8 `key = value` file (blank lines and text
// after '#' ignored) and then applies `overrides` in order. Unset training
// hyperparameters come from the published table row matching the topology;
// other topologies must set learning_rates explicitly. Throws ConfigError
// naming the line (or flag) on unknown keys and unparsable values.
RunConfig parse_config(Command command, std::string_view file_text,
                       const std::vector<std::pair<std::string, std::string>>& overrides = {},
                       std::string_view source_name = "config");

// Reads the file and calls parse_config. Throws IoError if unreadable.
RunConfig load_config(Command command, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides = {});

}  // namespace eqprop
