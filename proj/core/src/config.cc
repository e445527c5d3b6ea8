#include "eqprop/config.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>

#include "eqprop/errors.h"

namespace eqprop {

const char* to_string(Command command) {
  switch (command) {
    case Command::kTrain:
      return "train";
    case Command::kEval:
      return "eval";
    case Command::kGradcheck:
      return "gradcheck";
    case Command::kStochasticCheck:
      return "stochastic-check";
  }
  return "unknown";
}

const std::vector<std::string>& config_keys() {
  static const std::vector<std::string> keys = {
      "topology",     "beta",       "random_beta_sign", "epsilon",    "free_iters", "clamped_iters",
      "learning_rates", "minibatch_size", "epochs",     "seed",       "precision",  "threads",
      "data_dir",     "output_dir", "checkpoint",       "train_subset", "eval_split", "resume",
      "instances",    "check_seed",
  };
  return keys;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

struct Entry {
  std::string value;
  std::string where;  // "config:12" or "--epsilon"
};

[[noreturn]] void bad_value(const Entry& e, std::string_view key, std::string_view expected) {
  throw ConfigError(e.where + ": key '" + std::string(key) + "': expected " + std::string(expected) + ", got '" +
                    e.value + "'");
}

double as_double(const Entry& e, std::string_view key) {
  double v = 0.0;
  const char* begin = e.value.data();
  const char* end = begin + e.value.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (e.value.empty() || ec != std::errc() || ptr != end) bad_value(e, key, "a number");
  return v;
}

template <typename Int>
Int as_int(const Entry& e, std::string_view key) {
  Int v = 0;
  const char* begin = e.value.data();
  const char* end = begin + e.value.size();
  auto [ptr, ec] = std::from_chars(begin, end, v);
  if (e.value.empty() || ec != std::errc() || ptr != end) bad_value(e, key, "an integer");
  return v;
}

bool as_bool(const Entry& e, std::string_view key) {
  std::string v = e.value;
  std::transform(v.begin(), v.end(), v.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
  if (v == "false" || v == "0" || v == "no" || v == "off") return false;
  bad_value(e, key, "a boolean (true/false)");
}

std::vector<double> as_double_list(const Entry& e, std::string_view key) {
  std::vector<double> out;
  std::string_view rest = e.value;
  while (true) {
    const auto comma = rest.find(',');
    const std::string_view token = trim(rest.substr(0, comma));
    Entry item{std::string(token), e.where};
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
      bad_value(e, key, "a comma-separated list of numbers");
    }
    out.push_back(v);
    if (comma == std::string_view::npos) break;
    rest = rest.substr(comma + 1);
  }
  return out;
}

void check_key(const std::string& key, const std::string& where) {
  const auto& keys = config_keys();
  if (std::find(keys.begin(), keys.end(), key) != keys.end()) return;
  std::string valid;
  for (const auto& k : keys) valid += (valid.empty() ? "" : ", ") + k;
  throw ConfigError(where + ": unknown key '" + key + "'; valid keys: " + valid);
}

}  // namespace

RunConfig parse_config(Command command, std::string_view file_text,
                       const std::vector<std::pair<std::string, std::string>>& overrides,
                       std::string_view source_name) {
  std::map<std::string, Entry> entries;
  int line_no = 0;
  std::size_t pos = 0;
  while (pos <= file_text.size()) {
    const auto nl = file_text.find('\n', pos);
    std::string_view line = file_text.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
    pos = nl == std::string_view::npos ? file_text.size() + 1 : nl + 1;
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const std::string where = std::string(source_name) + ":" + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw ConfigError(where + ": expected 'key = value', got '" + std::string(line) + "'");
    const std::string key(trim(line.substr(0, eq)));
    check_key(key, where);
    entries[key] = Entry{std::string(trim(line.substr(eq + 1))), where};
  }
  for (const auto& [key, value] : overrides) {
    const std::string where = "--" + key;
    check_key(key, where);
    entries[key] = Entry{std::string(trim(value)), where};
  }

  auto get = [&](const std::string& key) -> const Entry* {
    auto it = entries.find(key);
    return it == entries.end() ? nullptr : &it->second;
  };

  RunConfig cfg;
  cfg.command = command;
  if (const Entry* e = get("topology")) {
    try {
      cfg.topology = Topology::parse(e->value);
    } catch (const ConfigError&) {
      bad_value(*e, "topology", "layer sizes such as 784-500-10");
    }
  }

  const auto table = table_hyperparameters(cfg.topology);
  if (table) {
    cfg.train = *table;
  } else {
    cfg.train.learning_rates.clear();
  }

  if (const Entry* e = get("beta")) cfg.train.beta_magnitude = as_double(*e, "beta");
  if (const Entry* e = get("random_beta_sign")) cfg.train.random_beta_sign = as_bool(*e, "random_beta_sign");
  if (const Entry* e = get("epsilon")) cfg.train.epsilon = as_double(*e, "epsilon");
  if (const Entry* e = get("free_iters")) cfg.train.free_iters = as_int<int>(*e, "free_iters");
  if (const Entry* e = get("clamped_iters")) {
    cfg.train.clamped_iters = as_int<int>(*e, "clamped_iters");
  } else if (!table && cfg.train.epsilon > 0.0) {
    // Unlisted topology: N / epsilon clamped steps, enough for the error
    // signal to cross N layers.
    cfg.train.clamped_iters = static_cast<int>(std::ceil(cfg.topology.num_layers() / cfg.train.epsilon));
  }
  if (const Entry* e = get("learning_rates")) cfg.train.learning_rates = as_double_list(*e, "learning_rates");
  if (const Entry* e = get("minibatch_size")) cfg.train.minibatch_size = as_int<int>(*e, "minibatch_size");
  if (const Entry* e = get("epochs")) cfg.train.epochs = as_int<int>(*e, "epochs");
  if (const Entry* e = get("seed")) cfg.train.rng_seed = as_int<std::uint64_t>(*e, "seed");
  if (const Entry* e = get("threads")) cfg.train.threads = as_int<int>(*e, "threads");
  if (const Entry* e = get("precision")) {
    if (e->value == "f32") cfg.train.precision = Precision::kF32;
    else if (e->value == "f64") cfg.train.precision = Precision::kF64;
    else bad_value(*e, "precision", "f32 or f64");
  }
  if (const Entry* e = get("data_dir")) cfg.data_dir = e->value;
  if (const Entry* e = get("output_dir")) cfg.output_dir = e->value;
  if (const Entry* e = get("checkpoint")) cfg.checkpoint = e->value;
  if (const Entry* e = get("train_subset")) cfg.train_subset = as_int<std::size_t>(*e, "train_subset");
  if (const Entry* e = get("eval_split")) {
    if (e->value != "train" && e->value != "validation" && e->value != "test") {
      bad_value(*e, "eval_split", "train, validation or test");
    }
    cfg.eval_split = e->value;
  }
  if (const Entry* e = get("resume")) cfg.resume = as_bool(*e, "resume");
  if (const Entry* e = get("instances")) cfg.instances = as_int<int>(*e, "instances");
  if (const Entry* e = get("check_seed")) cfg.check_seed = as_int<std::uint64_t>(*e, "check_seed");

  if (cfg.checkpoint.empty()) cfg.checkpoint = cfg.output_dir / "checkpoint.eqp";
  if (cfg.instances < 0) throw ConfigError("instances must be >= 0");

  if (command == Command::kTrain || command == Command::kEval) {
    if (cfg.train.learning_rates.empty()) {
      throw ConfigError("topology " + cfg.topology.to_string() +
                        " has no published hyperparameters; set learning_rates (one per layer)");
    }
    cfg.train.validate(cfg.topology);
  }
  return cfg;
}

RunConfig load_config(Command command, const std::filesystem::path& path,
                      const std::vector<std::pair<std::string, std::string>>& overrides) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(command, text.str(), overrides, path.string());
}

}  // namespace eqprop
