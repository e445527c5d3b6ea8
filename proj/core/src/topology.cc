#include "eqprop/topology.h"

#include <charconv>
#include <numeric>

#include "eqprop/errors.h"

namespace eqprop {

Topology::Topology(std::vector<int> layer_sizes) : sizes_(std::move(layer_sizes)) {
  if (sizes_.size() < 2) {
    throw ConfigError("topology needs an input and at least one more layer, got " +
                      std::to_string(sizes_.size()) + " layer(s)");
  }
  for (size_t k = 0; k < sizes_.size(); ++k) {
    if (sizes_[k] < 1) {
      throw ConfigError("topology layer " + std::to_string(k) +
                        " has non-positive size " + std::to_string(sizes_[k]));
    }
  }
}

Topology Topology::parse(std::string_view text) {
  std::vector<int> sizes;
  size_t pos = 0;
  while (pos <= text.size()) {
    size_t end = text.find('-', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view token = text.substr(pos, end - pos);
    int value = 0;
    auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
    if (token.empty() || ec != std::errc() || ptr != token.data() + token.size()) {
      throw ConfigError("cannot parse topology '" + std::string(text) +
                        "': expected sizes separated by '-' such as 784-500-10");
    }
    sizes.push_back(value);
    pos = end + 1;
  }
  return Topology(std::move(sizes));
}

int Topology::state_size() const {
  if (sizes_.empty()) return 0;
  return std::accumulate(sizes_.begin() + 1, sizes_.end(), 0);
}

std::string Topology::to_string() const {
  std::string out;
  for (size_t k = 0; k < sizes_.size(); ++k) {
    if (k) out += '-';
    out += std::to_string(sizes_[k]);
  }
  return out;
}

}  // namespace eqprop
