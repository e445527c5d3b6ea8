#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace eqprop {

// Layer sizes [d_0, d_1, ..., d_N] of a layered network x -> h_1 -> ... -> y.
// d_0 is the clamped input, d_N the output. There are no skip or lateral
// connections, so W_k only links layer k-1 to layer k.
class Topology {
 public:
  Topology() = default;
  explicit Topology(std::vector<int> layer_sizes);

  // Parses "784-500-10".
  static Topology parse(std::string_view text);

  const std::vector<int>& sizes() const { return sizes_; }
  // N: number of non-input layers (hidden layers + output).
  int num_layers() const { return static_cast<int>(sizes_.size()) - 1; }
  // d_k for k in [0, N].
  int layer_size(int k) const { return sizes_.at(static_cast<size_t>(k)); }
  int input_size() const { return sizes_.front(); }
  int output_size() const { return sizes_.back(); }
  // Sum of d_k over k = 1..N.
  int state_size() const;
  bool empty() const { return sizes_.empty(); }

  std::string to_string() const;

  friend bool operator==(const Topology&, const Topology&) = default;

 private:
  std::vector<int> sizes_;
};

}  // namespace eqprop
