#pragma once

#include <cstddef>
#include <vector>

#include "eqprop/topology.h"
#include "eqprop/types.h"

namespace eqprop {

// theta = (W, b) for a layered network. weights[k-1] holds W_k with shape
// d_{k-1} x d_k; entry (i, j) is the single symmetric weight between unit i of
// layer k-1 and unit j of layer k. biases[k-1] holds b_k (length d_k). Input
// units carry no bias.
template <typename T>
struct LayeredParams {
  std::vector<Matrix<T>> weights;
  std::vector<Vector<T>> biases;

  static LayeredParams zeros(const Topology& topology);

  Topology topology() const;
  int num_layers() const { return static_cast<int>(weights.size()); }

  // Throws DimensionError if shapes disagree with `topology` (or are
  // internally inconsistent), NumericError on a non-finite entry.
  void validate(const Topology& topology) const;
  void validate() const;

  // Flat view in the order W_1 (row-major), b_1, W_2, b_2, ...
  std::size_t flat_size() const;
  T& entry(std::size_t flat_index);
  const T& entry(std::size_t flat_index) const;
  Vector<T> flatten() const;

  template <typename U>
  LayeredParams<U> cast() const {
    LayeredParams<U> out;
    for (const auto& w : weights) out.weights.push_back(w.template cast<U>());
    for (const auto& b : biases) out.biases.push_back(b.template cast<U>());
    return out;
  }

  LayeredParams& operator+=(const LayeredParams& other);
  LayeredParams& operator-=(const LayeredParams& other);
  LayeredParams& operator*=(T scale);
};

// Free state s = (h_1, ..., h_{N-1}, y). layers[k-1] is layer k; the last
// entry is the output y. The clamped input x is held separately.
template <typename T>
struct NetState {
  std::vector<Vector<T>> layers;

  static NetState zeros(const Topology& topology);

  int num_layers() const { return static_cast<int>(layers.size()); }
  const Vector<T>& output() const { return layers.back(); }
  Vector<T>& output() { return layers.back(); }

  // Throws DimensionError on shape mismatch, NumericError on non-finite values.
  void validate(const Topology& topology) const;

  Vector<T> flatten() const;
  static NetState unflatten(const Topology& topology, const Vector<T>& flat);

  template <typename U>
  NetState<U> cast() const {
    NetState<U> out;
    for (const auto& l : layers) out.layers.push_back(l.template cast<U>());
    return out;
  }

  friend bool operator==(const NetState& a, const NetState& b) {
    if (a.layers.size() != b.layers.size()) return false;
    for (std::size_t k = 0; k < a.layers.size(); ++k) {
      if (a.layers[k].size() != b.layers[k].size() || a.layers[k] != b.layers[k]) return false;
    }
    return true;
  }
};

// Maximum absolute elementwise difference between two states of equal shape.
template <typename T>
T max_abs_diff(const NetState<T>& a, const NetState<T>& b);

}  // namespace eqprop
