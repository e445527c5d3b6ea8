#include "eqprop/params.h"

#include <string>

#include "eqprop/errors.h"

namespace eqprop {

namespace {

std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
  return std::to_string(rows) + "x" + std::to_string(cols);
}

}  // namespace

template <typename T>
LayeredParams<T> LayeredParams<T>::zeros(const Topology& topology) {
  LayeredParams p;
  for (int k = 1; k <= topology.num_layers(); ++k) {
    p.weights.push_back(Matrix<T>::Zero(topology.layer_size(k - 1), topology.layer_size(k)));
    p.biases.push_back(Vector<T>::Zero(topology.layer_size(k)));
  }
  return p;
}

template <typename T>
Topology LayeredParams<T>::topology() const {
  validate();
  std::vector<int> sizes{static_cast<int>(weights.front().rows())};
  for (const auto& w : weights) sizes.push_back(static_cast<int>(w.cols()));
  return Topology(std::move(sizes));
}

template <typename T>
void LayeredParams<T>::validate() const {
  if (weights.empty() || weights.size() != biases.size()) {
    throw DimensionError("parameters hold " + std::to_string(weights.size()) + " weight matrices and " +
                         std::to_string(biases.size()) + " bias vectors");
  }
  for (std::size_t k = 0; k < weights.size(); ++k) {
    if (weights[k].cols() != biases[k].size() ||
        (k > 0 && weights[k].rows() != weights[k - 1].cols())) {
      throw DimensionError("inconsistent parameter shapes at layer " + std::to_string(k + 1) + ": W is " +
                           shape_string(weights[k].rows(), weights[k].cols()) + ", b has " +
                           std::to_string(biases[k].size()) + " entries");
    }
    if (!weights[k].allFinite() || !biases[k].allFinite()) {
      throw NumericError("non-finite parameter in layer " + std::to_string(k + 1));
    }
  }
}

template <typename T>
void LayeredParams<T>::validate(const Topology& topology) const {
  if (static_cast<int>(weights.size()) != topology.num_layers() || biases.size() != weights.size()) {
    throw DimensionError("parameters have " + std::to_string(weights.size()) + " layers, topology " +
                         topology.to_string() + " has " + std::to_string(topology.num_layers()));
  }
  for (int k = 1; k <= topology.num_layers(); ++k) {
    const auto& w = weights[static_cast<std::size_t>(k - 1)];
    const auto& b = biases[static_cast<std::size_t>(k - 1)];
    if (w.rows() != topology.layer_size(k - 1) || w.cols() != topology.layer_size(k) ||
        b.size() != topology.layer_size(k)) {
      throw DimensionError("layer " + std::to_string(k) + " has W " + shape_string(w.rows(), w.cols()) +
                           " and b of length " + std::to_string(b.size()) + ", topology " +
                           topology.to_string() + " expects W " +
                           shape_string(topology.layer_size(k - 1), topology.layer_size(k)));
    }
  }
  validate();
}

template <typename T>
std::size_t LayeredParams<T>::flat_size() const {
  std::size_t n = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
  }
  return n;
}

template <typename T>
T& LayeredParams<T>::entry(std::size_t flat_index) {
  return const_cast<T&>(std::as_const(*this).entry(flat_index));
}

template <typename T>
const T& LayeredParams<T>::entry(std::size_t flat_index) const {
  std::size_t i = flat_index;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const auto w_size = static_cast<std::size_t>(weights[k].size());
    if (i < w_size) {
      const auto cols = static_cast<std::size_t>(weights[k].cols());
      return weights[k](static_cast<Eigen::Index>(i / cols), static_cast<Eigen::Index>(i % cols));
    }
    i -= w_size;
    const auto b_size = static_cast<std::size_t>(biases[k].size());
    if (i < b_size) return biases[k](static_cast<Eigen::Index>(i));
    i -= b_size;
  }
  throw DimensionError("flat parameter index " + std::to_string(flat_index) + " out of range " +
                       std::to_string(flat_size()));
}

template <typename T>
Vector<T> LayeredParams<T>::flatten() const {
  Vector<T> out(static_cast<Eigen::Index>(flat_size()));
  Eigen::Index pos = 0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    for (Eigen::Index r = 0; r < weights[k].rows(); ++r) {
      out.segment(pos, weights[k].cols()) = weights[k].row(r).transpose();
      pos += weights[k].cols();
    }
    out.segment(pos, biases[k].size()) = biases[k];
    pos += biases[k].size();
  }
  return out;
}

template <typename T>
LayeredParams<T>& LayeredParams<T>::operator+=(const LayeredParams& other) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] += other.weights[k];
    biases[k] += other.biases[k];
  }
  return *this;
}

template <typename T>
LayeredParams<T>& LayeredParams<T>::operator-=(const LayeredParams& other) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] -= other.weights[k];
    biases[k] -= other.biases[k];
  }
  return *this;
}

template <typename T>
LayeredParams<T>& LayeredParams<T>::operator*=(T scale) {
  for (std::size_t k = 0; k < weights.size(); ++k) {
    weights[k] *= scale;
    biases[k] *= scale;
  }
  return *this;
}

template <typename T>
NetState<T> NetState<T>::zeros(const Topology& topology) {
  NetState s;
  for (int k = 1; k <= topology.num_layers(); ++k) s.layers.push_back(Vector<T>::Zero(topology.layer_size(k)));
  return s;
}

template <typename T>
void NetState<T>::validate(const Topology& topology) const {
  if (num_layers() != topology.num_layers()) {
    throw DimensionError("state has " + std::to_string(num_layers()) + " layers, topology " +
                         topology.to_string() + " has " + std::to_string(topology.num_layers()));
  }
  for (int k = 1; k <= topology.num_layers(); ++k) {
    const auto& l = layers[static_cast<std::size_t>(k - 1)];
    if (l.size() != topology.layer_size(k)) {
      throw DimensionError("state layer " + std::to_string(k) + " has " + std::to_string(l.size()) +
                           " units, topology expects " + std::to_string(topology.layer_size(k)));
    }
    if (!l.allFinite()) throw NumericError("non-finite state value in layer " + std::to_string(k));
  }
}

template <typename T>
Vector<T> NetState<T>::flatten() const {
  Eigen::Index n = 0;
  for (const auto& l : layers) n += l.size();
  Vector<T> out(n);
  Eigen::Index pos = 0;
  for (const auto& l : layers) {
    out.segment(pos, l.size()) = l;
    pos += l.size();
  }
  return out;
}

template <typename T>
NetState<T> NetState<T>::unflatten(const Topology& topology, const Vector<T>& flat) {
  if (flat.size() != topology.state_size()) {
    throw DimensionError("flat state has " + std::to_string(flat.size()) + " entries, topology " +
                         topology.to_string() + " needs " + std::to_string(topology.state_size()));
  }
  NetState s;
  Eigen::Index pos = 0;
  for (int k = 1; k <= topology.num_layers(); ++k) {
    s.layers.push_back(flat.segment(pos, topology.layer_size(k)));
    pos += topology.layer_size(k);
  }
  return s;
}

template <typename T>
T max_abs_diff(const NetState<T>& a, const NetState<T>& b) {
  if (a.layers.size() != b.layers.size()) throw DimensionError("states have different layer counts");
  T m = 0;
  for (std::size_t k = 0; k < a.layers.size(); ++k) {
    if (a.layers[k].size() != b.layers[k].size()) throw DimensionError("states have different layer sizes");
    if (a.layers[k].size() > 0) m = std::max(m, (a.layers[k] - b.layers[k]).cwiseAbs().maxCoeff());
  }
  return m;
}

template struct LayeredParams<float>;
template struct LayeredParams<double>;
template struct NetState<float>;
template struct NetState<double>;
template float max_abs_diff(const NetState<float>&, const NetState<float>&);
template double max_abs_diff(const NetState<double>&, const NetState<double>&);

}  // namespace eqprop
