#include "eqprop/checkpoint.h"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <string>

#include "eqprop/errors.h"

namespace eqprop {

static_assert(std::endian::native == std::endian::little || std::endian::native == std::endian::big);

namespace {

template <typename UInt>
void put_le(std::vector<std::uint8_t>& out, UInt v) {
  for (std::size_t i = 0; i < sizeof(UInt); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

template <typename UInt>
UInt get_le(std::span<const std::uint8_t> bytes, std::size_t& pos) {
  if (bytes.size() - pos < sizeof(UInt)) {
    throw FormatError("truncated checkpoint: need " + std::to_string(sizeof(UInt)) + " bytes at offset " +
                      std::to_string(pos) + ", file has " + std::to_string(bytes.size()));
  }
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(bytes[pos + i]) << (8 * i);
  pos += sizeof(UInt);
  return v;
}

void put_real(std::vector<std::uint8_t>& out, double v, Precision precision) {
  if (precision == Precision::kF32) {
    put_le(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
  } else {
    put_le(out, std::bit_cast<std::uint64_t>(v));
  }
}

double get_real(std::span<const std::uint8_t> bytes, std::size_t& pos, Precision precision) {
  if (precision == Precision::kF32) return static_cast<double>(std::bit_cast<float>(get_le<std::uint32_t>(bytes, pos)));
  return std::bit_cast<double>(get_le<std::uint64_t>(bytes, pos));
}

}  // namespace

std::size_t checkpoint_size(const Topology& topology, Precision precision) {
  std::size_t values = 0;
  for (int k = 1; k <= topology.num_layers(); ++k) {
    values += static_cast<std::size_t>(topology.layer_size(k - 1) + 1) * static_cast<std::size_t>(topology.layer_size(k));
  }
  return 4 + 1 + 4 + 4 * topology.sizes().size() + values * static_cast<std::size_t>(precision) + 8 + 32;
}

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& c) {
  c.params.validate(c.topology);
  std::vector<std::uint8_t> out;
  out.reserve(checkpoint_size(c.topology, c.precision));
  out.insert(out.end(), std::begin(kCheckpointMagic), std::end(kCheckpointMagic));
  out.push_back(static_cast<std::uint8_t>(c.precision));
  put_le(out, static_cast<std::uint32_t>(c.topology.sizes().size()));
  for (int d : c.topology.sizes()) put_le(out, static_cast<std::uint32_t>(d));
  for (std::size_t k = 0; k < c.params.weights.size(); ++k) {
    const auto& w = c.params.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) put_real(out, w(i, j), c.precision);
    }
    for (Eigen::Index j = 0; j < c.params.biases[k].size(); ++j) put_real(out, c.params.biases[k][j], c.precision);
  }
  put_le(out, c.epoch);
  for (std::uint64_t word : c.rng_state) put_le(out, word);
  return out;
}

Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kCheckpointMagic, 4) != 0) {
    std::string got;
    for (std::size_t i = 0; i < std::min<std::size_t>(4, bytes.size()); ++i) {
      const char ch = static_cast<char>(bytes[i]);
      got += (ch >= 32 && ch < 127) ? ch : '?';
    }
    throw FormatError("bad checkpoint magic: expected \"EQP1\", got \"" + got + "\"");
  }
  std::size_t pos = 4;
  Checkpoint c;
  const std::uint8_t precision = get_le<std::uint8_t>(bytes, pos);
  if (precision != 4 && precision != 8) {
    throw FormatError("bad checkpoint precision flag " + std::to_string(precision) + " (expected 4 or 8)");
  }
  c.precision = static_cast<Precision>(precision);
  const std::uint32_t layers = get_le<std::uint32_t>(bytes, pos);
  if (layers < 2 || layers > 1024) throw FormatError("implausible checkpoint layer count " + std::to_string(layers));
  std::vector<int> sizes;
  for (std::uint32_t k = 0; k < layers; ++k) {
    const std::uint32_t d = get_le<std::uint32_t>(bytes, pos);
    if (d == 0 || d > (1u << 24)) throw FormatError("implausible checkpoint layer size " + std::to_string(d));
    sizes.push_back(static_cast<int>(d));
  }
  c.topology = Topology(std::move(sizes));
  if (bytes.size() != checkpoint_size(c.topology, c.precision)) {
    throw FormatError("checkpoint for topology " + c.topology.to_string() + " should be " +
                      std::to_string(checkpoint_size(c.topology, c.precision)) + " bytes, file has " +
                      std::to_string(bytes.size()));
  }
  c.params = LayeredParams<double>::zeros(c.topology);
  for (std::size_t k = 0; k < c.params.weights.size(); ++k) {
    auto& w = c.params.weights[k];
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = get_real(bytes, pos, c.precision);
    }
    for (Eigen::Index j = 0; j < c.params.biases[k].size(); ++j) c.params.biases[k][j] = get_real(bytes, pos, c.precision);
  }
  c.epoch = get_le<std::uint64_t>(bytes, pos);
  for (auto& word : c.rng_state) word = get_le<std::uint64_t>(bytes, pos);
  return c;
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint) {
  const std::vector<std::uint8_t> bytes = serialize_checkpoint(checkpoint);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("error writing checkpoint " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot move checkpoint into place at " + path.string() + ": " + ec.message());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  try {
    return deserialize_checkpoint(bytes);
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

}  // namespace eqprop
