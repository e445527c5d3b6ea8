#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eqprop/params.h"
#include "eqprop/rng.h"
#include "eqprop/topology.h"
#include "eqprop/train.h"

namespace eqprop {

// Binary layout, all integers and floats little-endian:
//   "EQP1"                      4 bytes magic
//   precision                   1 byte (4 = f32, 8 = f64)
//   L = N + 1                   uint32
//   d_0 .. d_N                  L x uint32
//   for k = 1..N: W_k row-major, then b_k, IEEE-754 at the declared precision
//   epoch counter               uint64
//   rng state                   32 bytes (4 x uint64)
struct Checkpoint {
  Precision precision = Precision::kF64;
  Topology topology;
  // Values are exactly representable at `precision`.
  LayeredParams<double> params;
  std::uint64_t epoch = 0;
  Rng::State rng_state{};
};

inline constexpr char kCheckpointMagic[4] = {'E', 'Q', 'P', '1'};

// Size in bytes of a checkpoint for `topology` at `precision`.
std::size_t checkpoint_size(const Topology& topology, Precision precision);

std::vector<std::uint8_t> serialize_checkpoint(const Checkpoint& checkpoint);
// Throws FormatError on a bad magic/precision, truncation or trailing bytes.
Checkpoint deserialize_checkpoint(std::span<const std::uint8_t> bytes);

// Writes atomically (temporary file + rename). Throws IoError.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace eqprop
