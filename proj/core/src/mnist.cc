#include "eqprop/mnist.h"

#include <zlib.h>

#include <algorithm>
#include <array>
#include <fstream>
#include <iterator>
#include <string>

#include "eqprop/errors.h"
#include "eqprop/rng.h"

namespace eqprop {

namespace {

std::uint32_t read_be32(std::span<const std::uint8_t> bytes, std::size_t offset) {
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void append_be32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

std::string hex32(std::uint32_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s = "0x";
  for (int shift = 28; shift >= 0; shift -= 4) s += kDigits[(v >> shift) & 0xf];
  return s;
}

void check_magic(std::span<const std::uint8_t> bytes, std::uint32_t expected, std::size_t header_size) {
  if (bytes.size() < 4) {
    throw FormatError("IDX stream too short for a magic number (" + std::to_string(bytes.size()) + " bytes)");
  }
  const std::uint32_t magic = read_be32(bytes, 0);
  if (magic != expected) {
    throw FormatError("bad IDX magic: expected " + hex32(expected) + " (" + std::to_string(expected) + "), got " +
                      hex32(magic) + " (" + std::to_string(magic) + ")");
  }
  if (bytes.size() < header_size) {
    throw FormatError("truncated IDX header: need " + std::to_string(header_size) + " bytes, have " +
                      std::to_string(bytes.size()));
  }
}

std::vector<std::uint8_t> inflate_gzip(const std::vector<std::uint8_t>& compressed, const std::string& name) {
  z_stream zs{};
  if (inflateInit2(&zs, 16 + MAX_WBITS) != Z_OK) throw IoError("cannot initialise zlib for " + name);
  zs.next_in = const_cast<Bytef*>(compressed.data());
  zs.avail_in = static_cast<uInt>(compressed.size());
  std::vector<std::uint8_t> out;
  std::array<std::uint8_t, 1 << 16> chunk{};
  int rc = Z_OK;
  while (rc != Z_STREAM_END) {
    zs.next_out = chunk.data();
    zs.avail_out = static_cast<uInt>(chunk.size());
    rc = inflate(&zs, Z_NO_FLUSH);
    if (rc != Z_OK && rc != Z_STREAM_END) {
      inflateEnd(&zs);
      throw FormatError("corrupt gzip stream in " + name);
    }
    out.insert(out.end(), chunk.data(), chunk.data() + (chunk.size() - zs.avail_out));
    if (rc == Z_OK && zs.avail_in == 0 && zs.avail_out != 0) {
      inflateEnd(&zs);
      throw FormatError("truncated gzip stream in " + name);
    }
  }
  inflateEnd(&zs);
  return out;
}

std::filesystem::path find_mnist_file(const std::filesystem::path& dir, const std::string& stem) {
  for (const auto& candidate : {dir / stem, dir / (stem + ".gz")}) {
    if (std::filesystem::exists(candidate)) return candidate;
  }
  // Some distributions use '.' instead of '-' before "idx".
  std::string dotted = stem;
  if (auto pos = dotted.find("-idx"); pos != std::string::npos) dotted[pos] = '.';
  for (const auto& candidate : {dir / dotted, dir / (dotted + ".gz")}) {
    if (std::filesystem::exists(candidate)) return candidate;
  }
  throw IoError("cannot find " + stem + "[.gz] in " + dir.string());
}

}  // namespace

std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("error reading " + path.string());
  if (bytes.size() >= 2 && bytes[0] == 0x1f && bytes[1] == 0x8b) return inflate_gzip(bytes, path.string());
  return bytes;
}

IdxImages parse_idx_images(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxImageMagic, 16);
  IdxImages img;
  img.count = read_be32(bytes, 4);
  img.rows = read_be32(bytes, 8);
  img.cols = read_be32(bytes, 12);
  const std::uint64_t payload = std::uint64_t{img.count} * img.rows * img.cols;
  if (bytes.size() - 16 < payload) {
    throw FormatError("truncated IDX image payload: header declares " + std::to_string(payload) +
                      " bytes, stream has " + std::to_string(bytes.size() - 16));
  }
  img.pixels.assign(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(payload));
  return img;
}

std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes) {
  check_magic(bytes, kIdxLabelMagic, 8);
  const std::uint32_t count = read_be32(bytes, 4);
  if (bytes.size() - 8 < count) {
    throw FormatError("truncated IDX label payload: header declares " + std::to_string(count) +
                      " labels, stream has " + std::to_string(bytes.size() - 8));
  }
  std::vector<std::uint8_t> labels(bytes.begin() + 8, bytes.begin() + 8 + count);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] > 9) {
      throw FormatError("label " + std::to_string(labels[i]) + " at index " + std::to_string(i) +
                        " is outside [0, 9]");
    }
  }
  return labels;
}

IdxImages load_idx_images(const std::filesystem::path& path) {
  try {
    return parse_idx_images(read_maybe_gzip(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path) {
  try {
    return parse_idx_labels(read_maybe_gzip(path));
  } catch (const FormatError& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images) {
  const std::uint64_t payload = std::uint64_t{images.count} * images.rows * images.cols;
  if (images.pixels.size() != payload) {
    throw DimensionError("image buffer has " + std::to_string(images.pixels.size()) + " bytes, dims need " +
                         std::to_string(payload));
  }
  std::vector<std::uint8_t> out;
  out.reserve(16 + images.pixels.size());
  append_be32(out, kIdxImageMagic);
  append_be32(out, images.count);
  append_be32(out, images.rows);
  append_be32(out, images.cols);
  out.insert(out.end(), images.pixels.begin(), images.pixels.end());
  return out;
}

std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels) {
  std::vector<std::uint8_t> out;
  out.reserve(8 + labels.size());
  append_be32(out, kIdxLabelMagic);
  append_be32(out, static_cast<std::uint32_t>(labels.size()));
  out.insert(out.end(), labels.begin(), labels.end());
  return out;
}

namespace {

void write_bytes(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("error writing " + path.string());
}

}  // namespace

void write_idx_images(const std::filesystem::path& path, const IdxImages& images) {
  write_bytes(path, encode_idx_images(images));
}

void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels) {
  write_bytes(path, encode_idx_labels(labels));
}

std::vector<std::size_t> Dataset::train_indices() const {
  std::vector<std::size_t> idx(split);
  for (std::size_t i = 0; i < split; ++i) idx[i] = i;
  return idx;
}

std::vector<std::size_t> Dataset::validation_indices() const {
  std::vector<std::size_t> idx;
  idx.reserve(size() - split);
  for (std::size_t i = split; i < size(); ++i) idx.push_back(i);
  return idx;
}

Dataset make_dataset(const IdxImages& images, std::span<const std::uint8_t> labels, std::size_t split) {
  if (images.count != labels.size()) {
    throw DimensionError("image file holds " + std::to_string(images.count) + " images but label file holds " +
                         std::to_string(labels.size()) + " labels");
  }
  if (split > labels.size()) {
    throw DimensionError("split " + std::to_string(split) + " exceeds example count " +
                         std::to_string(labels.size()));
  }
  Dataset d;
  d.image_size = static_cast<int>(images.rows * images.cols);
  d.pixels.resize(images.pixels.size());
  for (std::size_t i = 0; i < images.pixels.size(); ++i) d.pixels[i] = static_cast<float>(images.pixels[i]) / 255.0f;
  d.labels.assign(labels.begin(), labels.end());
  d.split = split;
  return d;
}

Dataset load_mnist_training(const std::filesystem::path& dir) {
  const IdxImages images = load_idx_images(find_mnist_file(dir, "train-images-idx3-ubyte"));
  const std::vector<std::uint8_t> labels = load_idx_labels(find_mnist_file(dir, "train-labels-idx1-ubyte"));
  const std::size_t held_out = std::min(kMnistValidationSize, labels.size() / 6);
  const std::size_t split = labels.size() - held_out;
  return make_dataset(images, labels, split);
}

Dataset load_mnist_test(const std::filesystem::path& dir) {
  const IdxImages images = load_idx_images(find_mnist_file(dir, "t10k-images-idx3-ubyte"));
  const std::vector<std::uint8_t> labels = load_idx_labels(find_mnist_file(dir, "t10k-labels-idx1-ubyte"));
  return make_dataset(images, labels, labels.size());
}

VectorXd one_hot(int label, int classes) {
  if (label < 0 || label >= classes) {
    throw ConfigError("label " + std::to_string(label) + " outside [0, " + std::to_string(classes) + ")");
  }
  VectorXd v = VectorXd::Zero(classes);
  v[label] = 1.0;
  return v;
}

namespace {

void fisher_yates(std::vector<std::size_t>& v, Rng& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(v[i - 1], v[j]);
  }
}

}  // namespace

std::vector<std::vector<std::size_t>> minibatches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch) {
  if (batch_size < 1) throw ConfigError("minibatch size must be >= 1");
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Rng rng(derive_seed(seed, epoch));
  fisher_yates(order, rng);
  std::vector<std::vector<std::size_t>> batches;
  batches.reserve((order.size() + batch_size - 1) / batch_size);
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t end = std::min(order.size(), start + batch_size);
    batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                         order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return batches;
}

std::vector<std::size_t> sample_subset(std::span<const std::size_t> indices, std::size_t count,
                                       std::uint64_t seed) {
  if (count > indices.size()) {
    throw ConfigError("cannot draw " + std::to_string(count) + " examples from " + std::to_string(indices.size()));
  }
  std::vector<std::size_t> order(indices.begin(), indices.end());
  Rng rng(derive_seed(seed, 0x5b5e7ULL));
  fisher_yates(order, rng);
  order.resize(count);
  return order;
}

}  // namespace eqprop
