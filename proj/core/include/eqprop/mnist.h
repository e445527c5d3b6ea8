#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "eqprop/types.h"

namespace eqprop {

// IDX container (big-endian). Images use magic 0x00000803 with dims
// [count, rows, cols]; labels use 0x00000801 with dims [count].
inline constexpr std::uint32_t kIdxImageMagic = 0x00000803;
inline constexpr std::uint32_t kIdxLabelMagic = 0x00000801;

struct IdxImages {
  std::uint32_t count = 0;
  std::uint32_t rows = 0;
  std::uint32_t cols = 0;
  std::vector<std::uint8_t> pixels;  // count * rows * cols, row-major per image
};

// Reads a whole file, inflating it if it starts with the gzip magic 1f 8b.
std::vector<std::uint8_t> read_maybe_gzip(const std::filesystem::path& path);

// Parsers throw FormatError on a wrong magic (naming expected and actual) or a
// truncated payload, and the label parser throws FormatError naming the index
// of any label outside [0, 9].
IdxImages parse_idx_images(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> parse_idx_labels(std::span<const std::uint8_t> bytes);
IdxImages load_idx_images(const std::filesystem::path& path);
std::vector<std::uint8_t> load_idx_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_idx_images(const IdxImages& images);
std::vector<std::uint8_t> encode_idx_labels(std::span<const std::uint8_t> labels);
void write_idx_images(const std::filesystem::path& path, const IdxImages& images);
void write_idx_labels(const std::filesystem::path& path, std::span<const std::uint8_t> labels);

// Labelled images with pixels scaled to [0, 1] by 1/255. Examples [0, split)
// are the training part, [split, size()) the validation part.
struct Dataset {
  int image_size = 0;
  std::vector<float> pixels;
  std::vector<std::uint8_t> labels;
  std::size_t split = 0;

  std::size_t size() const { return labels.size(); }
  Eigen::Map<const Eigen::VectorXf> image(std::size_t i) const {
    return {pixels.data() + i * static_cast<std::size_t>(image_size), image_size};
  }
  std::vector<std::size_t> train_indices() const;
  std::vector<std::size_t> validation_indices() const;
};

// Throws DimensionError if counts differ or split > count.
Dataset make_dataset(const IdxImages& images, std::span<const std::uint8_t> labels, std::size_t split);

inline constexpr std::size_t kMnistValidationSize = 10'000;

// Loads train-images-idx3-ubyte / train-labels-idx1-ubyte (optionally .gz)
// from `dir`. The last min(10,000, count / 6) examples form the validation
// part: 50,000 / 10,000 on the official file.
Dataset load_mnist_training(const std::filesystem::path& dir);
// Loads the t10k files; every example is in the "training" part (split = size).
Dataset load_mnist_test(const std::filesystem::path& dir);

// e_label in R^classes. Throws ConfigError if label is out of range.
VectorXd one_hot(int label, int classes = 10);

// Shuffles `indices` with a permutation seeded by (seed, epoch) and cuts it
// into batches of `batch_size`; the final batch may be short.
std::vector<std::vector<std::size_t>> minibatches(std::span<const std::size_t> indices, std::size_t batch_size,
                                                  std::uint64_t seed, std::uint64_t epoch);

// A seeded sample of `count` distinct indices from `indices`, in sampled order.
std::vector<std::size_t> sample_subset(std::span<const std::size_t> indices, std::size_t count,
                                       std::uint64_t seed);

}  // namespace eqprop
