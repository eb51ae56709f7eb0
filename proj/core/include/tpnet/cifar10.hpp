#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <random>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "tpnet/tensor.hpp"

namespace tpnet::data {

inline constexpr std::size_t kImageSide = 32;
inline constexpr std::size_t kImageBytes = 3 * kImageSide * kImageSide;
inline constexpr std::size_t kRecordBytes = kImageBytes + 1;
inline constexpr std::size_t kRecordsPerFile = 10000;
inline constexpr std::size_t kClasses = 10;

inline constexpr std::array<float, 3> kMean{0.4914f, 0.4822f, 0.4465f};
inline constexpr std::array<float, 3> kStd{0.2023f, 0.1994f, 0.2010f};

class LoadError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Raw images as stored on disk: 3 channel planes of 32x32 bytes each.
struct Dataset {
  std::vector<std::uint8_t> pixels;
  std::vector<std::uint8_t> labels;

  std::size_t size() const { return labels.size(); }
  std::span<const std::uint8_t> image(std::size_t i) const {
    return {pixels.data() + i * kImageBytes, kImageBytes};
  }
  void append(std::span<const std::uint8_t> image, std::uint8_t label);
};

struct Cifar10 {
  Dataset train;
  Dataset test;
};

// One binary batch file; any whole number of records is accepted.
Dataset load_batch_file(const std::filesystem::path& file);
// data_batch_{1..5}.bin and test_batch.bin in `dir` or `dir`/cifar-10-batches-bin.
Cifar10 load_cifar10(const std::filesystem::path& dir);
// Locates a CIFAR-10 directory, or nullopt when the files are absent.
std::optional<std::filesystem::path> find_cifar10(const std::filesystem::path& dir);

void write_batch_file(const std::filesystem::path& file, const Dataset& data);

std::array<std::size_t, kClasses> class_histogram(const Dataset& data);
// First n records.
Dataset take(const Dataset& data, std::size_t n);

// Class-structured random images: each class owns a smooth colour pattern
// and samples add noise to it.
Dataset synthetic(std::size_t count, std::uint64_t seed);
// Train and test sets sharing one set of class patterns.
Cifar10 synthetic_split(std::size_t train, std::size_t test, std::uint64_t seed);

struct AugmentParams {
  std::size_t pad = 4;
  double flip_probability = 0.5;
  // Fixed (row, col) crop origin in the padded image; random when unset.
  std::optional<std::pair<std::size_t, std::size_t>> crop_origin;
};

// Bytes -> [0, 1] -> per-channel normalization, written to out[3 * 32 * 32].
void normalize_into(std::span<const std::uint8_t> image, float* out);
// Zero-pad, crop, optional flip, normalize. Padding is applied to the [0, 1]
// image, so padded pixels normalize to -mean / std.
void augment_into(std::span<const std::uint8_t> image, float* out, std::mt19937_64& rng,
                  const AugmentParams& params = {});

// [B, 3, 32, 32] batch of the given records.
Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices, bool augment,
                  std::mt19937_64* rng, const AugmentParams& params = {});
std::vector<std::uint8_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices);

}  // namespace tpnet::data
