#include "tpnet/cifar10.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <numbers>
#include <string>

namespace tpnet::data {

namespace fs = std::filesystem;

void Dataset::append(std::span<const std::uint8_t> image, std::uint8_t label) {
  if (image.size() != kImageBytes) throw std::invalid_argument("dataset: image must be 3072 bytes");
  pixels.insert(pixels.end(), image.begin(), image.end());
  labels.push_back(label);
}

Dataset load_batch_file(const fs::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw LoadError("cifar10: cannot open '" + file.string() + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  if (bytes.empty()) throw LoadError("cifar10: '" + file.string() + "' is empty");
  const std::size_t whole = bytes.size() / kRecordBytes;
  if (bytes.size() % kRecordBytes != 0) {
    throw LoadError("cifar10: '" + file.string() + "' truncated: record " + std::to_string(whole) +
                    " starting at byte offset " + std::to_string(whole * kRecordBytes) +
                    " has only " + std::to_string(bytes.size() - whole * kRecordBytes) + " of " +
                    std::to_string(kRecordBytes) + " bytes");
  }
  Dataset d;
  d.pixels.reserve(whole * kImageBytes);
  d.labels.reserve(whole);
  for (std::size_t r = 0; r < whole; ++r) {
    const std::size_t offset = r * kRecordBytes;
    const std::uint8_t label = bytes[offset];
    if (label >= kClasses) {
      throw LoadError("cifar10: '" + file.string() + "' record " + std::to_string(r) +
                      " at byte offset " + std::to_string(offset) + " has label " +
                      std::to_string(label) + " (expected 0-9)");
    }
    d.append({bytes.data() + offset + 1, kImageBytes}, label);
  }
  return d;
}

namespace {

const char* const kTrainFiles[] = {"data_batch_1.bin", "data_batch_2.bin", "data_batch_3.bin",
                                   "data_batch_4.bin", "data_batch_5.bin"};
const char* const kTestFile = "test_batch.bin";

bool has_all_files(const fs::path& dir) {
  for (const char* f : kTrainFiles)
    if (!fs::exists(dir / f)) return false;
  return fs::exists(dir / kTestFile);
}

void concat(Dataset& into, const Dataset& more) {
  into.pixels.insert(into.pixels.end(), more.pixels.begin(), more.pixels.end());
  into.labels.insert(into.labels.end(), more.labels.begin(), more.labels.end());
}

}  // namespace

std::optional<fs::path> find_cifar10(const fs::path& dir) {
  if (dir.empty()) return std::nullopt;
  for (const auto& candidate : {dir, dir / "cifar-10-batches-bin"}) {
    if (has_all_files(candidate)) return candidate;
  }
  return std::nullopt;
}

Cifar10 load_cifar10(const fs::path& dir) {
  fs::path root = dir;
  if (auto found = find_cifar10(dir)) root = *found;
  Cifar10 c;
  for (const char* f : kTrainFiles) {
    if (!fs::exists(root / f)) throw LoadError("cifar10: missing file '" + (root / f).string() + "'");
    concat(c.train, load_batch_file(root / f));
  }
  if (!fs::exists(root / kTestFile)) {
    throw LoadError("cifar10: missing file '" + (root / kTestFile).string() + "'");
  }
  c.test = load_batch_file(root / kTestFile);
  return c;
}

void write_batch_file(const fs::path& file, const Dataset& data) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cifar10: cannot write '" + file.string() + "'");
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.put(static_cast<char>(data.labels[i]));
    const auto img = data.image(i);
    out.write(reinterpret_cast<const char*>(img.data()), static_cast<std::streamsize>(img.size()));
  }
  if (!out) throw std::runtime_error("cifar10: write to '" + file.string() + "' failed");
}

std::array<std::size_t, kClasses> class_histogram(const Dataset& data) {
  std::array<std::size_t, kClasses> h{};
  for (auto l : data.labels) ++h.at(l);
  return h;
}

Dataset take(const Dataset& data, std::size_t n) {
  n = std::min(n, data.size());
  Dataset d;
  d.pixels.assign(data.pixels.begin(), data.pixels.begin() + static_cast<std::ptrdiff_t>(n * kImageBytes));
  d.labels.assign(data.labels.begin(), data.labels.begin() + static_cast<std::ptrdiff_t>(n));
  return d;
}

Dataset synthetic(std::size_t count, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, 20.0);
  struct Pattern {
    double fy, fx, phase;
    std::array<double, 3> colour;
  };
  std::array<Pattern, kClasses> patterns;
  for (std::size_t c = 0; c < kClasses; ++c) {
    const double angle = std::numbers::pi * static_cast<double>(c) / kClasses;
    const double freq = 1.0 + static_cast<double>(c % 3);
    patterns[c] = {freq * std::sin(angle), freq * std::cos(angle), 2 * std::numbers::pi * unit(rng),
                   {unit(rng) * 2 - 1, unit(rng) * 2 - 1, unit(rng) * 2 - 1}};
  }
  Dataset d;
  d.pixels.resize(count * kImageBytes);
  d.labels.resize(count);
  for (std::size_t i = 0; i < count; ++i) {
    const auto c = static_cast<std::uint8_t>(i % kClasses);
    d.labels[i] = c;
    const Pattern& p = patterns[c];
    std::uint8_t* img = d.pixels.data() + i * kImageBytes;
    for (std::size_t ch = 0; ch < 3; ++ch)
      for (std::size_t y = 0; y < kImageSide; ++y)
        for (std::size_t x = 0; x < kImageSide; ++x) {
          const double u = 2 * std::numbers::pi *
                           (p.fy * static_cast<double>(y) + p.fx * static_cast<double>(x)) /
                           kImageSide;
          const double v = 128 + 50 * std::sin(u + p.phase) + 40 * p.colour[ch] + noise(rng);
          img[(ch * kImageSide + y) * kImageSide + x] =
              static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
        }
  }
  return d;
}

Cifar10 synthetic_split(std::size_t train, std::size_t test, std::uint64_t seed) {
  const Dataset all = synthetic(train + test, seed);
  Cifar10 c;
  for (std::size_t i = 0; i < all.size(); ++i) {
    (i < train ? c.train : c.test).append(all.image(i), all.labels[i]);
  }
  return c;
}

void normalize_into(std::span<const std::uint8_t> image, float* out) {
  const std::size_t plane = kImageSide * kImageSide;
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < plane; ++i) {
      const float v = static_cast<float>(image[ch * plane + i]) / 255.0f;
      out[ch * plane + i] = (v - kMean[ch]) / kStd[ch];
    }
}

void augment_into(std::span<const std::uint8_t> image, float* out, std::mt19937_64& rng,
                  const AugmentParams& params) {
  const std::size_t n = kImageSide, pad = params.pad;
  std::size_t oy = 0, ox = 0;
  if (params.crop_origin) {
    std::tie(oy, ox) = *params.crop_origin;
    if (oy > 2 * pad || ox > 2 * pad) throw std::invalid_argument("augment: crop origin outside padding");
  } else {
    std::uniform_int_distribution<std::size_t> offset(0, 2 * pad);
    oy = offset(rng);
    ox = offset(rng);
  }
  bool flip = false;
  if (params.flip_probability > 0) {
    std::bernoulli_distribution coin(params.flip_probability);
    flip = coin(rng);
  }
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const float zero = -kMean[ch] / kStd[ch];
    for (std::size_t y = 0; y < n; ++y) {
      const long sy = static_cast<long>(y + oy) - static_cast<long>(pad);
      for (std::size_t x = 0; x < n; ++x) {
        const std::size_t dx = flip ? n - 1 - x : x;
        const long sx = static_cast<long>(dx + ox) - static_cast<long>(pad);
        float v = zero;
        if (sy >= 0 && sy < static_cast<long>(n) && sx >= 0 && sx < static_cast<long>(n)) {
          const float p = static_cast<float>(image[(ch * n + static_cast<std::size_t>(sy)) * n +
                                                   static_cast<std::size_t>(sx)]) /
                          255.0f;
          v = (p - kMean[ch]) / kStd[ch];
        }
        out[(ch * n + y) * n + x] = v;
      }
    }
  }
}

Tensor make_batch(const Dataset& data, std::span<const std::size_t> indices, bool augment,
                  std::mt19937_64* rng, const AugmentParams& params) {
  if (augment && rng == nullptr) throw std::invalid_argument("make_batch: augmentation needs an rng");
  Tensor batch({indices.size(), 3, kImageSide, kImageSide});
  for (std::size_t b = 0; b < indices.size(); ++b) {
    float* out = batch.data() + b * kImageBytes;
    if (augment) {
      augment_into(data.image(indices[b]), out, *rng, params);
    } else {
      normalize_into(data.image(indices[b]), out);
    }
  }
  return batch;
}

std::vector<std::uint8_t> batch_labels(const Dataset& data, std::span<const std::size_t> indices) {
  std::vector<std::uint8_t> out;
  out.reserve(indices.size());
  for (auto i : indices) out.push_back(data.labels.at(i));
  return out;
}

}  // namespace tpnet::data
