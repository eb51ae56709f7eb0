#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numeric>
#include <string>

#include <gtest/gtest.h>

#include "support.hpp"
#include "tpnet/cifar10.hpp"

namespace {

using namespace tpnet;
using namespace tpnet::data;
namespace fs = std::filesystem;

// Writes a miniature CIFAR-10 tree: five training files and one test file.
void write_tree(const fs::path& dir, std::size_t per_file) {
  for (int i = 1; i <= 5; ++i) {
    write_batch_file(dir / ("data_batch_" + std::to_string(i) + ".bin"),
                     synthetic(per_file, static_cast<std::uint64_t>(i)));
  }
  write_batch_file(dir / "test_batch.bin", synthetic(per_file, 9));
}

std::string load_error(const fs::path& p) {
  try {
    load_batch_file(p);
  } catch (const LoadError& e) {
    return e.what();
  }
  return "";
}

TEST(Cifar10, LoadsWrittenTree) {
  support::TempDir tmp;
  write_tree(tmp.path(), 20);
  const Cifar10 c = load_cifar10(tmp.path());
  EXPECT_EQ(c.train.size(), 100u);
  EXPECT_EQ(c.test.size(), 20u);
  EXPECT_EQ(c.train.pixels.size(), 100 * kImageBytes);
  const auto hist = class_histogram(c.train);
  for (auto h : hist) EXPECT_EQ(h, 10u);
  EXPECT_LE(c.train.labels[0], 9);
  const Dataset first = synthetic(20, 1);
  EXPECT_TRUE(std::equal(first.pixels.begin(), first.pixels.end(), c.train.pixels.begin()));
}

TEST(Cifar10, FindsNestedDirectory) {
  support::TempDir tmp;
  fs::create_directories(tmp.path() / "cifar-10-batches-bin");
  write_tree(tmp.path() / "cifar-10-batches-bin", 2);
  EXPECT_EQ(find_cifar10(tmp.path()), tmp.path() / "cifar-10-batches-bin");
  EXPECT_EQ(load_cifar10(tmp.path()).train.size(), 10u);
  EXPECT_FALSE(find_cifar10(tmp.path() / "nothing").has_value());
}

TEST(Cifar10, RecordLayout) {
  support::TempDir tmp;
  Dataset d;
  std::vector<std::uint8_t> img(kImageBytes);
  std::iota(img.begin(), img.end(), 0);
  d.append(img, 7);
  write_batch_file(tmp.path() / "one.bin", d);
  std::ifstream in(tmp.path() / "one.bin", std::ios::binary);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), {});
  ASSERT_EQ(bytes.size(), kRecordBytes);
  EXPECT_EQ(bytes[0], 7);
  EXPECT_EQ(static_cast<std::uint8_t>(bytes[1 + 1024]), static_cast<std::uint8_t>(1024 % 256));
}

TEST(Cifar10, MissingFileNamed) {
  support::TempDir tmp;
  write_tree(tmp.path(), 2);
  fs::remove(tmp.path() / "data_batch_3.bin");
  try {
    load_cifar10(tmp.path());
    FAIL() << "expected LoadError";
  } catch (const LoadError& e) {
    EXPECT_NE(std::string(e.what()).find("data_batch_3.bin"), std::string::npos);
  }
}

TEST(Cifar10, TruncatedFileNamesFileAndOffset) {
  support::TempDir tmp;
  const fs::path f = tmp.path() / "data_batch_1.bin";
  write_batch_file(f, synthetic(3, 0));
  fs::resize_file(f, 2 * kRecordBytes + 100);
  const std::string msg = load_error(f);
  EXPECT_NE(msg.find("data_batch_1.bin"), std::string::npos) << msg;
  EXPECT_NE(msg.find(std::to_string(2 * kRecordBytes)), std::string::npos) << msg;
}

TEST(Cifar10, BadLabelRejected) {
  support::TempDir tmp;
  const fs::path f = tmp.path() / "test_batch.bin";
  write_batch_file(f, synthetic(2, 0));
  {
    std::fstream io(f, std::ios::binary | std::ios::in | std::ios::out);
    io.seekp(static_cast<std::streamoff>(kRecordBytes));
    io.put(static_cast<char>(12));
  }
  const std::string msg = load_error(f);
  EXPECT_NE(msg.find("label"), std::string::npos) << msg;
  EXPECT_NE(msg.find(std::to_string(kRecordBytes)), std::string::npos) << msg;
}

TEST(Augment, FixedCenterCropWithoutFlipIsNormalizationOnly) {
  const Dataset d = synthetic(4, 3);
  AugmentParams p;
  p.flip_probability = 0.0;
  p.crop_origin = std::pair<std::size_t, std::size_t>{4, 4};
  std::mt19937_64 rng(0);
  std::vector<float> a(kImageBytes), b(kImageBytes);
  for (std::size_t i = 0; i < d.size(); ++i) {
    augment_into(d.image(i), a.data(), rng, p);
    normalize_into(d.image(i), b.data());
    EXPECT_EQ(a, b);
  }
}

TEST(Augment, NormalizationConstants) {
  std::vector<std::uint8_t> img(kImageBytes);
  for (std::size_t c = 0; c < 3; ++c)
    std::fill_n(img.begin() + static_cast<long>(c * 1024), 1024, static_cast<std::uint8_t>(255));
  std::vector<float> out(kImageBytes);
  normalize_into(img, out.data());
  for (std::size_t c = 0; c < 3; ++c) {
    EXPECT_NEAR(out[c * 1024], (1.0f - kMean[c]) / kStd[c], 1e-5);
  }
  EXPECT_FLOAT_EQ(kStd[2], 0.2010f);
}

TEST(Augment, ShiftAndFlipMoveContent) {
  const Dataset d = synthetic(1, 4);
  std::vector<float> base(kImageBytes), shifted(kImageBytes), flipped(kImageBytes);
  normalize_into(d.image(0), base.data());
  std::mt19937_64 rng(0);
  AugmentParams p;
  p.flip_probability = 0.0;
  p.crop_origin = std::pair<std::size_t, std::size_t>{0, 0};  // shifts content down-right by 4
  augment_into(d.image(0), shifted.data(), rng, p);
  const float pad = -kMean[0] / kStd[0];
  EXPECT_FLOAT_EQ(shifted[0], pad);
  EXPECT_FLOAT_EQ(shifted[4 * 32 + 4], base[0]);
  p.flip_probability = 1.0;
  p.crop_origin = std::pair<std::size_t, std::size_t>{4, 4};
  augment_into(d.image(0), flipped.data(), rng, p);
  for (std::size_t x = 0; x < 32; ++x) EXPECT_FLOAT_EQ(flipped[5 * 32 + x], base[5 * 32 + 31 - x]);
}

TEST(Augment, RandomCropsStayInRangeAndBatchShape) {
  const Dataset d = synthetic(16, 5);
  std::mt19937_64 rng(1);
  std::vector<std::size_t> idx(16);
  std::iota(idx.begin(), idx.end(), 0);
  const Tensor x = make_batch(d, idx, true, &rng);
  EXPECT_EQ(x.shape(), (Shape{16, 3, 32, 32}));
  float lo = 1e9f, hi = -1e9f;
  for (float v : x.values()) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GE(lo, -kMean[0] / kStd[0] - 0.1f);
  EXPECT_LE(hi, (1.0f - kMean[2]) / kStd[2] + 0.1f);
  EXPECT_EQ(batch_labels(d, idx)[3], d.labels[3]);
}

TEST(Augment, SameSeedSameBatch) {
  const Dataset d = synthetic(8, 6);
  std::vector<std::size_t> idx{0, 3, 5, 7};
  std::mt19937_64 r1(42), r2(42);
  EXPECT_EQ(make_batch(d, idx, true, &r1).storage(), make_batch(d, idx, true, &r2).storage());
}

TEST(Augment, NormalizedCifarMeansNearZero) {
  const char* dir = std::getenv("TPNET_CIFAR10_DIR");
  const auto found = dir ? find_cifar10(dir) : std::nullopt;
  if (!found) GTEST_SKIP() << "CIFAR-10 not available (set TPNET_CIFAR10_DIR)";
  const Dataset train = take(load_batch_file(*found / "data_batch_1.bin"), 1000);
  std::mt19937_64 rng(0);
  std::vector<float> buf(kImageBytes);
  double sums[3] = {0, 0, 0};
  for (std::size_t i = 0; i < train.size(); ++i) {
    AugmentParams p;
    p.crop_origin = std::pair<std::size_t, std::size_t>{4, 4};
    augment_into(train.image(i), buf.data(), rng, p);
    for (std::size_t c = 0; c < 3; ++c)
      for (std::size_t j = 0; j < 1024; ++j) sums[c] += buf[c * 1024 + j];
  }
  for (double s : sums) EXPECT_LE(std::abs(s / (1024.0 * train.size())), 0.02);
}

TEST(Synthetic, SplitSharesClassPatterns) {
  const Cifar10 c = synthetic_split(50, 20, 3);
  EXPECT_EQ(c.train.size(), 50u);
  EXPECT_EQ(c.test.size(), 20u);
  const Dataset all = synthetic(70, 3);
  EXPECT_TRUE(std::equal(c.test.pixels.begin(), c.test.pixels.end(),
                         all.pixels.begin() + 50 * static_cast<long>(kImageBytes)));
}

}  // namespace
