#include <bit>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "tpnet/transforms.hpp"

namespace {

using namespace tpnet;
using namespace tpnet::transforms;
using Vec = std::vector<double>;

constexpr double kTol = 1e-9;
const std::size_t kSizes[] = {2, 4, 8, 16, 32};

Vec random_vec(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> d;
  Vec v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

double max_diff(const Vec& a, const Vec& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

// X[k] = sum_n x[n] cos(pi / N (n + 1/2) k)
Vec naive_dct(const Vec& x) {
  const std::size_t n = x.size();
  Vec out(n);
  for (std::size_t k = 0; k < n; ++k) {
    long double s = 0;
    for (std::size_t i = 0; i < n; ++i) {
      s += x[i] * std::cos(std::numbers::pi_v<long double> / n * (i + 0.5L) * k);
    }
    out[k] = static_cast<double>(s);
  }
  return out;
}

// Entries (-1)^popcount(i & j) / sqrt(N).
Vec naive_ht(const Vec& x) {
  const std::size_t n = x.size();
  Vec out(n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0;
    for (std::size_t j = 0; j < n; ++j) s += (std::popcount(i & j) % 2 ? -1.0 : 1.0) * x[j];
    out[i] = s / std::sqrt(static_cast<double>(n));
  }
  return out;
}

std::map<std::string, Vec> load_constants() {
  std::ifstream in(std::string(TPNET_FIXTURE_DIR) + "/transform_constants.txt");
  if (!in) throw std::runtime_error("missing transform_constants.txt");
  std::map<std::string, Vec> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    std::string key;
    ls >> key;
    Vec values;
    for (double v; ls >> v;) values.push_back(v);
    out[key] = values;
  }
  return out;
}

TEST(Dct, MatchesCosineSum) {
  std::mt19937_64 rng(1);
  for (std::size_t n : {1, 2, 3, 4, 5, 7, 8, 12, 16, 32}) {
    const Vec x = random_vec(n, rng);
    EXPECT_LT(max_diff(dct1d<double>(x), naive_dct(x)), kTol) << n;
  }
}

TEST(Dct, RoundTrip) {
  std::mt19937_64 rng(2);
  for (std::size_t n : {1, 2, 3, 5, 8, 9, 16, 32}) {
    const Vec x = random_vec(n, rng);
    EXPECT_LT(max_diff(idct1d<double>(dct1d<double>(x)), x), kTol) << n;
  }
}

TEST(Dct, ConstantInputHasOnlyDc) {
  const Vec x(8, 1.5);
  const Vec X = dct1d<double>(x);
  EXPECT_NEAR(X[0], 12.0, kTol);
  for (std::size_t k = 1; k < 8; ++k) EXPECT_NEAR(X[k], 0.0, kTol);
}

TEST(Hadamard, MatchesSignFormula) {
  std::mt19937_64 rng(3);
  for (std::size_t n : kSizes) {
    const Vec x = random_vec(n, rng);
    EXPECT_LT(max_diff(ht1d<double>(x), naive_ht(x)), kTol) << n;
    const auto h = hadamard_matrix(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        ASSERT_EQ(h(i, j), std::popcount(i & j) % 2 ? -1.0 : 1.0);
  }
}

TEST(Hadamard, SelfInverseAndNormPreserving) {
  std::mt19937_64 rng(4);
  for (std::size_t n : kSizes) {
    const Vec x = random_vec(n, rng);
    const Vec X = ht1d<double>(x);
    EXPECT_LT(max_diff(ht1d<double>(X), x), kTol);
    double ex = 0, eX = 0;
    for (std::size_t i = 0; i < n; ++i) {
      ex += x[i] * x[i];
      eX += X[i] * X[i];
    }
    EXPECT_NEAR(ex, eX, 1e-9);
  }
}

TEST(Hadamard, RejectsNonPowerOfTwo) {
  EXPECT_THROW(ht1d<double>(Vec(6)), std::invalid_argument);
  EXPECT_THROW(bwt1d<double>(Vec(12), FilterBankSpec::bior13(8)), std::invalid_argument);
}

TEST(Bwt, RoundTripBothFilterBanks) {
  std::mt19937_64 rng(5);
  for (std::size_t n : kSizes) {
    for (const auto& spec : {FilterBankSpec::hadamard(n), FilterBankSpec::bior13(n)}) {
      const Vec x = random_vec(n, rng);
      EXPECT_LT(max_diff(ibwt1d<double>(bwt1d<double>(x, spec), spec), x), kTol) << n;
    }
  }
}

TEST(Bwt, MatchesProductOfStageMatrices) {
  std::mt19937_64 rng(6);
  for (std::size_t n : kSizes) {
    const auto spec = FilterBankSpec::bior13(n);
    const Vec x = random_vec(n, rng);
    const Eigen::VectorXd ex = bwt_matrix(n, spec) * Eigen::Map<const Eigen::VectorXd>(x.data(), n);
    EXPECT_LT(max_diff(bwt1d<double>(x, spec), Vec(ex.data(), ex.data() + n)), kTol) << n;
  }
}

TEST(Bwt, FirstStageFollowsAnalysisFilters) {
  // One stage of the bior1.3 bank on an 8-sample ramp, written out by hand
  // with periodic extension.
  FilterBankSpec spec = FilterBankSpec::bior13(8);
  spec.stages = 1;
  const Vec x{0, 1, 2, 3, 4, 5, 6, 7};
  const Vec y = bwt1d<double>(x, spec);
  const auto at = [&](long i) { return x[static_cast<std::size_t>(((i % 8) + 8) % 8)]; };
  for (long i = 0; i < 4; ++i) {
    const double low = -0.125 * at(2 * i + 3) + 0.125 * at(2 * i + 2) + at(2 * i + 1) + at(2 * i) +
                       0.125 * at(2 * i - 1) - 0.125 * at(2 * i - 2);
    const double high = -at(2 * i + 1) + at(2 * i);
    EXPECT_NEAR(y[static_cast<std::size_t>(i)], low, kTol);
    EXPECT_NEAR(y[static_cast<std::size_t>(4 + i)], high, kTol);
  }
}

TEST(Bwt, SynthesisTapsMatchFixture) {
  const auto c = load_constants();
  auto expect_taps = [&](const std::string& name, const FilterBankSpec& spec) {
    const auto s = derive_synthesis(spec.h, spec.g);
    EXPECT_EQ(s.first, static_cast<int>(c.at(name + ".first")[0]));
    const std::pair<const char*, const Vec*> taps[] = {{".low_even", &s.low_even},
                                                       {".high_even", &s.high_even},
                                                       {".low_odd", &s.low_odd},
                                                       {".high_odd", &s.high_odd}};
    for (const auto& [suffix, got] : taps) {
      const Vec& want = c.at(name + suffix);
      ASSERT_EQ(got->size(), want.size()) << name << suffix;
      EXPECT_LT(max_diff(*got, want), kTol) << name << suffix;
    }
  };
  expect_taps("haar", FilterBankSpec::hadamard(8));
  expect_taps("bior13", FilterBankSpec::bior13(8));
}

TEST(Transform2d, MatchesMatrixProductForAllKinds) {
  std::mt19937_64 rng(7);
  std::normal_distribution<double> d;
  for (TransformKind kind : {TransformKind::DCT, TransformKind::HT, TransformKind::BWT}) {
    for (std::size_t n : kSizes) {
      TensorD x({2, n, n});
      for (auto& v : x.values()) v = d(rng);
      const TensorD y = transform2d(x, kind, false);
      // Separable reference built from the 1D oracles above.
      TensorD ref = x;
      for (std::size_t c = 0; c < 2; ++c) {
        for (std::size_t r = 0; r < n; ++r) {
          Vec row(ref.data() + (c * n + r) * n, ref.data() + (c * n + r + 1) * n);
          Vec t = kind == TransformKind::DCT ? naive_dct(row)
                  : kind == TransformKind::HT
                      ? naive_ht(row)
                      : bwt1d<double>(row, FilterBankSpec::bior13(n));
          std::copy(t.begin(), t.end(), ref.data() + (c * n + r) * n);
        }
        for (std::size_t col = 0; col < n; ++col) {
          Vec column(n);
          for (std::size_t r = 0; r < n; ++r) column[r] = ref.at(c, r, col);
          Vec t = kind == TransformKind::DCT ? naive_dct(column)
                  : kind == TransformKind::HT
                      ? naive_ht(column)
                      : bwt1d<double>(column, FilterBankSpec::bior13(n));
          for (std::size_t r = 0; r < n; ++r) ref.at(c, r, col) = t[r];
        }
      }
      EXPECT_LT(max_diff(y.storage(), ref.storage()), 1e-8) << to_string(kind) << " " << n;
      EXPECT_LT(max_diff(y.storage(), matrix_oracle2d(x, kind, false).storage()), kTol);
      EXPECT_LT(max_diff(transform2d(y, kind, true).storage(), x.storage()), kTol);
    }
  }
}

TEST(Transform2d, RectangularAndBatchedInputs) {
  std::mt19937_64 rng(8);
  std::normal_distribution<double> d;
  TensorD x({3, 4, 8});
  for (auto& v : x.values()) v = d(rng);
  for (TransformKind kind : {TransformKind::DCT, TransformKind::HT, TransformKind::BWT}) {
    const TensorD y = transform2d(x, kind, false);
    EXPECT_LT(max_diff(y.storage(), matrix_oracle2d(x, kind, false).storage()), kTol);
    EXPECT_LT(max_diff(transform2d(y, kind, true).storage(), x.storage()), kTol);
  }
}

TEST(Padding, PadsToPowersOfTwoAndTruncatesBack) {
  TensorD x({1, 2, 6, 5}, 1.0);
  const TensorD p = pad_pow2(x);
  EXPECT_EQ(p.shape(), (Shape{1, 2, 8, 8}));
  double sum = 0;
  for (double v : p.values()) sum += v;
  EXPECT_EQ(sum, 60.0);
  EXPECT_EQ(truncate(p, 6, 5).storage(), x.storage());
}

TEST(IdctTruncate, KeepsLowQuarter) {
  // Coefficients of a half-size image placed in the low quarter invert to
  // that image.
  std::mt19937_64 rng(9);
  std::normal_distribution<double> d;
  TensorD small({1, 4, 4});
  for (auto& v : small.values()) v = d(rng);
  const TensorD S = transform2d(small, TransformKind::DCT, false);
  TensorD big({1, 8, 8});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) big.at(0, i, j) = S.at(0, i, j);
  const TensorD back = idct2_truncate(big);
  ASSERT_EQ(back.shape(), (Shape{1, 4, 4}));
  EXPECT_LT(max_diff(back.storage(), small.storage()), kTol);
}

TEST(Kinds, ParseAndPrint) {
  for (TransformKind k : {TransformKind::DCT, TransformKind::HT, TransformKind::BWT}) {
    EXPECT_EQ(parse_transform_kind(to_string(k)), k);
  }
  EXPECT_THROW(parse_transform_kind("fft"), std::invalid_argument);
}

}  // namespace
