#include <cmath>
#include <numbers>
#include <stdexcept>

#include "tpnet/transforms.hpp"

namespace tpnet::transforms {

std::string_view to_string(TransformKind kind) {
  switch (kind) {
    case TransformKind::DCT: return "dct";
    case TransformKind::HT: return "ht";
    case TransformKind::BWT: return "bwt";
  }
  return "?";
}

TransformKind parse_transform_kind(std::string_view name) {
  if (name == "dct" || name == "DCT") return TransformKind::DCT;
  if (name == "ht" || name == "HT") return TransformKind::HT;
  if (name == "bwt" || name == "BWT") return TransformKind::BWT;
  throw std::invalid_argument("unknown transform kind '" + std::string(name) + "'");
}

bool is_power_of_two(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

std::size_t next_power_of_two(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

int log2_exact(std::size_t n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("length " + std::to_string(n) + " is not a power of 2");
  }
  int m = 0;
  while ((std::size_t{1} << m) < n) ++m;
  return m;
}

template <std::floating_point T>
std::vector<T> dct1d(std::span<const T> x) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("dct1d: empty input");
  std::vector<T> out(n, T{});
  const double w = std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      acc += static_cast<double>(x[i]) * std::cos(w * (static_cast<double>(i) + 0.5) * k);
    }
    out[k] = static_cast<T>(acc);
  }
  return out;
}

template <std::floating_point T>
std::vector<T> idct1d(std::span<const T> x) {
  const std::size_t n = x.size();
  if (n == 0) throw std::invalid_argument("idct1d: empty input");
  std::vector<T> out(n, T{});
  const double w = std::numbers::pi / static_cast<double>(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    double acc = inv_n * static_cast<double>(x[0]);
    for (std::size_t k = 1; k < n; ++k) {
      acc += 2.0 * inv_n * static_cast<double>(x[k]) *
             std::cos(w * (static_cast<double>(i) + 0.5) * k);
    }
    out[i] = static_cast<T>(acc);
  }
  return out;
}

Matrix<double> dct_matrix(std::size_t n) {
  Matrix<double> m(n, n);
  const double w = std::numbers::pi / static_cast<double>(n);
  for (std::size_t k = 0; k < n; ++k)
    for (std::size_t i = 0; i < n; ++i) m(k, i) = std::cos(w * (i + 0.5) * k);
  return m;
}

Matrix<double> idct_matrix(std::size_t n) {
  Matrix<double> m(n, n);
  const double w = std::numbers::pi / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < n; ++k)
      m(i, k) = (k == 0 ? 1.0 : 2.0) / static_cast<double>(n) * std::cos(w * (i + 0.5) * k);
  return m;
}

template std::vector<float> dct1d(std::span<const float>);
template std::vector<double> dct1d(std::span<const double>);
template std::vector<float> idct1d(std::span<const float>);
template std::vector<double> idct1d(std::span<const double>);

}  // namespace tpnet::transforms
