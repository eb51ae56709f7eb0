#include <cmath>
#include <stdexcept>

#include "tpnet/transforms.hpp"

namespace tpnet::transforms {

template <std::floating_point T>
std::vector<T> ht1d(std::span<const T> x) {
  const std::size_t n = x.size();
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("ht1d: length " + std::to_string(n) + " is not a power of 2");
  }
  std::vector<T> out(x.begin(), x.end());
  // log2(n) butterfly stages, additions only.
  for (std::size_t half = 1; half < n; half <<= 1) {
    for (std::size_t start = 0; start < n; start += 2 * half) {
      for (std::size_t j = start; j < start + half; ++j) {
        const T a = out[j];
        const T b = out[j + half];
        out[j] = a + b;
        out[j + half] = a - b;
      }
    }
  }
  const T scale = static_cast<T>(1.0 / std::sqrt(static_cast<double>(n)));
  for (auto& v : out) v *= scale;
  return out;
}

Matrix<double> hadamard_matrix(std::size_t n) {
  log2_exact(n);
  Matrix<double> h(1, 1);
  h(0, 0) = 1.0;
  while (static_cast<std::size_t>(h.rows()) < n) {
    const auto m = h.rows();
    Matrix<double> next(2 * m, 2 * m);
    next.topLeftCorner(m, m) = h;
    next.topRightCorner(m, m) = h;
    next.bottomLeftCorner(m, m) = h;
    next.bottomRightCorner(m, m) = -h;
    h = std::move(next);
  }
  return h;
}

template std::vector<float> ht1d(std::span<const float>);
template std::vector<double> ht1d(std::span<const double>);

}  // namespace tpnet::transforms
