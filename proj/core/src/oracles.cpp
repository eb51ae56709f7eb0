#include <stdexcept>

#include "tpnet/transforms.hpp"

namespace tpnet::transforms {

template <std::floating_point T>
std::vector<T> symmetric_extend_kernel(std::span<const T> a) {
  if (a.empty()) throw std::invalid_argument("symmetric_extend_kernel: empty kernel");
  const long long n = static_cast<long long>(a.size());
  std::vector<T> ext(2 * a.size() - 1);
  for (long long k = 0; k < 2 * n - 1; ++k) ext[k] = a[std::llabs(n - 1 - k)];
  return ext;
}

template <std::floating_point T>
std::vector<T> symmetric_convolve_oracle(std::span<const T> a, std::span<const T> x) {
  if (a.size() != x.size()) {
    throw std::invalid_argument("symmetric_convolve_oracle: lengths " + std::to_string(a.size()) +
                                " and " + std::to_string(x.size()) + " differ");
  }
  const long long n = static_cast<long long>(x.size());
  const auto kernel = symmetric_extend_kernel(a);
  // Half-sample symmetric extension: x[-1] = x[0], x[N] = x[N-1], ...
  auto extended = [&](long long i) {
    const long long period = 2 * n;
    i = ((i % period) + period) % period;
    return i < n ? x[i] : x[period - 1 - i];
  };
  std::vector<T> y(x.size(), T{});
  for (long long out = 0; out < n; ++out) {
    T acc{};
    for (long long m = 0; m < 2 * n - 1; ++m) acc += kernel[m] * extended(out - (m - (n - 1)));
    y[out] = acc;
  }
  return y;
}

template <std::floating_point T>
std::vector<T> dyadic_convolve_oracle(std::span<const T> a, std::span<const T> x) {
  if (a.size() != x.size()) {
    throw std::invalid_argument("dyadic_convolve_oracle: length mismatch");
  }
  if (!is_power_of_two(x.size())) {
    throw std::invalid_argument("dyadic_convolve_oracle: length " + std::to_string(x.size()) +
                                " is not a power of 2");
  }
  std::vector<T> y(x.size(), T{});
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t m = 0; m < a.size(); ++m) y[i] += a[m] * x[i ^ m];
  return y;
}

template std::vector<float> symmetric_extend_kernel(std::span<const float>);
template std::vector<double> symmetric_extend_kernel(std::span<const double>);
template std::vector<float> symmetric_convolve_oracle(std::span<const float>,
                                                      std::span<const float>);
template std::vector<double> symmetric_convolve_oracle(std::span<const double>,
                                                       std::span<const double>);
template std::vector<float> dyadic_convolve_oracle(std::span<const float>, std::span<const float>);
template std::vector<double> dyadic_convolve_oracle(std::span<const double>,
                                                    std::span<const double>);

}  // namespace tpnet::transforms
