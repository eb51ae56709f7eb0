#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "tpnet/transforms.hpp"

namespace tpnet::transforms {

namespace {

// Index of the tap pair that straddles the current sample pair.
int centre_offset(const std::vector<double>& f) { return (static_cast<int>(f.size()) - 2) / 2; }

std::size_t wrap(long long i, std::size_t n) {
  const long long m = static_cast<long long>(n);
  return static_cast<std::size_t>(((i % m) + m) % m);
}

void check_spec(const FilterBankSpec& spec, std::size_t n) {
  if (!is_power_of_two(n)) {
    throw std::invalid_argument("filter bank: length " + std::to_string(n) +
                                " is not a power of 2");
  }
  if (spec.h.size() < 2 || spec.g.size() < 2 || spec.h.size() % 2 || spec.g.size() % 2) {
    throw std::invalid_argument("filter bank: filters must have even length >= 2");
  }
  if (spec.stages < 0 || (std::size_t{1} << spec.stages) > n) {
    throw std::invalid_argument("filter bank: " + std::to_string(spec.stages) +
                                " stages do not fit length " + std::to_string(n));
  }
}

// branch[i] = sum_k f[k] * x[2i + 1 + c - k] (periodic), c the centre offset.
template <typename T>
void analyse(const T* x, std::size_t len, const std::vector<double>& f, T* out) {
  const int c = centre_offset(f);
  for (std::size_t i = 0; i < len / 2; ++i) {
    double acc = 0.0;
    for (std::size_t k = 0; k < f.size(); ++k) {
      const long long idx = static_cast<long long>(2 * i + 1 + c) - static_cast<long long>(k);
      acc += f[k] * static_cast<double>(x[wrap(idx, len)]);
    }
    out[i] = static_cast<T>(acc);
  }
}

template <typename T>
void synthesise(const T* low, const T* high, std::size_t half, const SynthesisFilters& s,
                T* out) {
  for (std::size_t i = 0; i < half; ++i) {
    double even = 0.0, odd = 0.0;
    for (std::size_t j = 0; j < s.low_even.size(); ++j) {
      const std::size_t idx = wrap(static_cast<long long>(i) + s.first + static_cast<long long>(j),
                                   half);
      even += s.low_even[j] * low[idx] + s.high_even[j] * high[idx];
      odd += s.low_odd[j] * low[idx] + s.high_odd[j] * high[idx];
    }
    out[2 * i] = static_cast<T>(even);
    out[2 * i + 1] = static_cast<T>(odd);
  }
}

}  // namespace

FilterBankSpec FilterBankSpec::hadamard(std::size_t n) {
  return {{1.0, 1.0}, {-1.0, 1.0}, log2_exact(n)};
}

FilterBankSpec FilterBankSpec::bior13(std::size_t n) {
  return {{-0.125, 0.125, 1.0, 1.0, 0.125, -0.125}, {-1.0, 1.0}, log2_exact(n)};
}

Matrix<double> analysis_stage_matrix(const std::vector<double>& h, const std::vector<double>& g,
                                     std::size_t length) {
  if (length < 2 || length % 2) {
    throw std::invalid_argument("analysis stage: length must be even");
  }
  const std::size_t half = length / 2;
  Matrix<double> m = Matrix<double>::Zero(length, length);
  auto fill = [&](const std::vector<double>& f, std::size_t row0) {
    const int c = centre_offset(f);
    for (std::size_t i = 0; i < half; ++i)
      for (std::size_t k = 0; k < f.size(); ++k) {
        const long long idx = static_cast<long long>(2 * i + 1 + c) - static_cast<long long>(k);
        m(row0 + i, wrap(idx, length)) += f[k];
      }
  };
  fill(h, 0);
  fill(g, half);
  return m;
}

SynthesisFilters derive_synthesis(const std::vector<double>& h, const std::vector<double>& g) {
  // Large enough that the taps do not wrap.
  const std::size_t length = 16 * next_power_of_two(std::max(h.size(), g.size()));
  const std::size_t half = length / 2;
  const Matrix<double> analysis = analysis_stage_matrix(h, g, length);
  Eigen::FullPivLU<Matrix<double>> lu(analysis);
  if (!lu.isInvertible()) {
    throw std::invalid_argument("derive_synthesis: analysis stage is singular");
  }
  const Matrix<double> inv = lu.inverse();

  const long long centre = static_cast<long long>(half / 2);
  const long long reach = static_cast<long long>(half / 2) - 1;
  constexpr double kZero = 1e-12;
  long long lo = reach, hi = -reach;
  for (long long j = -reach; j <= reach; ++j) {
    for (int r = 0; r < 2; ++r) {
      const auto row = static_cast<Eigen::Index>(2 * centre + r);
      if (std::abs(inv(row, centre + j)) > kZero ||
          std::abs(inv(row, static_cast<long long>(half) + centre + j)) > kZero) {
        lo = std::min(lo, j);
        hi = std::max(hi, j);
      }
    }
  }
  SynthesisFilters s;
  s.first = static_cast<int>(lo);
  for (long long j = lo; j <= hi; ++j) {
    const auto col_low = static_cast<Eigen::Index>(centre + j);
    const auto col_high = static_cast<Eigen::Index>(static_cast<long long>(half) + centre + j);
    auto clean = [](double v) { return std::abs(v) > kZero ? v : 0.0; };
    s.low_even.push_back(clean(inv(2 * centre, col_low)));
    s.high_even.push_back(clean(inv(2 * centre, col_high)));
    s.low_odd.push_back(clean(inv(2 * centre + 1, col_low)));
    s.high_odd.push_back(clean(inv(2 * centre + 1, col_high)));
  }
  return s;
}

template <std::floating_point T>
std::vector<T> bwt1d(std::span<const T> x, const FilterBankSpec& spec) {
  const std::size_t n = x.size();
  check_spec(spec, n);
  std::vector<T> cur(x.begin(), x.end());
  std::vector<T> next(n);
  for (int stage = 0; stage < spec.stages; ++stage) {
    const std::size_t len = n >> stage;
    for (std::size_t start = 0; start < n; start += len) {
      analyse(cur.data() + start, len, spec.h, next.data() + start);
      analyse(cur.data() + start, len, spec.g, next.data() + start + len / 2);
    }
    cur.swap(next);
  }
  return cur;
}

template <std::floating_point T>
std::vector<T> ibwt1d(std::span<const T> x, const FilterBankSpec& spec) {
  const std::size_t n = x.size();
  check_spec(spec, n);
  const SynthesisFilters s = derive_synthesis(spec.h, spec.g);
  std::vector<T> cur(x.begin(), x.end());
  std::vector<T> next(n);
  for (int stage = spec.stages - 1; stage >= 0; --stage) {
    const std::size_t len = n >> stage;
    for (std::size_t start = 0; start < n; start += len) {
      synthesise(cur.data() + start, cur.data() + start + len / 2, len / 2, s,
                 next.data() + start);
    }
    cur.swap(next);
  }
  return cur;
}

Matrix<double> bwt_matrix(std::size_t n, const FilterBankSpec& spec) {
  check_spec(spec, n);
  Matrix<double> total = Matrix<double>::Identity(n, n);
  for (int stage = 0; stage < spec.stages; ++stage) {
    const std::size_t len = n >> stage;
    const Matrix<double> block = analysis_stage_matrix(spec.h, spec.g, len);
    Matrix<double> stage_m = Matrix<double>::Zero(n, n);
    for (std::size_t start = 0; start < n; start += len) {
      stage_m.block(start, start, len, len) = block;
    }
    total = stage_m * total;
  }
  return total;
}

template std::vector<float> bwt1d(std::span<const float>, const FilterBankSpec&);
template std::vector<double> bwt1d(std::span<const double>, const FilterBankSpec&);
template std::vector<float> ibwt1d(std::span<const float>, const FilterBankSpec&);
template std::vector<double> ibwt1d(std::span<const double>, const FilterBankSpec&);

}  // namespace tpnet::transforms
