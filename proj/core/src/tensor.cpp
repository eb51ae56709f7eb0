#include "tpnet/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tpnet {

std::size_t shape_size(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_to_string(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill)
    : shape_(std::move(shape)), data_(shape_size(shape_), fill) {}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : shape_(std::move(shape)), data_(std::move(values)) {
  if (data_.size() != shape_size(shape_)) {
    throw std::invalid_argument("tensor: " + std::to_string(data_.size()) +
                                " values do not fit shape " + shape_to_string(shape_));
  }
}

template <typename T>
void BasicTensor<T>::fill(T value) {
  std::fill(data_.begin(), data_.end(), value);
}

template <typename T>
void BasicTensor<T>::reshape(Shape shape) {
  if (shape_size(shape) != data_.size()) {
    throw std::invalid_argument("tensor: cannot reshape " + shape_to_string(shape_) + " to " +
                                shape_to_string(shape));
  }
  shape_ = std::move(shape);
}

template <typename T>
bool BasicTensor<T>::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](T v) { return std::isfinite(v); });
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator+=(const BasicTensor& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("tensor +=: shape " + shape_to_string(shape_) + " vs " +
                                shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] += other.data_[i];
  return *this;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator-=(const BasicTensor& other) {
  if (other.shape_ != shape_) {
    throw std::invalid_argument("tensor -=: shape " + shape_to_string(shape_) + " vs " +
                                shape_to_string(other.shape_));
  }
  for (std::size_t i = 0; i < data_.size(); ++i) data_[i] -= other.data_[i];
  return *this;
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::operator*=(T scalar) {
  for (auto& v : data_) v *= scalar;
  return *this;
}

template <typename T>
T max_abs_diff(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw std::invalid_argument("max_abs_diff: shape " + shape_to_string(a.shape()) + " vs " +
                                shape_to_string(b.shape()));
  }
  T m{};
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

template <typename T>
T sum_of_squares(const BasicTensor<T>& a) {
  T s{};
  for (T v : a.values()) s += v * v;
  return s;
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template float max_abs_diff(const BasicTensor<float>&, const BasicTensor<float>&);
template double max_abs_diff(const BasicTensor<double>&, const BasicTensor<double>&);
template float sum_of_squares(const BasicTensor<float>&);
template double sum_of_squares(const BasicTensor<double>&);

}  // namespace tpnet
