#include <cmath>
#include <functional>
#include <stdexcept>

#include "tpnet/transforms.hpp"

namespace tpnet::transforms {

namespace {

template <typename T>
using Line = std::function<std::vector<T>(std::span<const T>)>;

template <std::floating_point T>
Line<T> line_transform(TransformKind kind, std::size_t n, bool inverse) {
  switch (kind) {
    case TransformKind::DCT:
      if (inverse) return [](std::span<const T> v) { return idct1d<T>(v); };
      return [](std::span<const T> v) { return dct1d<T>(v); };
    case TransformKind::HT:
      return [](std::span<const T> v) { return ht1d<T>(v); };
    case TransformKind::BWT: {
      const auto spec = FilterBankSpec::bior13(n);
      if (inverse) return [spec](std::span<const T> v) { return ibwt1d<T>(v, spec); };
      return [spec](std::span<const T> v) { return bwt1d<T>(v, spec); };
    }
  }
  throw std::invalid_argument("unknown transform kind");
}

void check_rank3(const Shape& s, TransformKind kind, const char* what) {
  if (s.size() != 3) {
    throw std::invalid_argument(std::string(what) + ": expected [C, H, W], got " +
                                shape_to_string(s));
  }
  if (kind != TransformKind::DCT && (!is_power_of_two(s[1]) || !is_power_of_two(s[2]))) {
    throw std::invalid_argument(std::string(what) + ": " + std::string(to_string(kind)) +
                                " needs power-of-2 spatial dims, got " + shape_to_string(s) +
                                " (pad first)");
  }
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> transform2d(const BasicTensor<T>& x, TransformKind kind, bool inverse) {
  check_rank3(x.shape(), kind, "transform2d");
  const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  BasicTensor<T> out = x;
  const auto along_width = line_transform<T>(kind, width, inverse);
  const auto along_height = line_transform<T>(kind, height, inverse);
  std::vector<T> column(height);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < height; ++r) {
      T* row = &out.at(c, r, 0);
      const auto res = along_width(std::span<const T>(row, width));
      std::copy(res.begin(), res.end(), row);
    }
    for (std::size_t col = 0; col < width; ++col) {
      for (std::size_t r = 0; r < height; ++r) column[r] = out.at(c, r, col);
      const auto res = along_height(std::span<const T>(column));
      for (std::size_t r = 0; r < height; ++r) out.at(c, r, col) = res[r];
    }
  }
  return out;
}

Matrix<double> transform_matrix(TransformKind kind, std::size_t n, bool inverse) {
  switch (kind) {
    case TransformKind::DCT:
      return inverse ? idct_matrix(n) : dct_matrix(n);
    case TransformKind::HT:
      return hadamard_matrix(n) / std::sqrt(static_cast<double>(n));
    case TransformKind::BWT: {
      const Matrix<double> forward = bwt_matrix(n, FilterBankSpec::bior13(n));
      if (!inverse) return forward;
      return Eigen::FullPivLU<Matrix<double>>(forward).inverse();
    }
  }
  throw std::invalid_argument("unknown transform kind");
}

template <std::floating_point T>
BasicTensor<T> matrix_oracle2d(const BasicTensor<T>& x, TransformKind kind, bool inverse) {
  check_rank3(x.shape(), kind, "matrix_oracle2d");
  const std::size_t channels = x.dim(0), height = x.dim(1), width = x.dim(2);
  const Matrix<double> mh = transform_matrix(kind, height, inverse);
  const Matrix<double> mw = transform_matrix(kind, width, inverse);
  BasicTensor<T> out(x.shape());
  Matrix<double> plane(height, width);
  for (std::size_t c = 0; c < channels; ++c) {
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t col = 0; col < width; ++col) plane(r, col) = x.at(c, r, col);
    const Matrix<double> res = mh * plane * mw.transpose();
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t col = 0; col < width; ++col)
        out.at(c, r, col) = static_cast<T>(res(r, col));
  }
  return out;
}

template <typename T>
BasicTensor<T> pad_pow2(const BasicTensor<T>& x) {
  const auto& s = x.shape();
  if (s.size() < 2) throw std::invalid_argument("pad_pow2: rank must be >= 2");
  const std::size_t height = s[s.size() - 2], width = s[s.size() - 1];
  const std::size_t ph = next_power_of_two(height), pw = next_power_of_two(width);
  if (ph == height && pw == width) return x;
  Shape padded = s;
  padded[s.size() - 2] = ph;
  padded[s.size() - 1] = pw;
  BasicTensor<T> out(padded);
  const std::size_t planes = x.size() / (height * width);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        out[(p * ph + r) * pw + c] = x[(p * height + r) * width + c];
  return out;
}

template <typename T>
BasicTensor<T> truncate(const BasicTensor<T>& x, std::size_t height, std::size_t width) {
  const auto& s = x.shape();
  if (s.size() < 2) throw std::invalid_argument("truncate: rank must be >= 2");
  const std::size_t ih = s[s.size() - 2], iw = s[s.size() - 1];
  if (height > ih || width > iw) {
    throw std::invalid_argument("truncate: target " + std::to_string(height) + "x" +
                                std::to_string(width) + " exceeds input " + shape_to_string(s));
  }
  Shape cut = s;
  cut[s.size() - 2] = height;
  cut[s.size() - 1] = width;
  BasicTensor<T> out(cut);
  const std::size_t planes = x.size() / (ih * iw);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t r = 0; r < height; ++r)
      for (std::size_t c = 0; c < width; ++c)
        out[(p * height + r) * width + c] = x[(p * ih + r) * iw + c];
  return out;
}

template <std::floating_point T>
BasicTensor<T> idct2_truncate(const BasicTensor<T>& x) {
  if (x.rank() != 3) {
    throw std::invalid_argument("idct2_truncate: expected [C, H, W], got " +
                                shape_to_string(x.shape()));
  }
  if (x.dim(1) % 2 || x.dim(2) % 2) {
    throw std::invalid_argument("idct2_truncate: odd spatial dims " + shape_to_string(x.shape()));
  }
  return transform2d(truncate(x, x.dim(1) / 2, x.dim(2) / 2), TransformKind::DCT, true);
}

template BasicTensor<float> transform2d(const BasicTensor<float>&, TransformKind, bool);
template BasicTensor<double> transform2d(const BasicTensor<double>&, TransformKind, bool);
template BasicTensor<float> matrix_oracle2d(const BasicTensor<float>&, TransformKind, bool);
template BasicTensor<double> matrix_oracle2d(const BasicTensor<double>&, TransformKind, bool);
template BasicTensor<float> pad_pow2(const BasicTensor<float>&);
template BasicTensor<double> pad_pow2(const BasicTensor<double>&);
template BasicTensor<float> truncate(const BasicTensor<float>&, std::size_t, std::size_t);
template BasicTensor<double> truncate(const BasicTensor<double>&, std::size_t, std::size_t);
template BasicTensor<float> idct2_truncate(const BasicTensor<float>&);
template BasicTensor<double> idct2_truncate(const BasicTensor<double>&);

}  // namespace tpnet::transforms
