#include "tpnet/nn.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

namespace tpnet::nn {

namespace {

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;
template <typename T>
using ConstMapMat = Eigen::Map<const Mat<T>>;

void expect_rank(const Shape& s, std::size_t rank, std::string_view who) {
  if (s.size() != rank) {
    throw std::invalid_argument(std::string(who) + ": expected rank " + std::to_string(rank) +
                                " input, got " + shape_to_string(s));
  }
}

struct ConvGeometry {
  std::size_t in_c, height, width, out_h, out_w, k, stride, pad;

  // Output columns [lo, hi) whose input column ox * stride + kx - pad is in range.
  std::pair<std::size_t, std::size_t> valid_columns(std::size_t kx) const {
    std::size_t lo = 0;
    while (lo < out_w && lo * stride + kx < pad) ++lo;
    std::size_t hi = out_w;
    while (hi > lo && (hi - 1) * stride + kx - pad >= width) --hi;
    return {lo, hi};
  }
};

// One sample: plane [C, H, W] -> cols [C k k, out_h out_w].
template <typename T>
void im2col(const T* x, const ConvGeometry& g, T* cols) {
  const std::size_t spatial = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        T* row = cols + ((c * g.k + ky) * g.k + kx) * spatial;
        const T* plane = x + c * g.height * g.width;
        const auto [lo, hi] = g.valid_columns(kx);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          T* dst = row + oy * g.out_w;
          const std::size_t iy = oy * g.stride + ky;
          if (iy < g.pad || iy - g.pad >= g.height) {
            std::fill(dst, dst + g.out_w, T{});
            continue;
          }
          const T* src = plane + (iy - g.pad) * g.width;
          std::fill(dst, dst + lo, T{});
          if (g.stride == 1) {
            std::copy(src + lo + kx - g.pad, src + hi + kx - g.pad, dst + lo);
          } else {
            for (std::size_t ox = lo; ox < hi; ++ox) dst[ox] = src[ox * g.stride + kx - g.pad];
          }
          std::fill(dst + hi, dst + g.out_w, T{});
        }
      }
}

template <typename T>
void col2im(const T* cols, const ConvGeometry& g, T* dx) {
  const std::size_t spatial = g.out_h * g.out_w;
  for (std::size_t c = 0; c < g.in_c; ++c)
    for (std::size_t ky = 0; ky < g.k; ++ky)
      for (std::size_t kx = 0; kx < g.k; ++kx) {
        const T* row = cols + ((c * g.k + ky) * g.k + kx) * spatial;
        T* plane = dx + c * g.height * g.width;
        const auto [lo, hi] = g.valid_columns(kx);
        for (std::size_t oy = 0; oy < g.out_h; ++oy) {
          const std::size_t iy = oy * g.stride + ky;
          if (iy < g.pad || iy - g.pad >= g.height) continue;
          const T* src = row + oy * g.out_w;
          T* dst = plane + (iy - g.pad) * g.width;
          for (std::size_t ox = lo; ox < hi; ++ox) dst[ox * g.stride + kx - g.pad] += src[ox];
        }
      }
}

}  // namespace

template <typename T>
void uniform_fill(BasicTensor<T>& w, T bound, Rng& rng) {
  std::uniform_real_distribution<double> dist(-static_cast<double>(bound),
                                              static_cast<double>(bound));
  for (auto& v : w.values()) v = static_cast<T>(dist(rng));
}

template <typename T>
void kaiming_uniform(BasicTensor<T>& w, std::size_t fan_in, Rng& rng) {
  uniform_fill(w, static_cast<T>(std::sqrt(6.0 / static_cast<double>(fan_in))), rng);
}

// ---------------------------------------------------------------- Conv2d

template <typename T>
Conv2d<T>::Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                  std::size_t stride, std::size_t padding, Rng& rng)
    : in_(in_channels),
      out_(out_channels),
      kernel_(kernel),
      stride_(stride),
      padding_(padding),
      weight_("weight", {out_channels, in_channels, kernel, kernel}) {
  if (kernel == 0 || stride == 0 || in_channels == 0 || out_channels == 0) {
    throw std::invalid_argument("conv2d: zero-sized configuration");
  }
  kaiming_uniform(weight_.value, in_channels * kernel * kernel, rng);
}

template <typename T>
void Conv2d<T>::set_name(const std::string& prefix) {
  Layer<T>::set_name(prefix);
  weight_.name = prefix + ".weight";
}

template <typename T>
BasicTensor<T> Conv2d<T>::forward(const BasicTensor<T>& x, Mode) {
  expect_rank(x.shape(), 4, "conv2d");
  if (x.dim(1) != in_) {
    throw std::invalid_argument("conv2d: expected " + std::to_string(in_) +
                                " input channels, got " + shape_to_string(x.shape()));
  }
  if (x.dim(2) + 2 * padding_ < kernel_ || x.dim(3) + 2 * padding_ < kernel_) {
    throw std::invalid_argument("conv2d: input " + shape_to_string(x.shape()) +
                                " smaller than kernel");
  }
  input_ = x;
  const ConvGeometry g{in_, x.dim(2), x.dim(3),
                       (x.dim(2) + 2 * padding_ - kernel_) / stride_ + 1,
                       (x.dim(3) + 2 * padding_ - kernel_) / stride_ + 1,
                       kernel_, stride_, padding_};
  const std::size_t batch = x.dim(0), spatial = g.out_h * g.out_w;
  const auto patch = static_cast<Eigen::Index>(in_ * kernel_ * kernel_);
  ConstMapMat<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_), patch);
  BasicTensor<T> out({batch, out_, g.out_h, g.out_w});
  Mat<T> cols(patch, static_cast<Eigen::Index>(spatial));
  for (std::size_t b = 0; b < batch; ++b) {
    im2col(x.data() + b * in_ * g.height * g.width, g, cols.data());
    MapMat<T> yb(out.data() + b * out_ * spatial, static_cast<Eigen::Index>(out_),
                 static_cast<Eigen::Index>(spatial));
    yb.noalias() = w * cols;
  }
  return out;
}

template <typename T>
BasicTensor<T> Conv2d<T>::backward(const BasicTensor<T>& grad_out) {
  const BasicTensor<T>& x = input_;
  const ConvGeometry g{in_, x.dim(2), x.dim(3), grad_out.dim(2), grad_out.dim(3),
                       kernel_, stride_, padding_};
  const std::size_t batch = x.dim(0), spatial = g.out_h * g.out_w;
  const auto patch = static_cast<Eigen::Index>(in_ * kernel_ * kernel_);
  MapMat<T> dw(weight_.grad.data(), static_cast<Eigen::Index>(out_), patch);
  ConstMapMat<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_), patch);
  BasicTensor<T> dx(x.shape());
  Mat<T> cols(patch, static_cast<Eigen::Index>(spatial)), dcols(patch, static_cast<Eigen::Index>(spatial));
  for (std::size_t b = 0; b < batch; ++b) {
    const std::size_t in_offset = b * in_ * g.height * g.width;
    ConstMapMat<T> dyb(grad_out.data() + b * out_ * spatial, static_cast<Eigen::Index>(out_),
                       static_cast<Eigen::Index>(spatial));
    im2col(x.data() + in_offset, g, cols.data());
    dw.noalias() += dyb * cols.transpose();
    dcols.noalias() = w.transpose() * dyb;
    col2im(dcols.data(), g, dx.data() + in_offset);
  }
  return dx;
}

// ----------------------------------------------------------- BatchNorm2d

template <typename T>
BatchNorm2d<T>::BatchNorm2d(std::size_t channels, T momentum, T eps)
    : channels_(channels),
      momentum_(momentum),
      eps_(eps),
      gamma_("weight", {channels}),
      beta_("bias", {channels}),
      running_mean_({channels}, T(0)),
      running_var_({channels}, T(1)),
      inv_std_(channels) {
  gamma_.value.fill(T(1));
}

template <typename T>
void BatchNorm2d<T>::set_name(const std::string& prefix) {
  Layer<T>::set_name(prefix);
  gamma_.name = prefix + ".weight";
  beta_.name = prefix + ".bias";
}

template <typename T>
void BatchNorm2d<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&gamma_);
  out.push_back(&beta_);
}

template <typename T>
void BatchNorm2d<T>::collect_buffers(std::vector<Buffer<T>>& out) {
  out.push_back({this->name_ + ".running_mean", &running_mean_});
  out.push_back({this->name_ + ".running_var", &running_var_});
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::forward(const BasicTensor<T>& x, Mode mode) {
  expect_rank(x.shape(), 4, "batchnorm2d");
  if (x.dim(1) != channels_) {
    throw std::invalid_argument("batchnorm2d: expected " + std::to_string(channels_) +
                                " channels, got " + shape_to_string(x.shape()));
  }
  const std::size_t batch = x.dim(0), spatial = x.dim(2) * x.dim(3);
  const std::size_t count = batch * spatial;
  last_mode_ = mode;
  xhat_ = BasicTensor<T>(x.shape());
  BasicTensor<T> y(x.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double mean, var;
    if (mode == Mode::Train) {
      double s = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.data() + (b * channels_ + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) s += p[i];
      }
      mean = s / static_cast<double>(count);
      double sq = 0.0;
      for (std::size_t b = 0; b < batch; ++b) {
        const T* p = x.data() + (b * channels_ + c) * spatial;
        for (std::size_t i = 0; i < spatial; ++i) sq += (p[i] - mean) * (p[i] - mean);
      }
      var = sq / static_cast<double>(count);
      const double unbiased = count > 1 ? sq / static_cast<double>(count - 1) : var;
      running_mean_[c] = static_cast<T>((1.0 - momentum_) * running_mean_[c] + momentum_ * mean);
      running_var_[c] = static_cast<T>((1.0 - momentum_) * running_var_[c] + momentum_ * unbiased);
    } else {
      mean = running_mean_[c];
      var = running_var_[c];
    }
    const double inv = 1.0 / std::sqrt(var + static_cast<double>(eps_));
    inv_std_[c] = static_cast<T>(inv);
    const T g = gamma_.value[c], bt = beta_.value[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        const T xh = static_cast<T>((x[off + i] - mean) * inv);
        xhat_[off + i] = xh;
        y[off + i] = g * xh + bt;
      }
    }
  }
  return y;
}

template <typename T>
BasicTensor<T> BatchNorm2d<T>::backward(const BasicTensor<T>& grad_out) {
  const std::size_t batch = grad_out.dim(0), spatial = grad_out.dim(2) * grad_out.dim(3);
  const double count = static_cast<double>(batch * spatial);
  BasicTensor<T> dx(grad_out.shape());
  for (std::size_t c = 0; c < channels_; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        sum_dy += grad_out[off + i];
        sum_dy_xhat += static_cast<double>(grad_out[off + i]) * xhat_[off + i];
      }
    }
    gamma_.grad[c] += static_cast<T>(sum_dy_xhat);
    beta_.grad[c] += static_cast<T>(sum_dy);
    const double scale = static_cast<double>(gamma_.value[c]) * inv_std_[c];
    for (std::size_t b = 0; b < batch; ++b) {
      const std::size_t off = (b * channels_ + c) * spatial;
      for (std::size_t i = 0; i < spatial; ++i) {
        if (last_mode_ == Mode::Train) {
          dx[off + i] = static_cast<T>(scale / count *
                                       (count * grad_out[off + i] - sum_dy -
                                        xhat_[off + i] * sum_dy_xhat));
        } else {
          dx[off + i] = static_cast<T>(scale * grad_out[off + i]);
        }
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ Activation

template <typename T>
T activate(ActivationKind kind, T x) {
  switch (kind) {
    case ActivationKind::ReLU: return x > T(0) ? x : T(0);
    case ActivationKind::LeakyReLU: return x > T(0) ? x : T(0.01) * x;
    case ActivationKind::SiLU: return x / (T(1) + std::exp(-x));
  }
  return x;
}

template <typename T>
T activate_grad(ActivationKind kind, T x) {
  switch (kind) {
    case ActivationKind::ReLU: return x > T(0) ? T(1) : T(0);
    case ActivationKind::LeakyReLU: return x > T(0) ? T(1) : T(0.01);
    case ActivationKind::SiLU: {
      const T s = T(1) / (T(1) + std::exp(-x));
      return s * (T(1) + x * (T(1) - s));
    }
  }
  return T(1);
}

template <typename T>
std::string_view Activation<T>::type() const {
  switch (kind_) {
    case ActivationKind::ReLU: return "relu";
    case ActivationKind::LeakyReLU: return "leaky_relu";
    case ActivationKind::SiLU: return "silu";
  }
  return "activation";
}

template <typename T>
BasicTensor<T> Activation<T>::forward(const BasicTensor<T>& x, Mode) {
  input_ = x;
  BasicTensor<T> y(x.shape());
  for (std::size_t i = 0; i < x.size(); ++i) y[i] = activate(kind_, x[i]);
  return y;
}

template <typename T>
BasicTensor<T> Activation<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> dx(grad_out.shape());
  for (std::size_t i = 0; i < dx.size(); ++i) dx[i] = grad_out[i] * activate_grad(kind_, input_[i]);
  return dx;
}

// --------------------------------------------------------- GlobalAvgPool

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::forward(const BasicTensor<T>& x, Mode) {
  expect_rank(x.shape(), 4, "global_avg_pool");
  input_shape_ = x.shape();
  const std::size_t planes = x.dim(0) * x.dim(1), spatial = x.dim(2) * x.dim(3);
  BasicTensor<T> y({x.dim(0), x.dim(1)});
  for (std::size_t p = 0; p < planes; ++p) {
    double s = 0.0;
    for (std::size_t i = 0; i < spatial; ++i) s += x[p * spatial + i];
    y[p] = static_cast<T>(s / static_cast<double>(spatial));
  }
  return y;
}

template <typename T>
BasicTensor<T> GlobalAvgPool<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> dx(input_shape_);
  const std::size_t spatial = input_shape_[2] * input_shape_[3];
  const T inv = T(1) / static_cast<T>(spatial);
  for (std::size_t p = 0; p < grad_out.size(); ++p)
    std::fill_n(dx.data() + p * spatial, spatial, grad_out[p] * inv);
  return dx;
}

// ---------------------------------------------------------------- Linear

template <typename T>
Linear<T>::Linear(std::size_t in_features, std::size_t out_features, Rng& rng)
    : in_(in_features),
      out_(out_features),
      weight_("weight", {out_features, in_features}),
      bias_("bias", {out_features}) {
  const T bound = static_cast<T>(1.0 / std::sqrt(static_cast<double>(in_features)));
  uniform_fill(weight_.value, bound, rng);
  uniform_fill(bias_.value, bound, rng);
}

template <typename T>
void Linear<T>::set_name(const std::string& prefix) {
  Layer<T>::set_name(prefix);
  weight_.name = prefix + ".weight";
  bias_.name = prefix + ".bias";
}

template <typename T>
void Linear<T>::collect_parameters(std::vector<Parameter<T>*>& out) {
  out.push_back(&weight_);
  out.push_back(&bias_);
}

template <typename T>
BasicTensor<T> Linear<T>::forward(const BasicTensor<T>& x, Mode) {
  expect_rank(x.shape(), 2, "linear");
  if (x.dim(1) != in_) {
    throw std::invalid_argument("linear: expected " + std::to_string(in_) + " features, got " +
                                shape_to_string(x.shape()));
  }
  input_ = x;
  const auto batch = static_cast<Eigen::Index>(x.dim(0));
  ConstMapMat<T> xm(x.data(), batch, static_cast<Eigen::Index>(in_));
  ConstMapMat<T> w(weight_.value.data(), static_cast<Eigen::Index>(out_),
                   static_cast<Eigen::Index>(in_));
  BasicTensor<T> y({x.dim(0), out_});
  MapMat<T> ym(y.data(), batch, static_cast<Eigen::Index>(out_));
  ym.noalias() = xm * w.transpose();
  for (Eigen::Index b = 0; b < batch; ++b)
    for (std::size_t o = 0; o < out_; ++o) ym(b, static_cast<Eigen::Index>(o)) += bias_.value[o];
  return y;
}

template <typename T>
BasicTensor<T> Linear<T>::backward(const BasicTensor<T>& grad_out) {
  const auto batch = static_cast<Eigen::Index>(grad_out.dim(0));
  const auto in = static_cast<Eigen::Index>(in_), out = static_cast<Eigen::Index>(out_);
  ConstMapMat<T> dy(grad_out.data(), batch, out);
  ConstMapMat<T> xm(input_.data(), batch, in);
  MapMat<T> dw(weight_.grad.data(), out, in);
  dw.noalias() += dy.transpose() * xm;
  for (Eigen::Index b = 0; b < batch; ++b)
    for (Eigen::Index o = 0; o < out; ++o) bias_.grad[static_cast<std::size_t>(o)] += dy(b, o);
  ConstMapMat<T> w(weight_.value.data(), out, in);
  BasicTensor<T> dx(input_.shape());
  MapMat<T> dxm(dx.data(), batch, in);
  dxm.noalias() = dy * w;
  return dx;
}

// ---------------------------------------------------------------- losses

template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    const std::vector<std::uint8_t>& labels) {
  expect_rank(logits.shape(), 2, "softmax_cross_entropy");
  const std::size_t batch = logits.dim(0), classes = logits.dim(1);
  if (labels.size() != batch) {
    throw std::invalid_argument("softmax_cross_entropy: " + std::to_string(labels.size()) +
                                " labels for batch of " + std::to_string(batch));
  }
  LossResult<T> r;
  r.grad = BasicTensor<T>(logits.shape());
  double total = 0.0;
  for (std::size_t b = 0; b < batch; ++b) {
    if (labels[b] >= classes) {
      throw std::invalid_argument("softmax_cross_entropy: label " + std::to_string(labels[b]) +
                                  " out of range for " + std::to_string(classes) + " classes");
    }
    const T* row = logits.data() + b * classes;
    const std::size_t arg = static_cast<std::size_t>(std::max_element(row, row + classes) - row);
    if (arg == labels[b]) ++r.correct;
    const double mx = row[arg];
    double z = 0.0;
    for (std::size_t k = 0; k < classes; ++k) z += std::exp(row[k] - mx);
    const double log_z = std::log(z) + mx;
    total += log_z - row[labels[b]];
    for (std::size_t k = 0; k < classes; ++k) {
      const double p = std::exp(row[k] - log_z);
      r.grad[b * classes + k] =
          static_cast<T>((p - (k == labels[b] ? 1.0 : 0.0)) / static_cast<double>(batch));
    }
  }
  r.loss = static_cast<T>(total / static_cast<double>(batch));
  return r;
}

#define TPNET_INSTANTIATE(T)                                                           \
  template void uniform_fill(BasicTensor<T>&, T, Rng&);                                \
  template void kaiming_uniform(BasicTensor<T>&, std::size_t, Rng&);                   \
  template T activate(ActivationKind, T);                                              \
  template T activate_grad(ActivationKind, T);                                         \
  template class Conv2d<T>;                                                            \
  template class BatchNorm2d<T>;                                                       \
  template class Activation<T>;                                                        \
  template class GlobalAvgPool<T>;                                                     \
  template class Linear<T>;                                                            \
  template LossResult<T> softmax_cross_entropy(const BasicTensor<T>&,                  \
                                               const std::vector<std::uint8_t>&);

TPNET_INSTANTIATE(float)
TPNET_INSTANTIATE(double)

#undef TPNET_INSTANTIATE

}  // namespace tpnet::nn
