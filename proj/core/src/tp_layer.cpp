#include "tpnet/tp_layer.hpp"

#include <cmath>
#include <stdexcept>

namespace tpnet::tp {

namespace {

template <typename T>
using Mat = transforms::Matrix<T>;
template <typename T>
using ConstMapMat = Eigen::Map<const Mat<T>>;
template <typename T>
using MapMat = Eigen::Map<Mat<T>>;

template <typename T>
T sign(T v) {
  return static_cast<T>((v > T(0)) - (v < T(0)));
}

void check_spatial(const Shape& x, const Shape& p, std::string_view who) {
  if (x.size() < 2 || p.size() != 2 || x[x.size() - 2] != p[0] || x[x.size() - 1] != p[1]) {
    throw std::invalid_argument(std::string(who) + ": input " + shape_to_string(x) +
                                " does not match parameter " + shape_to_string(p));
  }
}

// out[p] = mh * x[p] * mw^T for every trailing 2D plane p.
template <typename T>
BasicTensor<T> separable(const BasicTensor<T>& x, const Mat<T>& mh, const Mat<T>& mw) {
  const std::size_t h = x.dim(2), w = x.dim(3);
  const std::size_t planes = x.dim(0) * x.dim(1);
  const auto gh = mh.rows(), gw = mw.rows();
  ConstMapMat<T> rows(x.data(), static_cast<Eigen::Index>(planes * h), static_cast<Eigen::Index>(w));
  const Mat<T> tmp = rows * mw.transpose();
  BasicTensor<T> out({x.dim(0), x.dim(1), static_cast<std::size_t>(gh), static_cast<std::size_t>(gw)});
  for (std::size_t p = 0; p < planes; ++p) {
    ConstMapMat<T> in(tmp.data() + p * h * gw, static_cast<Eigen::Index>(h), gw);
    MapMat<T> dst(out.data() + p * gh * gw, gh, gw);
    dst.noalias() = mh * in;
  }
  return out;
}

}  // namespace

std::string_view to_string(Nonlinearity n) {
  switch (n) {
    case Nonlinearity::SoftThreshold: return "soft-threshold";
    case Nonlinearity::ReLUWithThresholds: return "relu-with-thresholds";
    case Nonlinearity::ReLUPlain: return "relu-plain";
    case Nonlinearity::LeakyReLUWithThresholds: return "leaky-relu";
    case Nonlinearity::SiLUWithThresholds: return "silu";
  }
  return "?";
}

Nonlinearity parse_nonlinearity(std::string_view name) {
  if (name == "soft-threshold" || name == "st") return Nonlinearity::SoftThreshold;
  if (name == "relu-with-thresholds" || name == "relu-t") return Nonlinearity::ReLUWithThresholds;
  if (name == "relu-plain" || name == "relu") return Nonlinearity::ReLUPlain;
  if (name == "leaky-relu" || name == "leaky-relu-with-thresholds")
    return Nonlinearity::LeakyReLUWithThresholds;
  if (name == "silu" || name == "silu-with-thresholds") return Nonlinearity::SiLUWithThresholds;
  throw std::invalid_argument("unknown nonlinearity '" + std::string(name) + "'");
}

bool uses_thresholds(Nonlinearity n) { return n != Nonlinearity::ReLUPlain; }

// ------------------------------------------------------ pointwise pieces

template <typename T>
BasicTensor<T> soft_threshold(const BasicTensor<T>& x, const BasicTensor<T>& t) {
  check_spatial(x.shape(), t.shape(), "soft_threshold");
  BasicTensor<T> y(x.shape());
  const std::size_t plane = t.size();
  for (std::size_t base = 0; base < x.size(); base += plane)
    for (std::size_t j = 0; j < plane; ++j)
      y[base + j] = apply_nonlinearity(Nonlinearity::SoftThreshold, x[base + j], t[j]);
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> soft_threshold_backward(const BasicTensor<T>& x,
                                                                  const BasicTensor<T>& t,
                                                                  const BasicTensor<T>& grad_out) {
  check_spatial(x.shape(), t.shape(), "soft_threshold_backward");
  BasicTensor<T> dx(x.shape()), dt(t.shape());
  const std::size_t plane = t.size();
  for (std::size_t base = 0; base < x.size(); base += plane)
    for (std::size_t j = 0; j < plane; ++j) {
      T local_dt{};
      const std::size_t i = base + j;
      dx[i] = grad_out[i] * nonlinearity_grad(Nonlinearity::SoftThreshold, x[i], t[j], &local_dt);
      dt[j] += grad_out[i] * local_dt;
    }
  return {std::move(dx), std::move(dt)};
}

template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, const BasicTensor<T>& a) {
  check_spatial(x.shape(), a.shape(), "scale");
  BasicTensor<T> y(x.shape());
  const std::size_t plane = a.size();
  for (std::size_t base = 0; base < x.size(); base += plane)
    for (std::size_t j = 0; j < plane; ++j) y[base + j] = x[base + j] * a[j];
  return y;
}

template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> scale_backward(const BasicTensor<T>& x,
                                                         const BasicTensor<T>& a,
                                                         const BasicTensor<T>& grad_out) {
  check_spatial(x.shape(), a.shape(), "scale_backward");
  BasicTensor<T> dx(x.shape()), da(a.shape());
  const std::size_t plane = a.size();
  for (std::size_t base = 0; base < x.size(); base += plane)
    for (std::size_t j = 0; j < plane; ++j) {
      dx[base + j] = grad_out[base + j] * a[j];
      da[j] += grad_out[base + j] * x[base + j];
    }
  return {std::move(dx), std::move(da)};
}

template <typename T>
T apply_nonlinearity(Nonlinearity n, T z, T t) {
  const T tau = std::abs(t);
  switch (n) {
    case Nonlinearity::SoftThreshold: {
      const T m = std::abs(z) - tau;
      return m > T(0) ? sign(z) * m : T(0);
    }
    case Nonlinearity::ReLUWithThresholds: return z > tau ? z - tau : T(0);
    case Nonlinearity::ReLUPlain: return z > T(0) ? z : T(0);
    case Nonlinearity::LeakyReLUWithThresholds: {
      const T u = z - tau;
      return u > T(0) ? u : T(0.01) * u;
    }
    case Nonlinearity::SiLUWithThresholds: {
      const T u = z - tau;
      return u / (T(1) + std::exp(-u));
    }
  }
  return z;
}

template <typename T>
T nonlinearity_grad(Nonlinearity n, T z, T t, T* dt) {
  const T tau = std::abs(t);
  T dz{};
  switch (n) {
    case Nonlinearity::SoftThreshold:
      dz = std::abs(z) > tau ? T(1) : T(0);
      *dt = -sign(z) * sign(t) * dz;
      return dz;
    case Nonlinearity::ReLUWithThresholds:
      dz = z > tau ? T(1) : T(0);
      break;
    case Nonlinearity::ReLUPlain:
      *dt = T(0);
      return z > T(0) ? T(1) : T(0);
    case Nonlinearity::LeakyReLUWithThresholds:
      dz = z - tau > T(0) ? T(1) : T(0.01);
      break;
    case Nonlinearity::SiLUWithThresholds: {
      const T u = z - tau;
      const T s = T(1) / (T(1) + std::exp(-u));
      dz = s * (T(1) + u * (T(1) - s));
      break;
    }
  }
  *dt = -sign(t) * dz;
  return dz;
}

// ---------------------------------------------------------------- config

std::size_t TPConfig::grid_height() const {
  if (downsample) return height / 2;
  return kind == TransformKind::DCT ? height : transforms::next_power_of_two(height);
}

std::size_t TPConfig::grid_width() const {
  if (downsample) return width / 2;
  return kind == TransformKind::DCT ? width : transforms::next_power_of_two(width);
}

void TPConfig::validate() const {
  if (in_channels == 0 || out_channels == 0 || height == 0 || width == 0 || branches == 0) {
    throw std::invalid_argument("tp layer: channels, spatial dims and branch count must be > 0");
  }
  if (downsample) {
    if (kind != TransformKind::DCT) {
      throw std::invalid_argument("tp layer: downsampling requires the DCT");
    }
    if (height % 2 || width % 2) {
      throw std::invalid_argument("tp layer: downsampling requires even spatial dims");
    }
  }
  if (shortcut && (in_channels != out_channels || downsample)) {
    throw std::invalid_argument("tp layer: shortcut needs matching input and output shapes");
  }
}

TPConfig make_tp_config(TransformKind kind, std::size_t channels, std::size_t height,
                        std::size_t width, std::size_t branches) {
  TPConfig c;
  c.kind = kind;
  c.in_channels = c.out_channels = channels;
  c.height = height;
  c.width = width;
  c.branches = branches;
  c.shortcut = branches == 1;
  return c;
}

std::vector<ParamShape> tp_param_shapes(const TPConfig& config) {
  config.validate();
  std::vector<ParamShape> out;
  const Shape grid{config.grid_height(), config.grid_width()};
  for (std::size_t i = 0; i < config.branches; ++i) {
    if (config.scaling) out.push_back({"scale", grid});
    if (uses_thresholds(config.nonlinearity)) out.push_back({"threshold", grid});
    out.push_back({"mix", {config.out_channels, config.in_channels, 1, 1}});
    if (!uses_thresholds(config.nonlinearity)) out.push_back({"mix_bias", {config.out_channels}});
  }
  return out;
}

std::size_t tp_param_count(const TPConfig& config) {
  std::size_t n = 0;
  for (const auto& p : tp_param_shapes(config)) n += shape_size(p.shape);
  return n;
}

// ----------------------------------------------------------------- layer

template <typename T>
TPLayer<T>::TPLayer(const TPConfig& config, nn::Rng& rng) : config_(config) {
  config_.validate();
  const std::size_t gh = config_.grid_height(), gw = config_.grid_width();
  auto build = [&](std::size_t n, std::size_t grid, Mat<T>& fwd, Mat<T>& inv) {
    if (config_.downsample) {
      fwd = transforms::dct_matrix(n).topRows(static_cast<Eigen::Index>(grid)).cast<T>();
      inv = transforms::idct_matrix(grid).cast<T>();
    } else {
      const auto m = static_cast<Eigen::Index>(n);
      fwd = transforms::transform_matrix(config_.kind, grid, false).leftCols(m).cast<T>();
      inv = transforms::transform_matrix(config_.kind, grid, true).topRows(m).cast<T>();
    }
  };
  build(config_.height, gh, fwd_h_, inv_h_);
  build(config_.width, gw, fwd_w_, inv_w_);

  const bool thresholds = uses_thresholds(config_.nonlinearity);
  std::uniform_real_distribution<double> threshold_init(0.0, 0.1);
  for (std::size_t i = 0; i < config_.branches; ++i) {
    TPBranch<T> b;
    if (config_.scaling) {
      b.scale = nn::Parameter<T>("scale", {gh, gw});
      b.scale.value.fill(T(1));
    }
    if (thresholds) {
      b.threshold = nn::Parameter<T>("threshold", {gh, gw});
      for (auto& v : b.threshold.value.values()) v = static_cast<T>(threshold_init(rng));
    }
    b.mix = nn::Parameter<T>("mix", {config_.out_channels, config_.in_channels, 1, 1});
    nn::kaiming_uniform(b.mix.value, config_.in_channels, rng);
    if (!thresholds) {
      b.mix_bias = nn::Parameter<T>("mix_bias", {config_.out_channels});
      nn::uniform_fill(b.mix_bias.value,
                       static_cast<T>(1.0 / std::sqrt(static_cast<double>(config_.in_channels))),
                       rng);
    }
    branches_.push_back(std::move(b));
  }
}

template <typename T>
void TPLayer<T>::set_name(const std::string& prefix) {
  nn::Layer<T>::set_name(prefix);
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const std::string base = prefix + ".branch" + std::to_string(i);
    branches_[i].scale.name = base + ".scale";
    branches_[i].threshold.name = base + ".threshold";
    branches_[i].mix.name = base + ".mix";
    branches_[i].mix_bias.name = base + ".mix_bias";
  }
}

template <typename T>
void TPLayer<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  const bool thresholds = uses_thresholds(config_.nonlinearity);
  for (auto& b : branches_) {
    if (config_.scaling) out.push_back(&b.scale);
    if (thresholds) out.push_back(&b.threshold);
    out.push_back(&b.mix);
    if (!thresholds) out.push_back(&b.mix_bias);
  }
}

template <typename T>
BasicTensor<T> TPLayer<T>::apply_forward_transform(const BasicTensor<T>& x) const {
  if (x.rank() != 4 || x.dim(1) != config_.in_channels || x.dim(2) != config_.height ||
      x.dim(3) != config_.width) {
    throw std::invalid_argument("tp layer: expected [B, " + std::to_string(config_.in_channels) +
                                ", " + std::to_string(config_.height) + ", " +
                                std::to_string(config_.width) + "], got " +
                                shape_to_string(x.shape()));
  }
  return separable(x, fwd_h_, fwd_w_);
}

template <typename T>
BasicTensor<T> TPLayer<T>::inverse(const BasicTensor<T>& X) const {
  return separable(X, inv_h_, inv_w_);
}

template <typename T>
BasicTensor<T> TPLayer<T>::forward(const BasicTensor<T>& x, nn::Mode) {
  coeffs_ = apply_forward_transform(x);
  const std::size_t batch = x.dim(0), cin = config_.in_channels, cout = config_.out_channels;
  const std::size_t grid = config_.grid_height() * config_.grid_width();
  BasicTensor<T> sum({batch, cout, config_.grid_height(), config_.grid_width()});
  mixed_.assign(branches_.size(), {});
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    const auto& br = branches_[i];
    const BasicTensor<T> scaled = config_.scaling ? scale(coeffs_, br.scale.value) : coeffs_;
    BasicTensor<T>& z = mixed_[i];
    z = BasicTensor<T>(sum.shape());
    ConstMapMat<T> v(br.mix.value.data(), static_cast<Eigen::Index>(cout),
                     static_cast<Eigen::Index>(cin));
    for (std::size_t b = 0; b < batch; ++b) {
      ConstMapMat<T> u(scaled.data() + b * cin * grid, static_cast<Eigen::Index>(cin),
                       static_cast<Eigen::Index>(grid));
      MapMat<T> zb(z.data() + b * cout * grid, static_cast<Eigen::Index>(cout),
                   static_cast<Eigen::Index>(grid));
      zb.noalias() = v * u;
      if (!br.mix_bias.value.empty()) {
        for (std::size_t o = 0; o < cout; ++o) zb.row(static_cast<Eigen::Index>(o)).array() += br.mix_bias.value[o];
      }
    }
    const T* t = br.threshold.value.empty() ? nullptr : br.threshold.value.data();
    for (std::size_t base = 0; base < z.size(); base += grid)
      for (std::size_t j = 0; j < grid; ++j)
        sum[base + j] += apply_nonlinearity(config_.nonlinearity, z[base + j], t ? t[j] : T(0));
  }
  BasicTensor<T> y = inverse(sum);
  if (config_.shortcut) y += x;
  return y;
}

template <typename T>
BasicTensor<T> TPLayer<T>::backward(const BasicTensor<T>& grad_out) {
  const BasicTensor<T> dsum = separable(grad_out, Mat<T>(inv_h_.transpose()),
                                        Mat<T>(inv_w_.transpose()));
  const std::size_t batch = grad_out.dim(0), cin = config_.in_channels,
                    cout = config_.out_channels;
  const std::size_t grid = config_.grid_height() * config_.grid_width();
  BasicTensor<T> dcoeffs(coeffs_.shape());
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    auto& br = branches_[i];
    const BasicTensor<T>& z = mixed_[i];
    const T* t = br.threshold.value.empty() ? nullptr : br.threshold.value.data();
    T* dt = br.threshold.grad.empty() ? nullptr : br.threshold.grad.data();
    BasicTensor<T> dz(z.shape());
    for (std::size_t base = 0; base < z.size(); base += grid)
      for (std::size_t j = 0; j < grid; ++j) {
        T local_dt{};
        const std::size_t k = base + j;
        dz[k] = dsum[k] * nonlinearity_grad(config_.nonlinearity, z[k], t ? t[j] : T(0), &local_dt);
        if (dt) dt[j] += dsum[k] * local_dt;
      }
    const BasicTensor<T> scaled = config_.scaling ? scale(coeffs_, br.scale.value) : coeffs_;
    BasicTensor<T> dscaled(scaled.shape());
    ConstMapMat<T> v(br.mix.value.data(), static_cast<Eigen::Index>(cout),
                     static_cast<Eigen::Index>(cin));
    MapMat<T> dv(br.mix.grad.data(), static_cast<Eigen::Index>(cout),
                 static_cast<Eigen::Index>(cin));
    for (std::size_t b = 0; b < batch; ++b) {
      ConstMapMat<T> dzb(dz.data() + b * cout * grid, static_cast<Eigen::Index>(cout),
                         static_cast<Eigen::Index>(grid));
      ConstMapMat<T> u(scaled.data() + b * cin * grid, static_cast<Eigen::Index>(cin),
                       static_cast<Eigen::Index>(grid));
      dv.noalias() += dzb * u.transpose();
      MapMat<T> du(dscaled.data() + b * cin * grid, static_cast<Eigen::Index>(cin),
                   static_cast<Eigen::Index>(grid));
      du.noalias() = v.transpose() * dzb;
      if (!br.mix_bias.grad.empty()) {
        for (std::size_t o = 0; o < cout; ++o) br.mix_bias.grad[o] += dzb.row(static_cast<Eigen::Index>(o)).sum();
      }
    }
    if (config_.scaling) {
      auto [dc, da] = scale_backward(coeffs_, br.scale.value, dscaled);
      br.scale.grad += da;
      dcoeffs += dc;
    } else {
      dcoeffs += dscaled;
    }
  }
  BasicTensor<T> dx = separable(dcoeffs, Mat<T>(fwd_h_.transpose()), Mat<T>(fwd_w_.transpose()));
  if (config_.shortcut) dx += grad_out;
  return dx;
}

template <typename T>
std::vector<BasicTensor<T>> TPLayer<T>::branch_outputs(const BasicTensor<T>& x) {
  forward(x, nn::Mode::Eval);
  const std::size_t grid = config_.grid_height() * config_.grid_width();
  std::vector<BasicTensor<T>> out;
  for (std::size_t i = 0; i < branches_.size(); ++i) {
    BasicTensor<T> s(mixed_[i].shape());
    const auto& t = branches_[i].threshold.value;
    for (std::size_t base = 0; base < s.size(); base += grid)
      for (std::size_t j = 0; j < grid; ++j)
        s[base + j] = apply_nonlinearity(config_.nonlinearity, mixed_[i][base + j],
                                         t.empty() ? T(0) : t[j]);
    out.push_back(std::move(s));
  }
  return out;
}

#define TPNET_INSTANTIATE(T)                                                                   \
  template BasicTensor<T> soft_threshold(const BasicTensor<T>&, const BasicTensor<T>&);        \
  template std::pair<BasicTensor<T>, BasicTensor<T>> soft_threshold_backward(                  \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template BasicTensor<T> scale(const BasicTensor<T>&, const BasicTensor<T>&);                 \
  template std::pair<BasicTensor<T>, BasicTensor<T>> scale_backward(                           \
      const BasicTensor<T>&, const BasicTensor<T>&, const BasicTensor<T>&);                    \
  template T apply_nonlinearity(Nonlinearity, T, T);                                           \
  template T nonlinearity_grad(Nonlinearity, T, T, T*);                                        \
  template class TPLayer<T>;

TPNET_INSTANTIATE(float)
TPNET_INSTANTIATE(double)

#undef TPNET_INSTANTIATE

}  // namespace tpnet::tp
