#pragma once

// Transform-domain perceptron layers: 2D transform, per-branch scaling,
// 1x1 channel mixing and a trainable thresholding nonlinearity, followed by
// a single inverse transform of the branch sum.

#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpnet/nn.hpp"
#include "tpnet/transforms.hpp"

namespace tpnet::tp {

using transforms::TransformKind;

enum class Nonlinearity {
  SoftThreshold,
  ReLUWithThresholds,
  ReLUPlain,  // no thresholds; the 1x1 mixing kernel gets a bias instead
  LeakyReLUWithThresholds,
  SiLUWithThresholds,
};

std::string_view to_string(Nonlinearity n);
Nonlinearity parse_nonlinearity(std::string_view name);
bool uses_thresholds(Nonlinearity n);

// y = sign(x) * max(|x| - |t|, 0); t is [H, W], broadcast over [B, C].
template <typename T>
BasicTensor<T> soft_threshold(const BasicTensor<T>& x, const BasicTensor<T>& t);
// Returns {dx, dt}. Subgradient 0 at the kink and sign(0) = 0.
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> soft_threshold_backward(const BasicTensor<T>& x,
                                                                  const BasicTensor<T>& t,
                                                                  const BasicTensor<T>& grad_out);

// y[b, c, h, w] = x[b, c, h, w] * a[h, w]; weights shared across channels.
template <typename T>
BasicTensor<T> scale(const BasicTensor<T>& x, const BasicTensor<T>& a);
template <typename T>
std::pair<BasicTensor<T>, BasicTensor<T>> scale_backward(const BasicTensor<T>& x,
                                                         const BasicTensor<T>& a,
                                                         const BasicTensor<T>& grad_out);

// Pointwise nonlinearity on the mixed transform-domain value z with
// threshold parameter t; `dt` receives dy/dt.
template <typename T>
T apply_nonlinearity(Nonlinearity n, T z, T t);
template <typename T>
T nonlinearity_grad(Nonlinearity n, T z, T t, T* dt);

struct TPConfig {
  TransformKind kind = TransformKind::DCT;
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t height = 0;  // input spatial dims
  std::size_t width = 0;
  std::size_t branches = 1;  // P
  bool shortcut = true;
  Nonlinearity nonlinearity = Nonlinearity::SoftThreshold;
  bool scaling = true;  // false: no A_i, the 1x1 mixing is the only multiply
  // Keep the low-frequency quarter of the DCT and invert at half size.
  bool downsample = false;

  // Spatial dims the scaling/threshold matrices live on.
  std::size_t grid_height() const;
  std::size_t grid_width() const;
  std::size_t out_height() const { return downsample ? height / 2 : height; }
  std::size_t out_width() const { return downsample ? width / 2 : width; }
  void validate() const;
};

// Default: shortcut iff a single branch.
TPConfig make_tp_config(TransformKind kind, std::size_t channels, std::size_t height,
                        std::size_t width, std::size_t branches);

struct ParamShape {
  std::string role;  // "scale", "threshold", "mix", "mix_bias"
  Shape shape;
};

// Full inventory; total = 2 P W'H' + P C_in C_out for the default nonlinearity.
std::vector<ParamShape> tp_param_shapes(const TPConfig& config);
std::size_t tp_param_count(const TPConfig& config);

template <typename T>
struct TPBranch {
  nn::Parameter<T> scale;      // A [H', W'], empty without scaling
  nn::Parameter<T> threshold;  // t [H', W'], effective threshold |t|
  nn::Parameter<T> mix;        // V [C_out, C_in, 1, 1]
  nn::Parameter<T> mix_bias;   // [C_out], ReLUPlain only
};

template <typename T>
class TPLayer final : public nn::Layer<T> {
 public:
  // A = 1, t ~ U(0, 0.1), V Kaiming uniform.
  TPLayer(const TPConfig& config, nn::Rng& rng);

  std::string_view type() const override { return "tp"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, nn::Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;
  void set_name(const std::string& prefix) override;

  const TPConfig& config() const { return config_; }
  std::vector<TPBranch<T>>& branches() { return branches_; }

  // Transform-domain branch outputs S_i before the inverse transform, as
  // computed by the latest forward: [P][B, C_out, H', W'].
  std::vector<BasicTensor<T>> branch_outputs(const BasicTensor<T>& x);
  // Inverse transform (with truncation) of a transform-domain tensor.
  BasicTensor<T> inverse(const BasicTensor<T>& X) const;

 private:
  BasicTensor<T> apply_forward_transform(const BasicTensor<T>& x) const;

  TPConfig config_;
  std::vector<TPBranch<T>> branches_;
  // Forward: grid x input (pad folded in). Inverse: output x grid (truncate folded in).
  transforms::Matrix<T> fwd_h_, fwd_w_, inv_h_, inv_w_;
  BasicTensor<T> coeffs_;                // T(x)
  std::vector<BasicTensor<T>> mixed_;    // pre-nonlinearity z per branch
};

}  // namespace tpnet::tp
