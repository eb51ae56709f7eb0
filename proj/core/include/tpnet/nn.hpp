#pragma once

#include <cstdint>
#include <memory>
#include <random>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "tpnet/tensor.hpp"

namespace tpnet::nn {

enum class Mode { Train, Eval };

using Rng = std::mt19937_64;

template <typename T>
struct Parameter {
  Parameter() = default;
  Parameter(std::string n, Shape shape) : name(std::move(n)), value(shape), grad(shape) {}

  std::string name;
  BasicTensor<T> value;
  BasicTensor<T> grad;
  bool trainable = true;
};

// Non-trainable state that must survive checkpointing (BN running stats).
template <typename T>
struct Buffer {
  std::string name;
  BasicTensor<T>* tensor;
};

template <typename T>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual std::string_view type() const = 0;
  virtual BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) = 0;
  // Consumes the state cached by the latest forward; accumulates into
  // parameter grads and returns the gradient w.r.t. the forward input.
  virtual BasicTensor<T> backward(const BasicTensor<T>& grad_out) = 0;

  virtual void collect_parameters(std::vector<Parameter<T>*>& /*out*/) {}
  virtual void collect_buffers(std::vector<Buffer<T>>& /*out*/) {}
  // Prefixes parameter/buffer names.
  virtual void set_name(const std::string& prefix) { name_ = prefix; }
  const std::string& name() const { return name_; }

 protected:
  std::string name_;
};

// Records executed layers; backward walks them once in reverse order.
template <typename T>
class Tape {
 public:
  void clear() { nodes_.clear(); }
  void record(Layer<T>* node) { nodes_.push_back(node); }
  std::size_t size() const { return nodes_.size(); }

  BasicTensor<T> backward(BasicTensor<T> grad) {
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) grad = (*it)->backward(grad);
    nodes_.clear();
    return grad;
  }

 private:
  std::vector<Layer<T>*> nodes_;
};

// Kaiming uniform for ReLU: U(-sqrt(6 / fan_in), sqrt(6 / fan_in)).
template <typename T>
void kaiming_uniform(BasicTensor<T>& w, std::size_t fan_in, Rng& rng);
template <typename T>
void uniform_fill(BasicTensor<T>& w, T bound, Rng& rng);

template <typename T>
class Conv2d final : public Layer<T> {
 public:
  Conv2d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
         std::size_t stride, std::size_t padding, Rng& rng);

  std::string_view type() const override { return "conv2d"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override { out.push_back(&weight_); }
  void set_name(const std::string& prefix) override;

  Parameter<T>& weight() { return weight_; }
  std::size_t in_channels() const { return in_; }
  std::size_t out_channels() const { return out_; }
  std::size_t kernel() const { return kernel_; }
  std::size_t stride() const { return stride_; }

 private:
  std::size_t in_, out_, kernel_, stride_, padding_;
  Parameter<T> weight_;  // [out, in, k, k]
  BasicTensor<T> input_;
};

template <typename T>
class BatchNorm2d final : public Layer<T> {
 public:
  explicit BatchNorm2d(std::size_t channels, T momentum = T(0.1), T eps = T(1e-5));

  std::string_view type() const override { return "batchnorm2d"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void collect_buffers(std::vector<Buffer<T>>& out) override;
  void set_name(const std::string& prefix) override;

  Parameter<T>& gamma() { return gamma_; }
  Parameter<T>& beta() { return beta_; }
  BasicTensor<T>& running_mean() { return running_mean_; }
  BasicTensor<T>& running_var() { return running_var_; }

 private:
  std::size_t channels_;
  T momentum_, eps_;
  Parameter<T> gamma_, beta_;
  BasicTensor<T> running_mean_, running_var_;
  BasicTensor<T> xhat_;
  std::vector<T> inv_std_;
  Mode last_mode_ = Mode::Train;
};

enum class ActivationKind { ReLU, LeakyReLU, SiLU };

template <typename T>
T activate(ActivationKind kind, T x);
template <typename T>
T activate_grad(ActivationKind kind, T x);

template <typename T>
class Activation final : public Layer<T> {
 public:
  explicit Activation(ActivationKind kind) : kind_(kind) {}

  std::string_view type() const override;
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  ActivationKind kind_;
  BasicTensor<T> input_;
};

template <typename T>
class GlobalAvgPool final : public Layer<T> {
 public:
  std::string_view type() const override { return "global_avg_pool"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;

 private:
  Shape input_shape_;
};

template <typename T>
class Linear final : public Layer<T> {
 public:
  Linear(std::size_t in_features, std::size_t out_features, Rng& rng);

  std::string_view type() const override { return "linear"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<Parameter<T>*>& out) override;
  void set_name(const std::string& prefix) override;

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }

 private:
  std::size_t in_, out_;
  Parameter<T> weight_;  // [out, in]
  Parameter<T> bias_;    // [out]
  BasicTensor<T> input_;
};

template <typename T>
struct LossResult {
  T loss{};
  BasicTensor<T> grad;  // d loss / d logits
  std::size_t correct = 0;
};

// Mean softmax cross-entropy over the batch; logits are [B, K].
template <typename T>
LossResult<T> softmax_cross_entropy(const BasicTensor<T>& logits,
                                    const std::vector<std::uint8_t>& labels);

}  // namespace tpnet::nn
