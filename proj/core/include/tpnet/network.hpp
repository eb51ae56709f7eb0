#pragma once

#include <cstdint>
#include <memory>
#include <string_view>
#include <vector>

#include "tpnet/models.hpp"
#include "tpnet/nn.hpp"
#include "tpnet/tp_layer.hpp"

namespace tpnet::models {

template <typename T>
class Sequential final : public nn::Layer<T> {
 public:
  void add(std::unique_ptr<nn::Layer<T>> layer) { layers_.push_back(std::move(layer)); }
  bool empty() const { return layers_.empty(); }
  const std::vector<std::unique_ptr<nn::Layer<T>>>& layers() const { return layers_; }

  std::string_view type() const override { return "sequential"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, nn::Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;
  void collect_buffers(std::vector<nn::Buffer<T>>& out) override;

 private:
  std::vector<std::unique_ptr<nn::Layer<T>>> layers_;
};

// relu(body(x) + shortcut(x)); an empty shortcut is the identity.
template <typename T>
class ResidualBlock final : public nn::Layer<T> {
 public:
  ResidualBlock(Sequential<T> body, Sequential<T> shortcut)
      : body_(std::move(body)), shortcut_(std::move(shortcut)) {}

  std::string_view type() const override { return "residual_block"; }
  BasicTensor<T> forward(const BasicTensor<T>& x, nn::Mode mode) override;
  BasicTensor<T> backward(const BasicTensor<T>& grad_out) override;
  void collect_parameters(std::vector<nn::Parameter<T>*>& out) override;
  void collect_buffers(std::vector<nn::Buffer<T>>& out) override;

  Sequential<T>& body() { return body_; }
  Sequential<T>& shortcut() { return shortcut_; }

 private:
  Sequential<T> body_, shortcut_;
  BasicTensor<T> sum_;
};

// Executable model built from a ModelGraph. Layers are created in graph
// order from a single RNG, so a seed fixes every initial value.
template <typename T>
class Network {
 public:
  Network(const ModelGraph& graph, std::uint64_t seed);

  const ModelGraph& graph() const { return graph_; }

  // x is [B, 3, S, S]; returns logits [B, classes]. Train mode records the
  // tape consumed by backward.
  BasicTensor<T> forward(const BasicTensor<T>& x, nn::Mode mode);
  // Accumulates parameter grads and returns d loss / d input.
  BasicTensor<T> backward(const BasicTensor<T>& grad_logits);

  std::vector<nn::Parameter<T>*> parameters();
  std::vector<nn::Buffer<T>> buffers();
  void zero_grad();
  std::size_t parameter_count();

  // Leaf layers in execution order (blocks expanded).
  std::vector<nn::Layer<T>*> leaves();
  std::vector<tp::TPLayer<T>*> tp_layers();
  std::size_t count_layers(std::string_view type);

 private:
  ModelGraph graph_;
  std::vector<std::unique_ptr<nn::Layer<T>>> top_;
  nn::Tape<T> tape_;
};

extern template class Sequential<float>;
extern template class Sequential<double>;
extern template class ResidualBlock<float>;
extern template class ResidualBlock<double>;
extern template class Network<float>;
extern template class Network<double>;

}  // namespace tpnet::models
