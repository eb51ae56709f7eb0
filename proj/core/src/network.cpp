#include "tpnet/network.hpp"

#include <stdexcept>

namespace tpnet::models {

template <typename T>
BasicTensor<T> Sequential<T>::forward(const BasicTensor<T>& x, nn::Mode mode) {
  BasicTensor<T> y = x;
  for (auto& l : layers_) y = l->forward(y, mode);
  return y;
}

template <typename T>
BasicTensor<T> Sequential<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> g = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = (*it)->backward(g);
  return g;
}

template <typename T>
void Sequential<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  for (auto& l : layers_) l->collect_parameters(out);
}

template <typename T>
void Sequential<T>::collect_buffers(std::vector<nn::Buffer<T>>& out) {
  for (auto& l : layers_) l->collect_buffers(out);
}

template <typename T>
BasicTensor<T> ResidualBlock<T>::forward(const BasicTensor<T>& x, nn::Mode mode) {
  sum_ = body_.forward(x, mode);
  if (shortcut_.empty()) {
    sum_ += x;
  } else {
    sum_ += shortcut_.forward(x, mode);
  }
  BasicTensor<T> y = sum_;
  for (auto& v : y.values()) v = v > T(0) ? v : T(0);
  return y;
}

template <typename T>
BasicTensor<T> ResidualBlock<T>::backward(const BasicTensor<T>& grad_out) {
  BasicTensor<T> g = grad_out;
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(sum_[i] > T(0))) g[i] = T(0);
  BasicTensor<T> dx = body_.backward(g);
  if (shortcut_.empty()) {
    dx += g;
  } else {
    dx += shortcut_.backward(g);
  }
  return dx;
}

template <typename T>
void ResidualBlock<T>::collect_parameters(std::vector<nn::Parameter<T>*>& out) {
  body_.collect_parameters(out);
  shortcut_.collect_parameters(out);
}

template <typename T>
void ResidualBlock<T>::collect_buffers(std::vector<nn::Buffer<T>>& out) {
  body_.collect_buffers(out);
  shortcut_.collect_buffers(out);
}

namespace {

template <typename T>
std::unique_ptr<nn::Layer<T>> make_layer(const LayerSpec& s, nn::Rng& rng) {
  std::unique_ptr<nn::Layer<T>> l;
  switch (s.kind) {
    case LayerKind::Conv:
      l = std::make_unique<nn::Conv2d<T>>(s.in_channels, s.out_channels, s.kernel, s.stride,
                                          s.padding, rng);
      break;
    case LayerKind::BatchNorm:
      l = std::make_unique<nn::BatchNorm2d<T>>(s.out_channels);
      break;
    case LayerKind::ReLU:
      l = std::make_unique<nn::Activation<T>>(nn::ActivationKind::ReLU);
      break;
    case LayerKind::TP:
      l = std::make_unique<tp::TPLayer<T>>(s.tp, rng);
      break;
    case LayerKind::GlobalAvgPool:
      l = std::make_unique<nn::GlobalAvgPool<T>>();
      break;
    case LayerKind::Linear:
      l = std::make_unique<nn::Linear<T>>(s.in_channels, s.out_channels, rng);
      break;
  }
  l->set_name(s.name);
  return l;
}

template <typename T>
void walk(nn::Layer<T>* l, std::vector<nn::Layer<T>*>& out) {
  if (auto* seq = dynamic_cast<Sequential<T>*>(l)) {
    for (auto& c : seq->layers()) walk(c.get(), out);
  } else if (auto* blk = dynamic_cast<ResidualBlock<T>*>(l)) {
    walk<T>(&blk->body(), out);
    walk<T>(&blk->shortcut(), out);
  } else {
    out.push_back(l);
  }
}

}  // namespace

template <typename T>
Network<T>::Network(const ModelGraph& graph, std::uint64_t seed) : graph_(graph) {
  nn::Rng rng(seed);
  for (const auto& s : graph_.stem) top_.push_back(make_layer<T>(s, rng));
  for (const auto& b : graph_.blocks) {
    Sequential<T> body, shortcut;
    for (const auto& s : b.body) body.add(make_layer<T>(s, rng));
    for (const auto& s : b.shortcut) shortcut.add(make_layer<T>(s, rng));
    auto block = std::make_unique<ResidualBlock<T>>(std::move(body), std::move(shortcut));
    block->set_name(b.name);
    top_.push_back(std::move(block));
  }
  for (const auto& s : graph_.head) top_.push_back(make_layer<T>(s, rng));
}

template <typename T>
BasicTensor<T> Network<T>::forward(const BasicTensor<T>& x, nn::Mode mode) {
  const std::size_t s = graph_.variant.input_size;
  if (x.rank() != 4 || x.dim(1) != 3 || x.dim(2) != s || x.dim(3) != s) {
    throw std::invalid_argument("network: expected input [B, 3, " + std::to_string(s) + ", " +
                                std::to_string(s) + "], got " + shape_to_string(x.shape()));
  }
  tape_.clear();
  BasicTensor<T> y = x;
  for (auto& l : top_) {
    y = l->forward(y, mode);
    if (mode == nn::Mode::Train) tape_.record(l.get());
  }
  return y;
}

template <typename T>
BasicTensor<T> Network<T>::backward(const BasicTensor<T>& grad_logits) {
  if (tape_.size() != top_.size()) {
    throw std::logic_error("network: backward needs a preceding training-mode forward");
  }
  return tape_.backward(grad_logits);
}

template <typename T>
std::vector<nn::Parameter<T>*> Network<T>::parameters() {
  std::vector<nn::Parameter<T>*> out;
  for (auto& l : top_) l->collect_parameters(out);
  return out;
}

template <typename T>
std::vector<nn::Buffer<T>> Network<T>::buffers() {
  std::vector<nn::Buffer<T>> out;
  for (auto& l : top_) l->collect_buffers(out);
  return out;
}

template <typename T>
void Network<T>::zero_grad() {
  for (auto* p : parameters()) p->grad.zero();
}

template <typename T>
std::size_t Network<T>::parameter_count() {
  std::size_t n = 0;
  for (auto* p : parameters()) n += p->value.size();
  return n;
}

template <typename T>
std::vector<nn::Layer<T>*> Network<T>::leaves() {
  std::vector<nn::Layer<T>*> out;
  for (auto& l : top_) walk(l.get(), out);
  return out;
}

template <typename T>
std::vector<tp::TPLayer<T>*> Network<T>::tp_layers() {
  std::vector<tp::TPLayer<T>*> out;
  for (auto* l : leaves())
    if (auto* t = dynamic_cast<tp::TPLayer<T>*>(l)) out.push_back(t);
  return out;
}

template <typename T>
std::size_t Network<T>::count_layers(std::string_view type) {
  std::size_t n = 0;
  for (auto* l : leaves()) n += l->type() == type;
  return n;
}

template class Sequential<float>;
template class Sequential<double>;
template class ResidualBlock<float>;
template class ResidualBlock<double>;
template class Network<float>;
template class Network<double>;

}  // namespace tpnet::models
