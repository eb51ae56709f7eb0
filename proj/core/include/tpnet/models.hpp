#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpnet/tp_layer.hpp"

namespace tpnet::models {

using transforms::TransformKind;

struct VariantSpec {
  bool tp = false;  // false: plain ResNet-20
  TransformKind kind = TransformKind::DCT;
  std::size_t channels = 1;  // P
  bool extra_tp_before_gap = false;
  bool replace_all = false;
  tp::Nonlinearity nonlinearity = tp::Nonlinearity::SoftThreshold;
  std::optional<bool> tp_shortcut;
  bool tp_scaling = true;
  std::size_t input_size = 32;
  std::size_t num_classes = 10;

  void validate() const;
  std::string name() const;
};

// "resnet20", "1c-dct", "3c-ht", "3c-bwt", "resnet20+1c-dct-p", "all-dct", ...
VariantSpec parse_variant(std::string_view name);

enum class LayerKind { Conv, BatchNorm, ReLU, TP, GlobalAvgPool, Linear };
std::string_view to_string(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  std::string name;
  std::size_t in_channels = 0, out_channels = 0;
  std::size_t in_height = 0, in_width = 0, out_height = 0, out_width = 0;
  std::size_t kernel = 0, stride = 1, padding = 0;  // Conv
  tp::TPConfig tp;                                   // TP
  bool after_residual_add = false;                   // ReLU closing a block
};

struct BlockSpec {
  std::string name;
  std::vector<LayerSpec> body;
  std::vector<LayerSpec> shortcut;  // empty: identity
  LayerSpec output_relu;
};

// Immutable description of a ResNet variant: stem, residual blocks, head.
struct ModelGraph {
  VariantSpec variant;
  std::vector<LayerSpec> stem;
  std::vector<BlockSpec> blocks;
  std::vector<LayerSpec> head;

  // Every layer in execution order (block body, then shortcut, then relu).
  std::vector<const LayerSpec*> layers() const;
};

ModelGraph build_resnet20(const VariantSpec& spec);

struct ReplaceableSite {
  std::string layer;
  std::size_t block = 0;
  LayerKind kind = LayerKind::Conv;
  std::size_t channels = 0, height = 0, width = 0;
};

// Layers a TP variant substitutes: in each block the TP layers if any,
// otherwise the second 3x3 convolution.
std::vector<ReplaceableSite> list_replaceable_sites(const ModelGraph& graph);

}  // namespace tpnet::models
