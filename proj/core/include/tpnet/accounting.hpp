#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tpnet/models.hpp"

namespace tpnet::accounting {

enum class TransformCost {
  MatrixProduct,  // 2N^3 per channel and 2D DCT/BWT
  FastTransform,  // (5/2 N^2 log2 N + N^2/3 - 6N + 62/3) per channel and 2D DCT/BWT
};

struct MacOptions {
  TransformCost transform = TransformCost::MatrixProduct;
  // Normalization and activation cost: BN 2 per element, ReLU 1 per element
  // except the one fused with the residual addition. Disable both to count
  // only multiplies in conv, TP and linear layers.
  bool count_batchnorm = true;
  bool count_activations = true;
};

struct CostRow {
  std::string layer;
  std::string kind;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
};

struct CostReport {
  std::string variant;
  std::string convention;  // e.g. "matrix-product-transform,ht-free"
  std::vector<CostRow> rows;

  std::uint64_t total_params() const;
  std::uint64_t total_macs() const;
};

std::uint64_t layer_params(const models::LayerSpec& layer);
std::uint64_t layer_macs(const models::LayerSpec& layer, const MacOptions& options);
std::uint64_t tp_macs(const tp::TPConfig& config, TransformCost cost);
// Fast-algorithm cost of one 2D DCT/BWT of an n x n single-channel map.
std::uint64_t fast_transform_macs(std::size_t n);

CostReport count_params(const models::ModelGraph& graph);
CostReport count_macs(const models::ModelGraph& graph, const MacOptions& options = {});
// Parameters and MACs in one report.
CostReport count(const models::ModelGraph& graph, const MacOptions& options = {});

std::string format_table(const CostReport& report);
std::string format_csv(const CostReport& report);

}  // namespace tpnet::accounting
