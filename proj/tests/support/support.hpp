#pragma once

// Shared test fixtures: closed-form count oracles written independently of
// the accounting module, published reference rows, and the overfit smoke run.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "tpnet/cifar10.hpp"
#include "tpnet/models.hpp"

namespace tpnet::support {

// Parameters of ResNet-20 variants enumerated stage by stage from the
// per-layer formulas (conv K^2 Cin Cout, BN 2C, TP sites P(2N^2 + C^2)).
std::uint64_t oracle_params(const models::VariantSpec& spec);

// MACs under the matrix-product transform convention. With
// `norm_and_activation` BN adds 2 and a non-fused ReLU 1 per output element.
// Not defined for the all-replaced model.
std::uint64_t oracle_macs(const models::VariantSpec& spec, bool norm_and_activation);

// Closed-form baseline-minus-variant MACs for P-channel TP variants:
// sum over sites of 9 N^2 C^2 - (T + P N^2 C^2 + P N^2 C), T = 4 N^3 C for
// DCT/BWT and 0 for HT.
std::int64_t oracle_mac_delta(const models::VariantSpec& spec);

struct PublishedRow {
  std::string variant;
  std::uint64_t params;
  double mmacs;  // 0 when not published
};
// CIFAR-10 ResNet-20 rows: main results table.
std::vector<PublishedRow> table5();

struct AblationRow {
  std::string label;
  models::VariantSpec spec;
  std::uint64_t params;
};
// CIFAR-10 ResNet-20 rows of the ablation table.
std::vector<AblationRow> table6();

struct OverfitResult {
  bool passed = false;
  std::size_t steps = 0;
  double loss = 0.0;
};
// Full-batch SGD (lr 0.1, momentum 0.9, wd 1e-4) on a fixed 64-image set
// until the batch loss drops below `target` or `max_steps` is reached.
OverfitResult overfit_smoke(const models::VariantSpec& spec, const data::Dataset& images,
                            std::size_t max_steps = 200, double target = 0.1);

// 64 CIFAR-10 training images when the dataset is available
// ($TPNET_CIFAR10_DIR), else 64 synthetic ones.
data::Dataset overfit_images();

class TempDir {
 public:
  TempDir();
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

}  // namespace tpnet::support
