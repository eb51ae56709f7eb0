#include "support.hpp"

#include <cstdlib>
#include <numeric>
#include <random>
#include <stdexcept>

#include "tpnet/trainer.hpp"

namespace tpnet::support {

namespace {

using models::VariantSpec;
using tp::Nonlinearity;
using transforms::TransformKind;

struct Stage {
  std::uint64_t c, n;
};
constexpr Stage kStages[] = {{16, 32}, {32, 16}, {64, 8}};

// One TP branch at grid g mixing cin -> cout.
std::uint64_t branch_params(const VariantSpec& v, std::uint64_t g, std::uint64_t cin,
                            std::uint64_t cout) {
  std::uint64_t p = cin * cout;
  if (v.tp_scaling) p += g * g;
  if (v.nonlinearity == Nonlinearity::ReLUPlain) {
    p += cout;
  } else {
    p += g * g;
  }
  return p;
}

}  // namespace

std::uint64_t oracle_params(const VariantSpec& v) {
  std::uint64_t total = 3 * 16 * 9 + 2 * 16;  // stem conv + BN
  for (std::size_t s = 0; s < 3; ++s) {
    const auto [c, n] = kStages[s];
    for (std::size_t b = 0; b < 3; ++b) {
      const std::uint64_t cin = (s > 0 && b == 0) ? c / 2 : c;
      if (v.replace_all) {
        total += branch_params(v, n, cin, c) + branch_params(v, n, c, c);
      } else {
        total += 9 * cin * c;
        total += v.tp ? v.channels * branch_params(v, n, c, c) : 9 * c * c;
      }
      total += 2 * (2 * c);
      if (cin != c) total += cin * c + 2 * c;
    }
  }
  if (v.extra_tp_before_gap) total += 2 * 8 * 8 + 64 * 64 + 2 * 64;
  return total + 64 * 10 + 10;
}

std::uint64_t oracle_macs(const VariantSpec& v, bool norm_and_activation) {
  if (v.replace_all) throw std::invalid_argument("oracle_macs: all-replaced model");
  const std::uint64_t bn = norm_and_activation ? 2 : 0;
  const std::uint64_t act = norm_and_activation ? 1 : 0;
  auto tp_cost = [&](std::uint64_t c, std::uint64_t n, std::uint64_t p, TransformKind kind) {
    const std::uint64_t transform = kind == TransformKind::HT ? 0 : 4 * n * n * n * c;
    return transform + p * n * n * c * c + (v.tp_scaling ? p * n * n * c : 0);
  };
  std::uint64_t total = 9 * 3 * 16 * 32 * 32 + (bn + act) * 16 * 32 * 32;
  for (std::size_t s = 0; s < 3; ++s) {
    const auto [c, n] = kStages[s];
    const std::uint64_t plane = n * n;
    for (std::size_t b = 0; b < 3; ++b) {
      const std::uint64_t cin = (s > 0 && b == 0) ? c / 2 : c;
      total += 9 * cin * c * plane + (bn + act) * c * plane;
      total += v.tp ? tp_cost(c, n, v.channels, v.kind) : 9 * c * c * plane;
      total += bn * c * plane;
      if (cin != c) total += cin * c * plane + bn * c * plane;
    }
  }
  if (v.extra_tp_before_gap) {
    total += 4 * 8 * 8 * 8 * 64 + 8 * 8 * 64 * 64 + 8 * 8 * 64 + bn * 64 * 64;
  }
  return total + 64 * 10 + 10;
}

std::int64_t oracle_mac_delta(const VariantSpec& v) {
  std::int64_t delta = 0;
  for (const auto& [c0, n0] : kStages) {
    const auto c = static_cast<std::int64_t>(c0);
    const auto n = static_cast<std::int64_t>(n0);
    const auto p = static_cast<std::int64_t>(v.channels);
    const std::int64_t transform = v.kind == TransformKind::HT ? 0 : 4 * n * n * n * c;
    delta += 3 * (9 * n * n * c * c - (transform + p * n * n * c * c + p * n * n * c));
  }
  return delta;
}

std::vector<PublishedRow> table5() {
  return {{"resnet20", 272474, 41.32},       {"1c-dct", 151514, 30.79},
          {"3c-dct", 199898, 35.68},         {"1c-ht", 151514, 22.53},
          {"3c-ht", 199898, 27.42},          {"3c-bwt", 199898, 35.68},
          {"resnet20+1c-dct-p", 276826, 0.0}};
}

std::vector<AblationRow> table6() {
  auto v = [](const std::string& name) { return models::parse_variant(name); };
  auto with_nl = [&](Nonlinearity n) {
    VariantSpec s = v("1c-dct");
    s.nonlinearity = n;
    return s;
  };
  auto with_shortcut = [&](const std::string& name, bool on) {
    VariantSpec s = v(name);
    s.tp_shortcut = on;
    return s;
  };
  VariantSpec no_scaling = v("1c-dct");
  no_scaling.tp_scaling = false;
  return {
      {"1c-dct", v("1c-dct"), 151514},
      {"1c-dct shortcut off", with_shortcut("1c-dct", false), 151514},
      {"1c-dct without scaling", no_scaling, 147482},
      {"1c-dct relu-with-thresholds", with_nl(Nonlinearity::ReLUWithThresholds), 151514},
      {"1c-dct relu-plain", with_nl(Nonlinearity::ReLUPlain), 147818},
      {"1c-dct leaky-relu", with_nl(Nonlinearity::LeakyReLUWithThresholds), 151514},
      {"1c-dct silu", with_nl(Nonlinearity::SiLUWithThresholds), 151514},
      {"all-dct", v("all-dct"), 51034},
      {"2c-dct", v("2c-dct"), 175706},
      {"3c-dct", v("3c-dct"), 199898},
      {"3c-dct shortcut on", with_shortcut("3c-dct", true), 199898},
      {"4c-dct", v("4c-dct"), 224090},
      {"4c-dct shortcut on", with_shortcut("4c-dct", true), 224090},
      {"5c-dct", v("5c-dct"), 248282},
      {"5c-dct shortcut on", with_shortcut("5c-dct", true), 248282},
      {"2c-ht", v("2c-ht"), 175706},
      {"3c-ht", v("3c-ht"), 199898},
      {"4c-ht", v("4c-ht"), 224090},
      {"5c-ht", v("5c-ht"), 248282},
      {"6c-ht", v("6c-ht"), 272474},
  };
}

OverfitResult overfit_smoke(const VariantSpec& spec, const data::Dataset& images,
                            std::size_t max_steps, double target) {
  models::Network<float> net(models::build_resnet20(spec), 0);
  train::SGD<float> sgd(net.parameters(), 0.9, 1e-4);
  std::vector<std::size_t> idx(images.size());
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  const Tensor x = data::make_batch(images, idx, false, nullptr);
  const auto labels = data::batch_labels(images, idx);
  OverfitResult r;
  for (r.steps = 1; r.steps <= max_steps; ++r.steps) {
    r.loss = train::train_step(net, sgd, x, labels, 0.1).loss;
    if (r.loss < target) {
      r.passed = true;
      return r;
    }
  }
  r.steps = max_steps;
  return r;
}

data::Dataset overfit_images() {
  const char* env = std::getenv("TPNET_CIFAR10_DIR");
  if (env != nullptr) {
    if (auto dir = data::find_cifar10(env)) {
      return data::take(data::load_batch_file(*dir / "data_batch_1.bin"), 64);
    }
  }
  return data::synthetic(64, 0);
}

TempDir::TempDir() {
  std::random_device rd;
  path_ = std::filesystem::temp_directory_path() /
          ("tpnet-test-" + std::to_string(rd()) + std::to_string(rd()));
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

}  // namespace tpnet::support
