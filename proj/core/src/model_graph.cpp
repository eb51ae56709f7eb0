#include <algorithm>
#include <charconv>
#include <stdexcept>

#include "tpnet/models.hpp"

namespace tpnet::models {

namespace {

LayerSpec conv(std::string name, std::size_t cin, std::size_t cout, std::size_t size,
               std::size_t kernel, std::size_t stride) {
  LayerSpec l;
  l.kind = LayerKind::Conv;
  l.name = std::move(name);
  l.in_channels = cin;
  l.out_channels = cout;
  l.in_height = l.in_width = size;
  l.kernel = kernel;
  l.stride = stride;
  l.padding = kernel / 2;
  l.out_height = l.out_width = (size + 2 * l.padding - kernel) / stride + 1;
  return l;
}

LayerSpec pointwise(LayerKind kind, std::string name, std::size_t channels, std::size_t size) {
  LayerSpec l;
  l.kind = kind;
  l.name = std::move(name);
  l.in_channels = l.out_channels = channels;
  l.in_height = l.in_width = l.out_height = l.out_width = size;
  return l;
}

LayerSpec tp_layer(std::string name, const VariantSpec& v, std::size_t cin, std::size_t cout,
                   std::size_t size, bool downsample) {
  LayerSpec l;
  l.kind = LayerKind::TP;
  l.name = std::move(name);
  l.tp = tp::make_tp_config(v.kind, cin, size, size, v.channels);
  l.tp.out_channels = cout;
  l.tp.downsample = downsample;
  l.tp.nonlinearity = v.nonlinearity;
  l.tp.scaling = v.tp_scaling;
  const bool shape_preserving = cin == cout && !downsample;
  l.tp.shortcut = shape_preserving && v.tp_shortcut.value_or(v.channels == 1);
  l.tp.validate();
  l.in_channels = cin;
  l.out_channels = cout;
  l.in_height = l.in_width = size;
  l.out_height = l.out_width = l.tp.out_height();
  return l;
}

}  // namespace

void VariantSpec::validate() const {
  if (channels == 0) throw std::invalid_argument("variant: channel count P must be >= 1");
  if (replace_all && (!tp || channels != 1 || kind != TransformKind::DCT)) {
    throw std::invalid_argument("variant: replacing every convolution needs P = 1 and the DCT");
  }
  if (extra_tp_before_gap && replace_all) {
    throw std::invalid_argument("variant: extra layer before pooling is not combined with "
                                "full replacement");
  }
  if (input_size < 4 || input_size % 4) {
    throw std::invalid_argument("variant: input size must be a positive multiple of 4");
  }
  if (num_classes < 2) throw std::invalid_argument("variant: need at least 2 classes");
}

std::string VariantSpec::name() const {
  std::string base;
  if (replace_all) {
    base = "all-dct";
  } else if (tp) {
    base = std::to_string(channels) + "c-" + std::string(transforms::to_string(kind));
  } else {
    base = "resnet20";
  }
  if (extra_tp_before_gap) base += "+1c-dct-p";
  return base;
}

VariantSpec parse_variant(std::string_view name) {
  VariantSpec v;
  std::string s(name);
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  const std::string extra = "+1c-dct-p";
  if (s.size() > extra.size() && s.ends_with(extra)) {
    v.extra_tp_before_gap = true;
    s.resize(s.size() - extra.size());
  }
  if (s == "resnet20" || s == "resnet-20" || s == "baseline") {
    return v;
  }
  if (s == "all-dct") {
    v.tp = true;
    v.replace_all = true;
    return v;
  }
  // <P>c-<kind>
  const auto dash = s.find("c-");
  std::size_t p = 0;
  if (dash != std::string::npos && dash > 0) {
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + dash, p);
    if (ec == std::errc() && ptr == s.data() + dash && p > 0) {
      v.tp = true;
      v.channels = p;
      try {
        v.kind = transforms::parse_transform_kind(s.substr(dash + 2));
      } catch (const std::invalid_argument& e) {
        throw std::invalid_argument("unknown variant '" + std::string(name) + "': " + e.what());
      }
      return v;
    }
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

std::string_view to_string(LayerKind kind) {
  switch (kind) {
    case LayerKind::Conv: return "conv";
    case LayerKind::BatchNorm: return "bn";
    case LayerKind::ReLU: return "relu";
    case LayerKind::TP: return "tp";
    case LayerKind::GlobalAvgPool: return "gap";
    case LayerKind::Linear: return "linear";
  }
  return "?";
}

std::vector<const LayerSpec*> ModelGraph::layers() const {
  std::vector<const LayerSpec*> out;
  for (const auto& l : stem) out.push_back(&l);
  for (const auto& b : blocks) {
    for (const auto& l : b.body) out.push_back(&l);
    for (const auto& l : b.shortcut) out.push_back(&l);
    out.push_back(&b.output_relu);
  }
  for (const auto& l : head) out.push_back(&l);
  return out;
}

ModelGraph build_resnet20(const VariantSpec& spec) {
  spec.validate();
  ModelGraph g;
  g.variant = spec;
  constexpr std::size_t kBlocksPerStage = 3;
  constexpr std::size_t kWidths[] = {16, 32, 64};

  std::size_t size = spec.input_size;
  g.stem.push_back(conv("conv1", 3, kWidths[0], size, 3, 1));
  g.stem.push_back(pointwise(LayerKind::BatchNorm, "bn1", kWidths[0], size));
  g.stem.push_back(pointwise(LayerKind::ReLU, "relu1", kWidths[0], size));

  std::size_t in_c = kWidths[0];
  for (std::size_t stage = 0; stage < 3; ++stage) {
    const std::size_t out_c = kWidths[stage];
    for (std::size_t i = 0; i < kBlocksPerStage; ++i) {
      const bool down = stage > 0 && i == 0;
      const std::size_t stride = down ? 2 : 1;
      const std::size_t out_size = size / stride;
      BlockSpec b;
      b.name = "conv" + std::to_string(stage + 2) + "_" + std::to_string(i + 1);
      if (spec.replace_all) {
        b.body.push_back(tp_layer(b.name + ".tp1", spec, in_c, out_c, size, down));
      } else {
        b.body.push_back(conv(b.name + ".conv1", in_c, out_c, size, 3, stride));
      }
      b.body.push_back(pointwise(LayerKind::BatchNorm, b.name + ".bn1", out_c, out_size));
      b.body.push_back(pointwise(LayerKind::ReLU, b.name + ".relu1", out_c, out_size));
      if (spec.tp) {
        b.body.push_back(tp_layer(b.name + ".tp2", spec, out_c, out_c, out_size, false));
      } else {
        b.body.push_back(conv(b.name + ".conv2", out_c, out_c, out_size, 3, 1));
      }
      b.body.push_back(pointwise(LayerKind::BatchNorm, b.name + ".bn2", out_c, out_size));
      if (down || in_c != out_c) {
        b.shortcut.push_back(conv(b.name + ".shortcut.conv", in_c, out_c, size, 1, stride));
        b.shortcut.push_back(pointwise(LayerKind::BatchNorm, b.name + ".shortcut.bn", out_c, out_size));
      }
      b.output_relu = pointwise(LayerKind::ReLU, b.name + ".relu2", out_c, out_size);
      b.output_relu.after_residual_add = true;
      g.blocks.push_back(std::move(b));
      in_c = out_c;
      size = out_size;
    }
  }

  if (spec.extra_tp_before_gap) {
    VariantSpec extra = spec;
    extra.kind = TransformKind::DCT;
    extra.channels = 1;
    extra.tp_shortcut.reset();
    extra.nonlinearity = tp::Nonlinearity::SoftThreshold;
    extra.tp_scaling = true;
    g.head.push_back(tp_layer("extra.tp", extra, in_c, in_c, size, false));
    g.head.push_back(pointwise(LayerKind::BatchNorm, "extra.bn", in_c, size));
  }
  LayerSpec gap = pointwise(LayerKind::GlobalAvgPool, "gap", in_c, size);
  gap.out_height = gap.out_width = 1;
  g.head.push_back(gap);
  LayerSpec fc;
  fc.kind = LayerKind::Linear;
  fc.name = "fc";
  fc.in_channels = in_c;
  fc.out_channels = spec.num_classes;
  fc.in_height = fc.in_width = fc.out_height = fc.out_width = 1;
  g.head.push_back(fc);
  return g;
}

std::vector<ReplaceableSite> list_replaceable_sites(const ModelGraph& graph) {
  std::vector<ReplaceableSite> sites;
  for (std::size_t bi = 0; bi < graph.blocks.size(); ++bi) {
    const auto& body = graph.blocks[bi].body;
    std::vector<const LayerSpec*> picked;
    for (const auto& l : body)
      if (l.kind == LayerKind::TP) picked.push_back(&l);
    if (picked.empty()) {
      std::size_t seen = 0;
      for (const auto& l : body)
        if (l.kind == LayerKind::Conv && l.kernel == 3 && ++seen == 2) picked.push_back(&l);
    }
    for (const auto* l : picked) {
      sites.push_back({l->name, bi, l->kind, l->out_channels, l->out_height, l->out_width});
    }
  }
  return sites;
}

}  // namespace tpnet::models
