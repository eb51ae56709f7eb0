#include "tpnet/accounting.hpp"

#include <cmath>
#include <iomanip>
#include <locale>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace tpnet::accounting {

using models::LayerKind;
using models::LayerSpec;

std::uint64_t CostReport::total_params() const {
  return std::accumulate(rows.begin(), rows.end(), std::uint64_t{0},
                         [](std::uint64_t s, const CostRow& r) { return s + r.params; });
}

std::uint64_t CostReport::total_macs() const {
  return std::accumulate(rows.begin(), rows.end(), std::uint64_t{0},
                         [](std::uint64_t s, const CostRow& r) { return s + r.macs; });
}

std::uint64_t fast_transform_macs(std::size_t n) {
  if (n < 2) return 0;
  const double N = static_cast<double>(n);
  const double v = 2.5 * N * N * std::log2(N) + N * N / 3.0 - 6.0 * N + 62.0 / 3.0;
  return static_cast<std::uint64_t>(std::llround(v));
}

std::uint64_t tp_macs(const tp::TPConfig& c, TransformCost cost) {
  c.validate();
  const std::uint64_t gh = c.grid_height(), gw = c.grid_width();
  const std::uint64_t cin = c.in_channels, cout = c.out_channels, p = c.branches;
  std::uint64_t transform = 0;
  if (c.kind != transforms::TransformKind::HT) {
    if (cost == TransformCost::MatrixProduct) {
      // Dense separable products; the padded grid stands in for the input
      // and output extents except when downsampling.
      const std::uint64_t ih = c.downsample ? c.height : gh;
      const std::uint64_t iw = c.downsample ? c.width : gw;
      const std::uint64_t fwd = ih * iw * gw + gh * ih * gw;
      const std::uint64_t inv = gh * gw * gw + gh * gh * gw;
      transform = fwd * cin + inv * cout;
    } else {
      const std::size_t in_n = c.downsample ? c.height : gh;
      transform = fast_transform_macs(in_n) * cin + fast_transform_macs(gh) * cout;
    }
  }
  const std::uint64_t grid = gh * gw;
  const std::uint64_t scaling = c.scaling ? p * grid * cin : 0;
  const std::uint64_t mixing = p * grid * cin * cout;
  return transform + scaling + mixing;
}

std::uint64_t layer_params(const LayerSpec& l) {
  switch (l.kind) {
    case LayerKind::Conv:
      return std::uint64_t{l.kernel} * l.kernel * l.in_channels * l.out_channels;
    case LayerKind::BatchNorm:
      return 2 * std::uint64_t{l.out_channels};
    case LayerKind::TP:
      return tp::tp_param_count(l.tp);
    case LayerKind::Linear:
      return std::uint64_t{l.in_channels} * l.out_channels + l.out_channels;
    case LayerKind::ReLU:
    case LayerKind::GlobalAvgPool:
      return 0;
  }
  throw std::invalid_argument("accounting: unknown layer type for '" + l.name + "'");
}

std::uint64_t layer_macs(const LayerSpec& l, const MacOptions& o) {
  const std::uint64_t elems = std::uint64_t{l.out_channels} * l.out_height * l.out_width;
  switch (l.kind) {
    case LayerKind::Conv:
      return std::uint64_t{l.kernel} * l.kernel * l.out_height * l.out_width * l.in_channels *
             l.out_channels;
    case LayerKind::BatchNorm:
      return o.count_batchnorm ? 2 * elems : 0;
    case LayerKind::ReLU:
      return o.count_activations && !l.after_residual_add ? elems : 0;
    case LayerKind::TP:
      return tp_macs(l.tp, o.transform);
    case LayerKind::Linear:
      return std::uint64_t{l.in_channels} * l.out_channels + l.out_channels;
    case LayerKind::GlobalAvgPool:
      return 0;
  }
  throw std::invalid_argument("accounting: unknown layer type for '" + l.name + "'");
}

namespace {

std::string convention_tag(const models::ModelGraph& g, const MacOptions& o) {
  std::string tag = o.transform == TransformCost::MatrixProduct ? "matrix-product-transform"
                                                                 : "fast-transform";
  for (const auto* l : g.layers()) {
    if (l->kind == LayerKind::TP && l->tp.kind == transforms::TransformKind::HT) {
      tag += ",ht-free";
      break;
    }
  }
  return tag;
}

}  // namespace

CostReport count(const models::ModelGraph& graph, const MacOptions& options) {
  CostReport r;
  r.variant = graph.variant.name();
  r.convention = convention_tag(graph, options);
  for (const auto* l : graph.layers()) {
    r.rows.push_back({l->name, std::string(models::to_string(l->kind)), layer_params(*l),
                      layer_macs(*l, options)});
  }
  return r;
}

CostReport count_params(const models::ModelGraph& graph) {
  CostReport r = count(graph);
  for (auto& row : r.rows) row.macs = 0;
  return r;
}

CostReport count_macs(const models::ModelGraph& graph, const MacOptions& options) {
  CostReport r = count(graph, options);
  for (auto& row : r.rows) row.params = 0;
  return r;
}

namespace {

struct Thousands : std::numpunct<char> {
  char do_thousands_sep() const override { return ','; }
  std::string do_grouping() const override { return "\3"; }
};

std::string grouped(std::uint64_t v) {
  std::ostringstream os;
  os.imbue(std::locale(std::locale::classic(), new Thousands));
  os << v;
  return os.str();
}

}  // namespace

std::string format_table(const CostReport& report) {
  std::size_t width = 5;
  for (const auto& row : report.rows) width = std::max(width, row.layer.size());
  std::ostringstream os;
  os << "variant: " << report.variant << "  (" << report.convention << ")\n";
  os << std::left << std::setw(static_cast<int>(width)) << "layer" << "  " << std::setw(6)
     << "kind" << std::right << std::setw(12) << "params" << std::setw(14) << "macs" << '\n';
  for (const auto& row : report.rows) {
    os << std::left << std::setw(static_cast<int>(width)) << row.layer << "  " << std::setw(6)
       << row.kind << std::right << std::setw(12) << row.params << std::setw(14) << row.macs
       << '\n';
  }
  os << std::left << std::setw(static_cast<int>(width)) << "total" << "  " << std::setw(6) << ""
     << std::right << std::setw(12) << report.total_params() << std::setw(14)
     << report.total_macs() << '\n';
  os << "total params: " << grouped(report.total_params()) << '\n';
  os << std::fixed << std::setprecision(2) << "total MACs: "
     << static_cast<double>(report.total_macs()) / 1e6 << "M\n";
  return os.str();
}

std::string format_csv(const CostReport& report) {
  std::ostringstream os;
  os << "layer,params,macs\n";
  for (const auto& row : report.rows) os << row.layer << ',' << row.params << ',' << row.macs << '\n';
  os << "total," << report.total_params() << ',' << report.total_macs() << '\n';
  return os.str();
}

}  // namespace tpnet::accounting
