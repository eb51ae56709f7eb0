#include "tpnet/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numbers>
#include <random>
#include <sstream>

#include "tpnet/grad_check.hpp"
#include "tpnet/network.hpp"
#include "tpnet/tp_layer.hpp"
#include "tpnet/transforms.hpp"

namespace tpnet::verify {

using transforms::TransformKind;

bool Report::all_passed() const {
  return std::all_of(checks.begin(), checks.end(), [](const CheckResult& c) { return c.passed; });
}

void Report::append(const Report& other) {
  checks.insert(checks.end(), other.checks.begin(), other.checks.end());
}

namespace {

using Vec = std::vector<double>;

Vec random_vector(std::size_t n, std::mt19937_64& rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Vec v(n);
  for (auto& x : v) x = dist(rng);
  return v;
}

TensorD random_tensor(Shape shape, std::mt19937_64& rng) {
  TensorD t(std::move(shape));
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& x : t.values()) x = dist(rng);
  return t;
}

double max_abs(const Vec& a, const Vec& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
  return m;
}

void add(Report& r, std::string suite, std::string name, double measured, double tol) {
  r.checks.push_back({std::move(suite), std::move(name), measured <= tol, measured, tol});
}

Vec forward1d(TransformKind kind, const Vec& x) {
  switch (kind) {
    case TransformKind::DCT: return transforms::dct1d<double>(x);
    case TransformKind::HT: return transforms::ht1d<double>(x);
    case TransformKind::BWT:
      return transforms::bwt1d<double>(x, transforms::FilterBankSpec::bior13(x.size()));
  }
  return {};
}

Vec inverse1d(TransformKind kind, const Vec& x) {
  switch (kind) {
    case TransformKind::DCT: return transforms::idct1d<double>(x);
    case TransformKind::HT: return transforms::ht1d<double>(x);
    case TransformKind::BWT:
      return transforms::ibwt1d<double>(x, transforms::FilterBankSpec::bior13(x.size()));
  }
  return {};
}

}  // namespace

Report transform_suite() {
  Report r;
  std::mt19937_64 rng(7);
  constexpr double kTol = 1e-9;
  for (TransformKind kind : {TransformKind::DCT, TransformKind::HT, TransformKind::BWT}) {
    const std::string k(transforms::to_string(kind));
    for (std::size_t n : {2, 4, 8, 16, 32}) {
      double rt = 0.0, oracle = 0.0;
      const auto m = transforms::transform_matrix(kind, n, false);
      for (int trial = 0; trial < 5; ++trial) {
        const Vec x = random_vector(n, rng);
        const Vec X = forward1d(kind, x);
        rt = std::max(rt, max_abs(inverse1d(kind, X), x));
        const Eigen::VectorXd ref = m * Eigen::Map<const Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(n));
        oracle = std::max(oracle, max_abs(X, Vec(ref.data(), ref.data() + n)));
      }
      add(r, "transforms", k + " 1d round trip n=" + std::to_string(n), rt, kTol);
      add(r, "transforms", k + " 1d matches matrix n=" + std::to_string(n), oracle, kTol);

      const TensorD x = random_tensor({3, n, n}, rng);
      const TensorD fast = transforms::transform2d(x, kind, false);
      const TensorD ref = transforms::matrix_oracle2d(x, kind, false);
      add(r, "transforms", k + " 2d matches matrix oracle n=" + std::to_string(n),
          max_abs_diff(fast, ref), kTol);
      add(r, "transforms", k + " 2d round trip n=" + std::to_string(n),
          max_abs_diff(transforms::transform2d(fast, kind, true), x), kTol);
    }
  }
  for (std::size_t n : {3, 5, 6, 7, 12}) {
    const Vec x = random_vector(n, rng);
    add(r, "transforms", "dct 1d round trip n=" + std::to_string(n),
        max_abs(transforms::idct1d<double>(transforms::dct1d<double>(x)), x), kTol);
  }
  for (std::size_t n : {2, 8, 32}) {
    const Vec x = random_vector(n, rng);
    add(r, "transforms", "ht self-inverse n=" + std::to_string(n),
        max_abs(transforms::ht1d<double>(transforms::ht1d<double>(x)), x), kTol);
  }
  return r;
}

Report theorem_suite() {
  Report r;
  std::mt19937_64 rng(11);
  constexpr double kTol = 1e-9;
  for (std::size_t n : {2, 4, 8, 16}) {
    const double s = std::sqrt(static_cast<double>(n));
    auto residual = [&](const Vec& a, const Vec& x) {
      const Vec lhs = transforms::ht1d<double>(transforms::dyadic_convolve_oracle<double>(a, x));
      const Vec ha = transforms::ht1d<double>(a), hx = transforms::ht1d<double>(x);
      double m = 0.0;
      for (std::size_t k = 0; k < n; ++k) m = std::max(m, std::abs(lhs[k] - s * ha[k] * hx[k]));
      return m;
    };
    double impulses = 0.0, random = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j) {
        Vec a(n, 0.0), x(n, 0.0);
        a[i] = 1.0;
        x[j] = 1.0;
        impulses = std::max(impulses, residual(a, x));
      }
    for (int trial = 0; trial < 100; ++trial)
      random = std::max(random, residual(random_vector(n, rng), random_vector(n, rng)));
    add(r, "theorems", "dyadic convolution, impulse pairs n=" + std::to_string(n), impulses, kTol);
    add(r, "theorems", "dyadic convolution, 100 random pairs n=" + std::to_string(n), random, kTol);
  }
  for (std::size_t n : {2, 4, 8}) {
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      const Vec a = random_vector(n, rng), x = random_vector(n, rng);
      const Vec Y = transforms::dct1d<double>(transforms::symmetric_convolve_oracle<double>(a, x));
      const Vec X = transforms::dct1d<double>(x);
      for (std::size_t k = 0; k < n; ++k) {
        double spectrum = a[0];
        for (std::size_t j = 1; j < n; ++j)
          spectrum += 2 * a[j] * std::cos(std::numbers::pi * static_cast<double>(j * k) / static_cast<double>(n));
        worst = std::max(worst, std::abs(Y[k] - spectrum * X[k]));
      }
    }
    add(r, "theorems", "symmetric convolution, 100 random pairs n=" + std::to_string(n), worst, kTol);
  }
  return r;
}

Report gradient_suite() {
  Report r;
  constexpr double kTol = 1e-4;
  nn::Rng rng(3);
  auto check = [&](const std::string& name, nn::Layer<double>& layer, const TensorD& x,
                   nn::Mode mode = nn::Mode::Train) {
    const auto g = nn::grad_check_layer(layer, x, mode, rng);
    add(r, "gradients", name, g.checked ? g.max_rel_error : 1.0, kTol);
  };

  {
    nn::Conv2d<double> conv(3, 4, 3, 1, 1, rng);
    check("conv2d 3x3 stride 1", conv, random_tensor({2, 3, 6, 6}, rng));
    nn::Conv2d<double> down(3, 4, 3, 2, 1, rng);
    check("conv2d 3x3 stride 2", down, random_tensor({2, 3, 6, 6}, rng));
    nn::Conv2d<double> proj(3, 4, 1, 2, 0, rng);
    check("conv2d 1x1 stride 2", proj, random_tensor({2, 3, 6, 6}, rng));
  }
  {
    nn::BatchNorm2d<double> bn(3);
    check("batchnorm2d train", bn, random_tensor({4, 3, 3, 3}, rng));
    check("batchnorm2d eval", bn, random_tensor({4, 3, 3, 3}, rng), nn::Mode::Eval);
  }
  for (auto [kind, name] : {std::pair{nn::ActivationKind::ReLU, "relu"},
                            {nn::ActivationKind::LeakyReLU, "leaky relu"},
                            {nn::ActivationKind::SiLU, "silu"}}) {
    nn::Activation<double> act(kind);
    check(std::string("activation ") + name, act, random_tensor({2, 3, 4, 4}, rng));
  }
  {
    nn::GlobalAvgPool<double> gap;
    check("global average pool", gap, random_tensor({2, 3, 4, 4}, rng));
    nn::Linear<double> fc(5, 3, rng);
    check("linear", fc, random_tensor({4, 5}, rng));
  }
  {
    TensorD logits = random_tensor({4, 5}, rng);
    const std::vector<std::uint8_t> labels{0, 3, 4, 1};
    const auto analytic = nn::softmax_cross_entropy(logits, labels).grad;
    auto loss = [&] { return nn::softmax_cross_entropy(logits, labels).loss; };
    const auto g = nn::grad_check(loss, logits.values(), analytic.values());
    add(r, "gradients", "softmax cross-entropy", g.max_rel_error, kTol);
  }
  {
    TensorD x = random_tensor({2, 3, 4, 4}, rng), a = random_tensor({4, 4}, rng);
    const TensorD w = random_tensor({2, 3, 4, 4}, rng);
    auto loss = [&] {
      const TensorD y = tp::scale(x, a);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
      return s;
    };
    auto [dx, da] = tp::scale_backward(x, a, w);
    nn::GradCheckResult g = nn::grad_check(loss, x.values(), dx.values(), 1e-5, "x");
    nn::merge(g, nn::grad_check(loss, a.values(), da.values(), 1e-5, "a"));
    add(r, "gradients", "scaling", g.max_rel_error, kTol);

    TensorD t = random_tensor({4, 4}, rng);
    auto st_loss = [&] {
      const TensorD y = tp::soft_threshold(x, t);
      double s = 0;
      for (std::size_t i = 0; i < y.size(); ++i) s += w[i] * y[i];
      return s;
    };
    auto [sdx, sdt] = tp::soft_threshold_backward(x, t, w);
    nn::GradCheckResult gs = nn::grad_check(st_loss, x.values(), sdx.values(), 1e-5, "x");
    nn::merge(gs, nn::grad_check(st_loss, t.values(), sdt.values(), 1e-5, "t"));
    add(r, "gradients", "soft threshold (kinks skipped)", gs.max_rel_error, kTol);
  }
  for (TransformKind kind : {TransformKind::DCT, TransformKind::HT, TransformKind::BWT}) {
    for (std::size_t p : {1, 3}) {
      auto cfg = tp::make_tp_config(kind, 3, 8, 8, p);
      tp::TPLayer<double> layer(cfg, rng);
      check("tp layer " + std::string(transforms::to_string(kind)) + " P=" + std::to_string(p),
            layer, random_tensor({2, 3, 8, 8}, rng));
    }
    auto padded = tp::make_tp_config(kind, 2, 6, 5, 1);
    tp::TPLayer<double> layer(padded, rng);
    check("tp layer " + std::string(transforms::to_string(kind)) + " 6x5 input", layer,
          random_tensor({2, 2, 6, 5}, rng));
  }
  for (tp::Nonlinearity n :
       {tp::Nonlinearity::ReLUWithThresholds, tp::Nonlinearity::ReLUPlain,
        tp::Nonlinearity::LeakyReLUWithThresholds, tp::Nonlinearity::SiLUWithThresholds}) {
    auto cfg = tp::make_tp_config(TransformKind::DCT, 3, 4, 4, 2);
    cfg.nonlinearity = n;
    tp::TPLayer<double> layer(cfg, rng);
    check("tp layer " + std::string(tp::to_string(n)), layer, random_tensor({2, 3, 4, 4}, rng));
  }
  {
    auto cfg = tp::make_tp_config(TransformKind::DCT, 3, 4, 4, 1);
    cfg.scaling = false;
    tp::TPLayer<double> layer(cfg, rng);
    check("tp layer without scaling", layer, random_tensor({2, 3, 4, 4}, rng));
    auto down = tp::make_tp_config(TransformKind::DCT, 2, 8, 8, 1);
    down.out_channels = 4;
    down.downsample = true;
    down.shortcut = false;
    tp::TPLayer<double> ds(down, rng);
    check("tp layer downsampling 8x8 -> 4x4", ds, random_tensor({2, 2, 8, 8}, rng));
  }
  {
    // Whole network in training mode: the input and three coordinates of
    // every parameter tensor.
    models::VariantSpec spec = models::parse_variant("3c-dct");
    spec.input_size = 8;
    models::Network<double> net(models::build_resnet20(spec), 5);
    TensorD x = random_tensor({2, 3, 8, 8}, rng);
    const std::vector<std::uint8_t> labels{1, 7};
    auto buffers = net.buffers();
    std::vector<TensorD> saved;
    for (auto& b : buffers) saved.push_back(*b.tensor);
    auto restore = [&] {
      for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].tensor = saved[i];
    };
    auto loss = [&] {
      const double l = nn::softmax_cross_entropy(net.forward(x, nn::Mode::Train), labels).loss;
      restore();
      return l;
    };
    net.zero_grad();
    const auto fwd = nn::softmax_cross_entropy(net.forward(x, nn::Mode::Train), labels);
    restore();
    const TensorD dx = net.backward(fwd.grad);
    constexpr double kStep = 1e-6;  // smaller than the usual step: kinks are not skipped here
    nn::GradCheckResult g = nn::grad_check(loss, x.values(), dx.values(), kStep, "input");
    for (auto* p : net.parameters()) {
      const TensorD grad = p->grad;
      const std::size_t n = std::min<std::size_t>(3, p->value.size());
      nn::merge(g, nn::grad_check(loss, p->value.values().first(n), grad.values().first(n), kStep,
                                  p->name));
    }
    add(r, "gradients", "3c-dct network end to end (8x8 input)", g.max_rel_error, kTol);
  }
  return r;
}

Report run_all() {
  Report r = transform_suite();
  r.append(theorem_suite());
  r.append(gradient_suite());
  return r;
}

std::string format(const Report& report) {
  std::ostringstream os;
  for (const auto& c : report.checks) {
    os << (c.passed ? "PASS " : "FAIL ") << c.suite << ": " << c.name << "  " << std::scientific
       << std::setprecision(2) << c.measured << " (tol " << c.tolerance << ")\n";
  }
  return os.str();
}

}  // namespace tpnet::verify
