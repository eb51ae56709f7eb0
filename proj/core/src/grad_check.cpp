#include "tpnet/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace tpnet::nn {

GradCheckResult grad_check(const std::function<double()>& loss, std::span<double> coords,
                           std::span<const double> analytic, double eps,
                           const std::string& label) {
  if (coords.size() != analytic.size()) {
    throw std::invalid_argument("grad_check: coordinate/gradient size mismatch");
  }
  GradCheckResult r;
  for (std::size_t i = 0; i < coords.size(); ++i) {
    const double x0 = coords[i];
    auto at = [&](double v) {
      coords[i] = v;
      return loss();
    };
    const double f0 = at(x0);
    const double fp = at(x0 + eps), fm = at(x0 - eps);
    const double fpp = at(x0 + 10 * eps), fmm = at(x0 - 10 * eps);
    coords[i] = x0;

    // One-sided slopes over 10 eps disagree when a kink lies in between.
    const double right = (fpp - f0) / (10 * eps), left = (f0 - fmm) / (10 * eps);
    const double scale = std::max({1.0, std::abs(right), std::abs(left)});
    if (std::abs(right - left) > 1e-3 * scale) {
      ++r.skipped;
      continue;
    }
    const double numeric = (fp - fm) / (2 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    ++r.checked;
    if (r.checked == 1 || err > r.max_rel_error) {
      r.max_rel_error = err;
      r.worst = label + "[" + std::to_string(i) + "]";
    }
  }
  return r;
}

void merge(GradCheckResult& into, const GradCheckResult& other) {
  if (other.checked > 0 && (into.checked == 0 || other.max_rel_error > into.max_rel_error)) {
    into.max_rel_error = other.max_rel_error;
    into.worst = other.worst;
  }
  into.checked += other.checked;
  into.skipped += other.skipped;
}

GradCheckResult grad_check_layer(Layer<double>& layer, const TensorD& x, Mode mode, Rng& rng,
                                 double eps) {
  TensorD input = x;
  const TensorD probe = layer.forward(input, mode);
  TensorD weights(probe.shape());
  std::normal_distribution<double> dist(0.0, 1.0);
  for (auto& w : weights.values()) w = dist(rng);

  std::vector<Parameter<double>*> params;
  layer.collect_parameters(params);
  // Running statistics are restored after every forward.
  std::vector<Buffer<double>> buffers;
  layer.collect_buffers(buffers);
  std::vector<TensorD> saved;
  for (auto& b : buffers) saved.push_back(*b.tensor);
  auto restore = [&] {
    for (std::size_t i = 0; i < buffers.size(); ++i) *buffers[i].tensor = saved[i];
  };

  auto loss = [&]() {
    const TensorD y = layer.forward(input, mode);
    restore();
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += weights[i] * y[i];
    return s;
  };

  for (auto* p : params) p->grad.zero();
  layer.forward(input, mode);
  restore();
  const TensorD dx = layer.backward(weights);
  std::vector<TensorD> analytic;
  for (auto* p : params) analytic.push_back(p->grad);

  GradCheckResult total = grad_check(loss, input.values(), dx.values(), eps, "input");
  for (std::size_t i = 0; i < params.size(); ++i) {
    merge(total, grad_check(loss, params[i]->value.values(), analytic[i].values(), eps,
                            params[i]->name.empty() ? "param" : params[i]->name));
  }
  return total;
}

}  // namespace tpnet::nn
