#pragma once

#include <functional>
#include <span>
#include <string>

#include "tpnet/nn.hpp"

namespace tpnet::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;  // max |analytic - numeric| / max(1, |analytic|)
  std::size_t checked = 0;
  std::size_t skipped = 0;  // coordinates within 10 eps of a kink
  std::string worst;
};

// Central differences of `loss` w.r.t. each coordinate. `analytic` holds the
// gradient computed by the caller at the unperturbed point.
GradCheckResult grad_check(const std::function<double()>& loss, std::span<double> coords,
                           std::span<const double> analytic, double eps = 1e-5,
                           const std::string& label = "x");

// Merges results, keeping the worst error.
void merge(GradCheckResult& into, const GradCheckResult& other);

// Loss = sum(w * layer(x)) with fixed random w; checks the input gradient and
// every parameter gradient of the layer.
GradCheckResult grad_check_layer(Layer<double>& layer, const TensorD& x, Mode mode, Rng& rng,
                                 double eps = 1e-5);

}  // namespace tpnet::nn
