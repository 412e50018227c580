#pragma once

#include <functional>
#include <string>

#include "crossview/nn.hpp"

namespace crossview {

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::string worst_param;
  std::size_t worst_index = 0;
  std::size_t n_params = 0;
  double tolerance = 0.0;
  bool pass = false;
};

// Central finite differences against analytic gradients, double precision
// end to end. loss_fn evaluates the loss at the current parameter values;
// compute_analytic_grads must leave dLoss/dparam in each trainable param's
// grad field. Models above 5000 trainable parameters are rejected (the
// quadratic cost would be useless as a test).
//
// Error metric per parameter: |analytic - fd| / max(|analytic|, |fd|), with
// an absolute fallback when both magnitudes are below 1e-8 (a flat region
// would otherwise divide by ~0).
GradCheckReport gradient_check(const nn::ParamRefs<double>& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& compute_analytic_grads,
                               double h = 1e-4, double tolerance = 1e-3);

}  // namespace crossview
