#include "crossview/gradcheck.hpp"

#include <cmath>
#include <vector>

#include "crossview/errors.hpp"

namespace crossview {

GradCheckReport gradient_check(const nn::ParamRefs<double>& params,
                               const std::function<double()>& loss_fn,
                               const std::function<void()>& compute_analytic_grads,
                               double h, double tolerance) {
  GradCheckReport report;
  report.tolerance = tolerance;
  report.n_params = nn::trainable_count(params);
  if (report.n_params > 5000) {
    throw ValidationError("gradient_check: model has " + std::to_string(report.n_params) +
                          " parameters, limit is 5000");
  }

  compute_analytic_grads();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (nn::Param<double>* p : params) {
    if (!p->trainable) {
      analytic.emplace_back();
      continue;
    }
    analytic.emplace_back(p->grad.data(), p->grad.data() + p->grad.numel());
  }

  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    nn::Param<double>* p = params[pi];
    if (!p->trainable) continue;
    for (std::size_t i = 0; i < p->value.numel(); ++i) {
      const double saved = p->value[i];
      p->value[i] = saved + h;
      const double plus = loss_fn();
      p->value[i] = saved - h;
      const double minus = loss_fn();
      p->value[i] = saved;
      const double fd = (plus - minus) / (2.0 * h);
      const double an = analytic[pi][i];
      const double denom = std::max(std::fabs(an), std::fabs(fd));
      const double err = denom < 1e-8 ? std::fabs(an - fd) : std::fabs(an - fd) / denom;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_param = p->name;
        report.worst_index = i;
      }
    }
  }
  report.pass = report.max_rel_error < tolerance;
  return report;
}

}  // namespace crossview
