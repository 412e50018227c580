#include "crossview/losses.hpp"

#include <cmath>

#include "crossview/discriminator.hpp"
#include "crossview/errors.hpp"

namespace crossview {

namespace {

double clamp_prob(double p) {
  if (p < kProbClampEps) return kProbClampEps;
  if (p > 1.0 - kProbClampEps) return 1.0 - kProbClampEps;
  return p;
}

bool in_open_band(double p) { return p > kProbClampEps && p < 1.0 - kProbClampEps; }

}  // namespace

const char* gen_loss_form_name(GenLossForm f) {
  return f == GenLossForm::non_saturating ? "non_saturating" : "minimax";
}

double disc_loss(std::span<const double> d_real, std::span<const double> d_fake) {
  if (d_real.empty() || d_fake.empty()) throw ValidationError("disc_loss: empty batch");
  double real_term = 0.0;
  for (double p : d_real) real_term += std::log(clamp_prob(p));
  double fake_term = 0.0;
  for (double p : d_fake) fake_term += std::log(1.0 - clamp_prob(p));
  return -real_term / static_cast<double>(d_real.size()) -
         fake_term / static_cast<double>(d_fake.size());
}

double gen_loss(std::span<const double> d_fake, GenLossForm form) {
  if (d_fake.empty()) throw ValidationError("gen_loss: empty batch");
  double acc = 0.0;
  if (form == GenLossForm::non_saturating) {
    for (double p : d_fake) acc += std::log(clamp_prob(p));
    return -acc / static_cast<double>(d_fake.size());
  }
  for (double p : d_fake) acc += std::log(1.0 - clamp_prob(p));
  return acc / static_cast<double>(d_fake.size());
}

template <typename T>
std::vector<double> sigmoid_batch(const Tensor<T>& logits) {
  std::vector<double> out(logits.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = sigmoid(static_cast<double>(logits[i]));
  }
  return out;
}

template <typename T>
Tensor<T> grad_logits_real_term(const Tensor<T>& logits) {
  Tensor<T> d(logits.shape());
  const double n = static_cast<double>(logits.numel());
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double p = sigmoid(static_cast<double>(logits[i]));
    d[i] = in_open_band(p) ? static_cast<T>((p - 1.0) / n) : T(0);
  }
  return d;
}

template <typename T>
Tensor<T> grad_logits_fake_term(const Tensor<T>& logits) {
  Tensor<T> d(logits.shape());
  const double n = static_cast<double>(logits.numel());
  for (std::size_t i = 0; i < logits.numel(); ++i) {
    const double p = sigmoid(static_cast<double>(logits[i]));
    d[i] = in_open_band(p) ? static_cast<T>(p / n) : T(0);
  }
  return d;
}

template <typename T>
Tensor<T> grad_logits_gen(const Tensor<T>& logits, GenLossForm form) {
  if (form == GenLossForm::non_saturating) {
    return grad_logits_real_term(logits);  // same -mean log p shape, on fakes
  }
  Tensor<T> d = grad_logits_fake_term(logits);
  for (std::size_t i = 0; i < d.numel(); ++i) d[i] = -d[i];
  return d;
}

template std::vector<double> sigmoid_batch(const Tensor<float>&);
template std::vector<double> sigmoid_batch(const Tensor<double>&);
template Tensor<float> grad_logits_real_term(const Tensor<float>&);
template Tensor<double> grad_logits_real_term(const Tensor<double>&);
template Tensor<float> grad_logits_fake_term(const Tensor<float>&);
template Tensor<double> grad_logits_fake_term(const Tensor<double>&);
template Tensor<float> grad_logits_gen(const Tensor<float>&, GenLossForm);
template Tensor<double> grad_logits_gen(const Tensor<double>&, GenLossForm);

}  // namespace crossview
