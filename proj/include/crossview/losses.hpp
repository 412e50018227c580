#pragma once

#include <span>
#include <vector>

#include "crossview/tensor.hpp"

namespace crossview {

enum class GenLossForm { non_saturating, minimax };

const char* gen_loss_form_name(GenLossForm f);

// One optimization step's loss pair, as recorded in the training history.
struct StepLoss {
  double d_loss = 0.0;
  double g_loss = 0.0;
};

// Probabilities are clamped to [kProbClampEps, 1 - kProbClampEps] inside the
// logs, so both losses stay finite for any input in [0, 1].
inline constexpr double kProbClampEps = 1e-7;

// Discriminator objective: -mean(log d_real) - mean(log(1 - d_fake)).
// Equals 2*log(2) when every probability is 0.5. Rejects empty batches.
double disc_loss(std::span<const double> d_real, std::span<const double> d_fake);

// Generator objective over the fake-pair probabilities.
//   non_saturating: -mean(log d_fake)        (0 in the d_fake -> 1 limit)
//   minimax:        +mean(log(1 - d_fake))   (the literal two-player term)
double gen_loss(std::span<const double> d_fake, GenLossForm form);

template <typename T>
std::vector<double> sigmoid_batch(const Tensor<T>& logits);

// Logit-side gradients of the clamped losses above, already divided by the
// batch size. Where the probability sits in the clamped region the log term
// is constant, so the gradient there is exactly zero — these match what
// central differences through the forward computation see.
//
//   d/dz of -(1/n) sum log sigma(z):        (p - 1) / n
template <typename T>
Tensor<T> grad_logits_real_term(const Tensor<T>& logits);
//   d/dz of -(1/n) sum log(1 - sigma(z)):   p / n
template <typename T>
Tensor<T> grad_logits_fake_term(const Tensor<T>& logits);
//   d/dz of the generator loss in either form
template <typename T>
Tensor<T> grad_logits_gen(const Tensor<T>& logits, GenLossForm form);

}  // namespace crossview
