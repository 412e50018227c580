#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <vector>

#include "crossview/discriminator.hpp"
#include "crossview/generator.hpp"
#include "crossview/image.hpp"
#include "crossview/losses.hpp"
#include "crossview/rng.hpp"

namespace crossview {

enum class Profile { tiny, paper_scale };

const char* profile_name(Profile p);
int profile_width_multiplier(Profile p);

struct TrainConfig {
  double learning_rate = 0.0002;
  double adam_beta1 = 0.5;
  double adam_beta2 = 0.999;
  int epochs = 400;
  int batch_size = 128;
  GenLossForm gen_loss_form = GenLossForm::non_saturating;
  std::uint64_t seed = 0;
  Profile profile = Profile::tiny;
  int checkpoint_every = 10;  // epochs

  void validate() const;
};

// The full unit of checkpointing: parameters, Adam moments, counters, the
// shuffle RNG and the per-step loss history.
struct TrainState {
  TrainConfig config;
  GeneratorConfig gen_config;
  std::unique_ptr<Generator<float>> gen;
  std::unique_ptr<Discriminator<float>> disc;
  std::uint64_t epoch = 0;  // completed epochs
  std::uint64_t step = 0;   // completed optimization steps
  std::uint64_t gen_adam_t = 0;
  std::uint64_t disc_adam_t = 0;
  Xoshiro256 rng;           // epoch shuffle stream
  std::vector<StepLoss> history;
};

TrainState init_train_state(const TrainConfig& config, const GeneratorConfig& gen_config);

// One adversarial step on a batch: a discriminator Adam update on
// disc_loss(real pairs, generated pairs over the same overheads), then a
// generator Adam update on gen_loss with the discriminator frozen. Appends
// both loss values to the history. Throws RuntimeFault on non-finite loss.
StepLoss train_step(TrainState& state, const Tensor<float>& overheads,
                    const Tensor<float>& grounds);
StepLoss train_step(TrainState& state, std::span<const PairedSample> batch);

// Full run: epochs * floor(n / batch_size) steps, per-epoch reshuffle from
// the state RNG, one progress line per epoch, checkpoints every
// checkpoint_every epochs and at completion, loss trace persisted as CSV.
TrainState train(const TrainConfig& config, const GeneratorConfig& gen_config,
                 const std::vector<PairedSample>& dataset,
                 const std::filesystem::path& checkpoint_dir);

// Continue a loaded state up to state.config.epochs; the resumed loss trace
// is identical to an uninterrupted run from the same configuration.
void run_training(TrainState& state, const std::vector<PairedSample>& dataset,
                  const std::filesystem::path& checkpoint_dir);

// Batch assembly (normalized tensors, NCHW).
Tensor<float> overhead_batch(std::span<const PairedSample> samples);
Tensor<float> overhead_batch(const std::vector<PairedSample>& dataset,
                             std::span<const int> indices);
Tensor<float> ground_batch(std::span<const PairedSample> samples);
Tensor<float> ground_batch(const std::vector<PairedSample>& dataset,
                           std::span<const int> indices);

}  // namespace crossview
