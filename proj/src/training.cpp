#include "crossview/training.hpp"

#include <algorithm>
#include <cinttypes>
#include <cmath>
#include <cstdio>

#include "crossview/checkpoint.hpp"
#include "crossview/data_io.hpp"
#include "crossview/errors.hpp"

namespace crossview {

const char* profile_name(Profile p) { return p == Profile::tiny ? "tiny" : "paper_scale"; }

int profile_width_multiplier(Profile p) { return p == Profile::tiny ? 1 : 8; }

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be positive");
  if (batch_size < 2) throw ValidationError("batch_size must be >= 2 (batch norm needs it)");
  if (epochs < 1) throw ValidationError("epochs must be >= 1");
  if (checkpoint_every < 1) throw ValidationError("checkpoint_every must be >= 1");
  if (!(adam_beta1 >= 0.0 && adam_beta1 < 1.0) || !(adam_beta2 >= 0.0 && adam_beta2 < 1.0)) {
    throw ValidationError("adam betas must lie in [0, 1)");
  }
}

TrainState init_train_state(const TrainConfig& config, const GeneratorConfig& gen_config) {
  config.validate();
  TrainState state;
  state.config = config;
  state.gen_config = gen_config;
  state.gen = std::make_unique<Generator<float>>(GeneratorArch::from_config(gen_config),
                                                 Seed{derive_seed(config.seed, "gen_init")});
  state.disc = std::make_unique<Discriminator<float>>(
      DiscriminatorArch::from_profile(gen_config.width_multiplier, gen_config.kernel_size),
      Seed{derive_seed(config.seed, "disc_init")});
  state.rng = Xoshiro256(derive_seed(config.seed, "train_loop"));
  return state;
}

Tensor<float> overhead_batch(std::span<const PairedSample> samples) {
  Tensor<float> out({static_cast<int>(samples.size()), kImageChannels, kOverheadSize,
                     kOverheadSize});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& chw = samples[i].overhead.chw();
    std::copy(chw.data(), chw.data() + chw.numel(), out.slice(static_cast<int>(i)));
  }
  return out;
}

Tensor<float> overhead_batch(const std::vector<PairedSample>& dataset,
                             std::span<const int> indices) {
  Tensor<float> out({static_cast<int>(indices.size()), kImageChannels, kOverheadSize,
                     kOverheadSize});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& chw = dataset[static_cast<std::size_t>(indices[i])].overhead.chw();
    std::copy(chw.data(), chw.data() + chw.numel(), out.slice(static_cast<int>(i)));
  }
  return out;
}

Tensor<float> ground_batch(std::span<const PairedSample> samples) {
  Tensor<float> out({static_cast<int>(samples.size()), kImageChannels, kGroundSize, kGroundSize});
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& chw = samples[i].ground.chw();
    std::copy(chw.data(), chw.data() + chw.numel(), out.slice(static_cast<int>(i)));
  }
  return out;
}

Tensor<float> ground_batch(const std::vector<PairedSample>& dataset,
                           std::span<const int> indices) {
  Tensor<float> out({static_cast<int>(indices.size()), kImageChannels, kGroundSize, kGroundSize});
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& chw = dataset[static_cast<std::size_t>(indices[i])].ground.chw();
    std::copy(chw.data(), chw.data() + chw.numel(), out.slice(static_cast<int>(i)));
  }
  return out;
}

StepLoss train_step(TrainState& state, const Tensor<float>& overheads,
                    const Tensor<float>& grounds) {
  if (overheads.dim(0) < 2) throw ValidationError("train_step needs a batch of at least 2");
  Generator<float>& gen = *state.gen;
  Discriminator<float>& disc = *state.disc;
  const nn::AdamConfig adam{state.config.learning_rate, state.config.adam_beta1,
                            state.config.adam_beta2, 1e-8};

  // Generator forward once per step; its activations back both the fake
  // images below and the generator update at the end (the generator's own
  // parameters do not change in between).
  Tensor<float> fakes = gen.forward(overheads, nn::Mode::train);

  // Discriminator update: real pass, fake pass, one Adam step.
  nn::ParamRefs<float> disc_params = disc.params();
  nn::zero_grads(disc_params);
  auto real_out = disc.forward(grounds, overheads, nn::Mode::train);
  const std::vector<double> p_real = sigmoid_batch(real_out.logits);
  disc.backward(grad_logits_real_term(real_out.logits), /*need_input_grads=*/false,
                /*need_overhead_grad=*/false, /*accum_param_grads=*/true);
  auto fake_out = disc.forward(fakes, overheads, nn::Mode::train);
  const std::vector<double> p_fake = sigmoid_batch(fake_out.logits);
  disc.backward(grad_logits_fake_term(fake_out.logits), false, false, true);
  nn::adam_update(disc_params, state.disc_adam_t, adam);

  // Generator update against the refreshed discriminator, which stays frozen.
  nn::ParamRefs<float> gen_params = gen.params();
  nn::zero_grads(gen_params);
  auto gen_out = disc.forward(fakes, overheads, nn::Mode::train);
  const std::vector<double> p_gen = sigmoid_batch(gen_out.logits);
  auto [d_fake_images, d_overhead] =
      disc.backward(grad_logits_gen(gen_out.logits, state.config.gen_loss_form),
                    /*need_input_grads=*/true, /*need_overhead_grad=*/false,
                    /*accum_param_grads=*/false);
  gen.backward(d_fake_images);
  nn::adam_update(gen_params, state.gen_adam_t, adam);

  StepLoss loss{disc_loss(p_real, p_fake), gen_loss(p_gen, state.config.gen_loss_form)};
  if (!std::isfinite(loss.d_loss) || !std::isfinite(loss.g_loss)) {
    throw RuntimeFault("non-finite loss at step " + std::to_string(state.step + 1));
  }
  ++state.step;
  state.history.push_back(loss);
  return loss;
}

StepLoss train_step(TrainState& state, std::span<const PairedSample> batch) {
  return train_step(state, overhead_batch(batch), ground_batch(batch));
}

namespace {

void write_trace(const std::filesystem::path& path, const std::vector<StepLoss>& history) {
  write_loss_trace(path, history);
}

std::filesystem::path epoch_checkpoint_path(const std::filesystem::path& dir,
                                            std::uint64_t epoch) {
  char name[48];
  std::snprintf(name, sizeof(name), "ckpt_epoch_%05" PRIu64 ".ckpt", epoch);
  return dir / name;
}

}  // namespace

void run_training(TrainState& state, const std::vector<PairedSample>& dataset,
                  const std::filesystem::path& checkpoint_dir) {
  const int n = static_cast<int>(dataset.size());
  const int batch = state.config.batch_size;
  if (n < batch) throw ValidationError("dataset smaller than one batch");
  std::filesystem::create_directories(checkpoint_dir);
  const std::filesystem::path trace_path = checkpoint_dir / "loss_trace.csv";
  const int steps_per_epoch = n / batch;

  std::vector<int> indices(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) indices[static_cast<std::size_t>(i)] = i;

  const std::uint64_t target_epochs = static_cast<std::uint64_t>(state.config.epochs);
  while (state.epoch < target_epochs) {
    // Fisher-Yates reshuffle from the checkpointed stream.
    for (int i = n - 1; i > 0; --i) {
      const int j = static_cast<int>(state.rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
      std::swap(indices[static_cast<std::size_t>(i)], indices[static_cast<std::size_t>(j)]);
    }
    double d_sum = 0.0, g_sum = 0.0;
    try {
      for (int s = 0; s < steps_per_epoch; ++s) {
        std::span<const int> batch_idx(indices.data() + static_cast<std::size_t>(s) * batch,
                                       static_cast<std::size_t>(batch));
        const StepLoss loss = train_step(state, overhead_batch(dataset, batch_idx),
                                         ground_batch(dataset, batch_idx));
        d_sum += loss.d_loss;
        g_sum += loss.g_loss;
      }
    } catch (const RuntimeFault& fault) {
      // Preserve what we have: partial trace plus a diagnostic snapshot.
      write_trace(trace_path, state.history);
      const std::filesystem::path snap = checkpoint_dir / "diagnostic_snapshot.ckpt";
      save_checkpoint(state, snap);
      throw RuntimeFault(std::string(fault.what()) + "; diagnostic snapshot: " + snap.string());
    }
    ++state.epoch;
    std::printf("epoch %" PRIu64 " d_loss %.6f g_loss %.6f\n", state.epoch,
                d_sum / steps_per_epoch, g_sum / steps_per_epoch);
    std::fflush(stdout);
    write_trace(trace_path, state.history);
    if (state.epoch % static_cast<std::uint64_t>(state.config.checkpoint_every) == 0) {
      save_checkpoint(state, epoch_checkpoint_path(checkpoint_dir, state.epoch));
    }
  }
  save_checkpoint(state, checkpoint_dir / "final.ckpt");
  write_trace(trace_path, state.history);
}

TrainState train(const TrainConfig& config, const GeneratorConfig& gen_config,
                 const std::vector<PairedSample>& dataset,
                 const std::filesystem::path& checkpoint_dir) {
  TrainState state = init_train_state(config, gen_config);
  run_training(state, dataset, checkpoint_dir);
  return state;
}

}  // namespace crossview
