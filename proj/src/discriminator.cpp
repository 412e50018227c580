#include "crossview/discriminator.hpp"

#include <cmath>

#include "crossview/errors.hpp"
#include "crossview/generator.hpp"

namespace crossview {

DiscriminatorArch DiscriminatorArch::from_profile(int width_multiplier, int kernel_size) {
  if (width_multiplier < 1) throw ValidationError("width_multiplier must be >= 1");
  DiscriminatorArch arch;
  arch.reduce_channels = 8 * width_multiplier;
  arch.trunk_channels = {8 * width_multiplier, 16 * width_multiplier, 32 * width_multiplier,
                         64 * width_multiplier};
  arch.head_channels = kFeatureDim;  // fixed: this is the published feature size
  arch.kernel_size = kernel_size;
  arch.validate();
  return arch;
}

void DiscriminatorArch::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError("kernel_size must be odd and positive");
  }
  if (reduce_channels < 1 || head_channels < 1) {
    throw ValidationError("channel counts must be positive");
  }
}

double sigmoid(double z) {
  if (z >= 0.0) {
    return 1.0 / (1.0 + std::exp(-z));
  }
  const double e = std::exp(z);
  return e / (1.0 + e);
}

template <typename T>
Discriminator<T>::Discriminator(const DiscriminatorArch& arch, Seed init_seed) : arch_(arch) {
  arch_.validate();
  const int k = arch_.kernel_size;
  const int pad = k / 2;
  reduce_ = std::make_unique<nn::Conv2d<T>>("disc.reduce.conv", kImageChannels,
                                            arch_.reduce_channels, k, 2, pad);
  int in_ch = arch_.reduce_channels + kImageChannels;  // reduced overhead ++ ground image
  for (int l = 0; l < 4; ++l) {
    const std::string name = "disc.trunk" + std::to_string(l + 1);
    const int out_ch = arch_.trunk_channels[static_cast<std::size_t>(l)];
    trunk_[static_cast<std::size_t>(l)].conv =
        std::make_unique<nn::Conv2d<T>>(name + ".conv", in_ch, out_ch, k, 2, pad);
    if (l > 0) {
      trunk_[static_cast<std::size_t>(l)].bn =
          std::make_unique<nn::BatchNorm2d<T>>(name + ".bn", out_ch);
    }
    in_ch = out_ch;
  }
  head_ = std::make_unique<nn::Conv2d<T>>("disc.head.conv", in_ch, arch_.head_channels, 1, 1, 0);
  out_ = std::make_unique<nn::Linear<T>>("disc.out", arch_.head_channels, 1);

  Xoshiro256 rng(init_seed.value);
  reduce_->init(rng, 0.02);
  for (auto& t : trunk_) {
    t.conv->init(rng, 0.02);
    if (t.bn) t.bn->init();
  }
  head_->init(rng, 0.02);
  out_->init(rng, 0.02);
}

template <typename T>
nn::ParamRefs<T> Discriminator<T>::params() {
  nn::ParamRefs<T> refs;
  reduce_->collect(refs);
  for (auto& t : trunk_) {
    t.conv->collect(refs);
    if (t.bn) t.bn->collect(refs);
  }
  head_->collect(refs);
  out_->collect(refs);
  return refs;
}

template <typename T>
std::size_t Discriminator<T>::parameter_count() {
  return nn::trainable_count(params());
}

template <typename T>
typename Discriminator<T>::Output Discriminator<T>::forward(const Tensor<T>& ground,
                                                            const Tensor<T>& overhead,
                                                            nn::Mode mode) {
  Tensor<T> reduced = reduce_act_.forward(reduce_->forward(overhead));
  ensure_finite(reduced, "disc.reduce");
  Tensor<T> x = nn::channel_concat(reduced, ground);
  int idx = 1;
  for (auto& t : trunk_) {
    x = t.conv->forward(x);
    if (t.bn) x = t.bn->forward(x, mode);
    x = t.act.forward(x);
    ensure_finite(x, "disc.trunk" + std::to_string(idx++));
  }
  x = head_act_.forward(head_->forward(x));
  ensure_finite(x, "disc.head");
  Tensor<T> pooled = pool_.forward(x);
  Tensor<T> logits2 = out_->forward(pooled);  // [B, 1]
  ensure_finite(logits2, "disc.out");
  Tensor<T> logits({logits2.dim(0)});
  for (int b = 0; b < logits2.dim(0); ++b) logits[static_cast<std::size_t>(b)] = logits2.at(b, 0);
  return {std::move(logits), std::move(pooled)};
}

template <typename T>
std::pair<Tensor<T>, Tensor<T>> Discriminator<T>::backward(const Tensor<T>& d_logits,
                                                           bool need_input_grads,
                                                           bool need_overhead_grad,
                                                           bool accum_param_grads) {
  const int batch = d_logits.dim(0);
  Tensor<T> d2({batch, 1});
  for (int b = 0; b < batch; ++b) d2.at(b, 0) = d_logits[static_cast<std::size_t>(b)];
  Tensor<T> g = out_->backward(d2, /*need_dx=*/true, accum_param_grads);
  g = pool_.backward(g);
  g = head_act_.backward(g);
  g = head_->backward(g, /*need_dx=*/true, accum_param_grads);
  for (int l = 3; l >= 0; --l) {
    TrunkLayer& t = trunk_[static_cast<std::size_t>(l)];
    g = t.act.backward(g);
    if (t.bn) g = t.bn->backward(g, accum_param_grads);
    // At trunk layer 1, dx is still needed when the reduce conv accumulates
    // its own parameter gradients from the overhead branch.
    const bool need_dx = l > 0 || need_input_grads || accum_param_grads;
    g = t.conv->backward(g, need_dx, accum_param_grads);
    if (!need_dx) return {Tensor<T>(), Tensor<T>()};
  }
  Tensor<T> d_reduced, d_ground;
  nn::channel_split(g, arch_.reduce_channels, d_reduced, d_ground);
  Tensor<T> d_overhead;
  if (need_overhead_grad || accum_param_grads) {
    Tensor<T> dr = reduce_act_.backward(d_reduced);
    d_overhead = reduce_->backward(dr, need_overhead_grad, accum_param_grads);
  }
  return {std::move(d_ground), std::move(d_overhead)};
}

template class Discriminator<float>;
template class Discriminator<double>;

template <typename T>
double discriminate(Discriminator<T>& disc, const GroundImage& ground,
                    const OverheadImage& overhead, nn::Mode mode) {
  Tensor<T> g({1, kImageChannels, kGroundSize, kGroundSize});
  Tensor<T> o({1, kImageChannels, kOverheadSize, kOverheadSize});
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = static_cast<T>(ground.chw()[i]);
  for (std::size_t i = 0; i < o.numel(); ++i) o[i] = static_cast<T>(overhead.chw()[i]);
  auto out = disc.forward(g, o, mode);
  return sigmoid(static_cast<double>(out.logits[0]));
}

template double discriminate(Discriminator<float>&, const GroundImage&, const OverheadImage&,
                             nn::Mode);
template double discriminate(Discriminator<double>&, const GroundImage&, const OverheadImage&,
                             nn::Mode);

template <typename T>
std::vector<float> extract_features_from_pair(Discriminator<T>& disc, const GroundImage& ground,
                                              const OverheadImage& overhead, nn::Mode mode) {
  Tensor<T> g({1, kImageChannels, kGroundSize, kGroundSize});
  Tensor<T> o({1, kImageChannels, kOverheadSize, kOverheadSize});
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] = static_cast<T>(ground.chw()[i]);
  for (std::size_t i = 0; i < o.numel(); ++i) o[i] = static_cast<T>(overhead.chw()[i]);
  auto out = disc.forward(g, o, mode);
  std::vector<float> v(out.features.numel());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = static_cast<float>(out.features[i]);
  return v;
}

template std::vector<float> extract_features_from_pair(Discriminator<float>&, const GroundImage&,
                                                       const OverheadImage&, nn::Mode);
template std::vector<float> extract_features_from_pair(Discriminator<double>&, const GroundImage&,
                                                       const OverheadImage&, nn::Mode);

template <typename T>
Tensor<float> extract_features_batch(Generator<T>& gen, Discriminator<T>& disc,
                                     const Tensor<T>& overheads, GroundSource source) {
  Tensor<T> grounds;
  if (source == GroundSource::generated) {
    grounds = gen.forward(overheads, nn::Mode::eval);
  } else {
    grounds = Tensor<T>({overheads.dim(0), kImageChannels, kGroundSize, kGroundSize});
  }
  auto out = disc.forward(grounds, overheads, nn::Mode::eval);
  Tensor<float> feats({out.features.dim(0), out.features.dim(1)});
  for (std::size_t i = 0; i < feats.numel(); ++i) feats[i] = static_cast<float>(out.features[i]);
  return feats;
}

template Tensor<float> extract_features_batch(Generator<float>&, Discriminator<float>&,
                                              const Tensor<float>&, GroundSource);

template <typename T>
std::vector<float> extract_features(Generator<T>& gen, Discriminator<T>& disc,
                                    const OverheadImage& overhead, GroundSource source) {
  Tensor<T> o({1, kImageChannels, kOverheadSize, kOverheadSize});
  for (std::size_t i = 0; i < o.numel(); ++i) o[i] = static_cast<T>(overhead.chw()[i]);
  Tensor<float> feats = extract_features_batch(gen, disc, o, source);
  std::vector<float> v(feats.numel());
  std::copy(feats.data(), feats.data() + feats.numel(), v.begin());
  return v;
}

template std::vector<float> extract_features(Generator<float>&, Discriminator<float>&,
                                             const OverheadImage&, GroundSource);

}  // namespace crossview
