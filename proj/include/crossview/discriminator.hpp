#pragma once

#include <array>
#include <memory>
#include <utility>

#include "crossview/image.hpp"
#include "crossview/nn.hpp"

namespace crossview {

// Resolved widths for the conditional discriminator. head_channels is 1024
// in every production configuration (that is the published feature size);
// the knob exists so the finite-difference harness can build miniatures.
struct DiscriminatorArch {
  int reduce_channels = 8;                   // overhead 128->64 reduction conv
  std::array<int, 4> trunk_channels{8, 16, 32, 64};
  int head_channels = 1024;
  int kernel_size = 5;

  static DiscriminatorArch from_profile(int width_multiplier, int kernel_size = 5);
  void validate() const;
};

inline constexpr int kFeatureDim = 1024;

// Real-vs-generated discriminator conditioned on the overhead image, and the
// feature extractor it turns into.
//
// Layout: the overhead passes one stride-2 conv + LeakyReLU (128->64), is
// channel-concatenated with the 64x64 ground image, then four stride-2
// conv(+bn on all but the first)+LeakyReLU trunk layers (64->32->16->8->4),
// a 1x1 conv to 4x4 x head_channels, global average pooling, and a linear
// map to one logit. discriminate() is sigmoid of that logit; the pooled head
// activations are the 1024-D feature vector.
template <typename T>
class Discriminator {
 public:
  Discriminator(const DiscriminatorArch& arch, Seed init_seed);

  const DiscriminatorArch& arch() const { return arch_; }
  nn::ParamRefs<T> params();
  std::size_t parameter_count();

  struct Output {
    Tensor<T> logits;    // [B]
    Tensor<T> features;  // [B, head_channels] pooled head activations
  };
  Output forward(const Tensor<T>& ground, const Tensor<T>& overhead, nn::Mode mode);

  // d_logits is dLoss/d(logit). Returns (d_ground, d_overhead); d_overhead
  // is computed only when need_overhead_grad.
  std::pair<Tensor<T>, Tensor<T>> backward(const Tensor<T>& d_logits, bool need_input_grads,
                                           bool need_overhead_grad, bool accum_param_grads);

 private:
  DiscriminatorArch arch_;
  std::unique_ptr<nn::Conv2d<T>> reduce_;
  nn::LeakyReLU<T> reduce_act_{T(0.2)};
  struct TrunkLayer {
    std::unique_ptr<nn::Conv2d<T>> conv;
    std::unique_ptr<nn::BatchNorm2d<T>> bn;  // null on trunk layer 1
    nn::LeakyReLU<T> act{T(0.2)};
  };
  std::array<TrunkLayer, 4> trunk_;
  std::unique_ptr<nn::Conv2d<T>> head_;  // 1x1 conv to head_channels
  nn::LeakyReLU<T> head_act_{T(0.2)};
  nn::GlobalAvgPool<T> pool_;
  std::unique_ptr<nn::Linear<T>> out_;
};

// Probability that (ground, overhead) is a real pair; strictly inside (0,1).
template <typename T>
double discriminate(Discriminator<T>& disc, const GroundImage& ground,
                    const OverheadImage& overhead, nn::Mode mode = nn::Mode::eval);

// 1024-D descriptor of a (ground, overhead) pair: the pooled head
// activations, sigmoid layer removed.
template <typename T>
std::vector<float> extract_features_from_pair(Discriminator<T>& disc, const GroundImage& ground,
                                              const OverheadImage& overhead,
                                              nn::Mode mode = nn::Mode::eval);

// What fills the discriminator's ground slot when only overhead imagery is
// available: the trained generator's view of it (default), or a zero image
// for comparison.
enum class GroundSource { generated, zeros };

template <typename T>
class Generator;

// Overhead-only descriptor: runs the generator to fill the ground slot, then
// pools the discriminator head.
template <typename T>
std::vector<float> extract_features(Generator<T>& gen, Discriminator<T>& disc,
                                    const OverheadImage& overhead,
                                    GroundSource source = GroundSource::generated);

// Batched variant for dataset-scale extraction: [B,3,128,128] -> [B,1024].
template <typename T>
Tensor<float> extract_features_batch(Generator<T>& gen, Discriminator<T>& disc,
                                     const Tensor<T>& overheads,
                                     GroundSource source = GroundSource::generated);

double sigmoid(double z);

}  // namespace crossview
