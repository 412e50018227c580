#pragma once

#include <array>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "crossview/image.hpp"
#include "crossview/nn.hpp"

namespace crossview {

// Which encoder tap(s) condition the decoder. low/mid/high crop a 4x4 block
// from encoder layer 2/3/4; concat stacks all three along channels.
enum class Variant { low, mid, high, concat };

const char* variant_name(Variant v);
std::optional<Variant> variant_from_name(const std::string& name);

struct GeneratorConfig {
  Variant variant = Variant::concat;
  int width_multiplier = 1;  // 1 = tiny profile, 8 = paper-scale profile
  int kernel_size = 5;       // odd
  int crop_size = 4;
  // When true the decoder input gets an extra per-block noise channel drawn
  // at generation time. Off by default: the objective conditions the
  // generator on the encoded overhead alone.
  bool noise_input = false;
};

// Resolved layer widths. Derived from GeneratorConfig for normal use; tests
// may construct arbitrary (smaller) schedules directly, e.g. for the
// finite-difference harness where the whole model must stay under a few
// thousand parameters.
struct GeneratorArch {
  Variant variant = Variant::concat;
  std::vector<int> encoder_channels;   // size = encoder depth (2, 3 or 4)
  std::array<int, 3> decoder_channels{};  // deconv1..3 outputs; deconv4 emits 3
  int kernel_size = 5;
  int crop_size = 4;
  bool noise_input = false;

  static GeneratorArch from_config(const GeneratorConfig& cfg);
  static int encoder_depth(Variant v);

  // 1-based encoder layers whose crops feed the conditioning block,
  // in concatenation order.
  std::vector<int> tap_layers() const;
  int block_channels() const;  // decoder input channels (without noise)
  void validate() const;
};

// Center crop_size x crop_size window of a [B, C, H, W] map (H, W even).
template <typename T>
Tensor<T> crop_center(const Tensor<T>& fmap, int crop_size);

// Encoder-decoder generator: 128x128x3 overhead in, 64x64x3 ground view out.
// Stride-2 5x5 convs halve each encoder side (128->64->32->16->8) with
// LeakyReLU(0.2); batch norm everywhere in the encoder except layer 1. The
// decoder mirrors with four stride-2 transposed convs (4->8->16->32->64),
// ReLU + batch norm on all but the final tanh layer.
//
// One instance is a single writer: train-mode forward/backward and the
// cached activations are not re-entrant. Parallelism happens inside a call,
// across the batch dimension.
template <typename T>
class Generator {
 public:
  Generator(const GeneratorArch& arch, Seed init_seed);

  const GeneratorArch& arch() const { return arch_; }
  nn::ParamRefs<T> params();
  std::size_t parameter_count();

  // Per-encoder-layer activations for a [B, 3, 128, 128] batch.
  std::vector<Tensor<T>> encode(const Tensor<T>& overhead, nn::Mode mode);
  // Cropped (and for concat, stacked) conditioning block [B, Cblk, 4, 4].
  Tensor<T> condition_block(const Tensor<T>& overhead, nn::Mode mode);
  // Decoder only: block -> [B, 3, 64, 64] in [-1, 1].
  Tensor<T> decode(const Tensor<T>& block, nn::Mode mode);
  // Full pass; caches everything backward() needs.
  Tensor<T> forward(const Tensor<T>& overhead, nn::Mode mode);
  // Accumulates parameter gradients from d(output).
  void backward(const Tensor<T>& d_output);

  struct EncLayer {
    std::unique_ptr<nn::Conv2d<T>> conv;
    std::unique_ptr<nn::BatchNorm2d<T>> bn;  // null on layer 1
    nn::LeakyReLU<T> act{T(0.2)};
  };
  struct DecLayer {
    std::unique_ptr<nn::ConvTranspose2d<T>> deconv;
    std::unique_ptr<nn::BatchNorm2d<T>> bn;  // null on the final layer
    nn::LeakyReLU<T> relu{T(0)};             // inner layers
    nn::Tanh<T> tanh;                        // final layer
  };

  Xoshiro256& noise_rng() { return noise_rng_; }

 private:
  GeneratorArch arch_;
  std::vector<EncLayer> encoder_;
  std::vector<DecLayer> decoder_;
  std::vector<std::vector<int>> enc_shapes_;  // shapes of the last encode()
  Xoshiro256 noise_rng_;                      // only consumed when noise_input is on
};

// Single-image convenience wrappers.
template <typename T>
GroundImage generate(Generator<T>& gen, const OverheadImage& overhead,
                     nn::Mode mode = nn::Mode::eval);

Tensor<float> to_batch(const OverheadImage& img);
Tensor<float> to_batch(const GroundImage& img);
GroundImage ground_from_slice(const Tensor<float>& batch, int index);

}  // namespace crossview
