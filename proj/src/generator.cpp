#include "crossview/generator.hpp"

#include <cassert>

#include "crossview/errors.hpp"

namespace crossview {

const char* variant_name(Variant v) {
  switch (v) {
    case Variant::low: return "low";
    case Variant::mid: return "mid";
    case Variant::high: return "high";
    case Variant::concat: return "concat";
  }
  return "?";
}

std::optional<Variant> variant_from_name(const std::string& name) {
  if (name == "low") return Variant::low;
  if (name == "mid") return Variant::mid;
  if (name == "high") return Variant::high;
  if (name == "concat") return Variant::concat;
  return std::nullopt;
}

int GeneratorArch::encoder_depth(Variant v) {
  switch (v) {
    case Variant::low: return 2;
    case Variant::mid: return 3;
    case Variant::high: return 4;
    case Variant::concat: return 4;
  }
  return 4;
}

GeneratorArch GeneratorArch::from_config(const GeneratorConfig& cfg) {
  if (cfg.width_multiplier < 1) throw ValidationError("width_multiplier must be >= 1");
  GeneratorArch arch;
  arch.variant = cfg.variant;
  arch.kernel_size = cfg.kernel_size;
  arch.crop_size = cfg.crop_size;
  arch.noise_input = cfg.noise_input;
  const int depth = encoder_depth(cfg.variant);
  // Doubling-per-halving ladder: 8m, 16m, 32m, 64m (64..512 at m=8).
  static constexpr int kBase[4] = {8, 16, 32, 64};
  for (int l = 0; l < depth; ++l) arch.encoder_channels.push_back(kBase[l] * cfg.width_multiplier);
  arch.decoder_channels = {64 * cfg.width_multiplier, 32 * cfg.width_multiplier,
                           16 * cfg.width_multiplier};
  arch.validate();
  return arch;
}

std::vector<int> GeneratorArch::tap_layers() const {
  switch (variant) {
    case Variant::low: return {2};
    case Variant::mid: return {3};
    case Variant::high: return {4};
    case Variant::concat: return {2, 3, 4};
  }
  return {};
}

int GeneratorArch::block_channels() const {
  int c = 0;
  for (int l : tap_layers()) c += encoder_channels[static_cast<std::size_t>(l - 1)];
  return c;
}

void GeneratorArch::validate() const {
  if (kernel_size < 1 || kernel_size % 2 == 0) {
    throw ValidationError("kernel_size must be odd and positive");
  }
  const int depth = static_cast<int>(encoder_channels.size());
  if (depth != encoder_depth(variant)) {
    throw ValidationError("encoder depth does not match variant");
  }
  // Deepest tapped map for a 128px input has side 128 / 2^depth_of_tap.
  int min_side = kOverheadSize;
  for (int l : tap_layers()) min_side = std::min(min_side, kOverheadSize >> l);
  if (crop_size < 1 || crop_size > min_side) {
    throw ValidationError("crop_size exceeds the smallest tapped feature-map side");
  }
}

template <typename T>
Tensor<T> crop_center(const Tensor<T>& fmap, int crop_size) {
  if (fmap.rank() != 4) throw ValidationError("crop_center expects a [B,C,H,W] tensor");
  const int batch = fmap.dim(0), channels = fmap.dim(1), h = fmap.dim(2), w = fmap.dim(3);
  if (h < crop_size || w < crop_size) {
    throw ValidationError("feature map " + shape_string(fmap.shape()) +
                          " smaller than crop size " + std::to_string(crop_size));
  }
  if (h % 2 != 0 || w % 2 != 0) throw ValidationError("crop_center expects even map sides");
  const int y0 = h / 2 - crop_size / 2;
  const int x0 = w / 2 - crop_size / 2;
  Tensor<T> out({batch, channels, crop_size, crop_size});
  for (int b = 0; b < batch; ++b) {
    for (int c = 0; c < channels; ++c) {
      for (int y = 0; y < crop_size; ++y) {
        for (int x = 0; x < crop_size; ++x) {
          out.at(b, c, y, x) = fmap.at(b, c, y0 + y, x0 + x);
        }
      }
    }
  }
  return out;
}

template Tensor<float> crop_center(const Tensor<float>&, int);
template Tensor<double> crop_center(const Tensor<double>&, int);

namespace {

// Adjoint of crop_center: add the block gradient into the center window of a
// zero map shaped like the tapped activation.
template <typename T>
Tensor<T> crop_scatter(const Tensor<T>& d_block, const std::vector<int>& map_shape) {
  Tensor<T> out(map_shape);
  const int crop = d_block.dim(2);
  const int y0 = map_shape[2] / 2 - crop / 2;
  const int x0 = map_shape[3] / 2 - crop / 2;
  for (int b = 0; b < d_block.dim(0); ++b) {
    for (int c = 0; c < d_block.dim(1); ++c) {
      for (int y = 0; y < crop; ++y) {
        for (int x = 0; x < crop; ++x) {
          out.at(b, c, y0 + y, x0 + x) = d_block.at(b, c, y, x);
        }
      }
    }
  }
  return out;
}

}  // namespace

template <typename T>
Generator<T>::Generator(const GeneratorArch& arch, Seed init_seed) : arch_(arch) {
  arch_.validate();
  const int k = arch_.kernel_size;
  const int pad = k / 2;
  const int depth = static_cast<int>(arch_.encoder_channels.size());
  int in_ch = kImageChannels;
  for (int l = 0; l < depth; ++l) {
    EncLayer layer;
    const int out_ch = arch_.encoder_channels[static_cast<std::size_t>(l)];
    const std::string name = "gen.enc" + std::to_string(l + 1);
    layer.conv = std::make_unique<nn::Conv2d<T>>(name + ".conv", in_ch, out_ch, k, 2, pad);
    if (l > 0) layer.bn = std::make_unique<nn::BatchNorm2d<T>>(name + ".bn", out_ch);
    encoder_.push_back(std::move(layer));
    in_ch = out_ch;
  }

  int dec_in = arch_.block_channels() + (arch_.noise_input ? 1 : 0);
  for (int l = 0; l < 4; ++l) {
    DecLayer layer;
    const bool last = l == 3;
    const int out_ch = last ? kImageChannels : arch_.decoder_channels[static_cast<std::size_t>(l)];
    const std::string name = "gen.dec" + std::to_string(l + 1);
    layer.deconv =
        std::make_unique<nn::ConvTranspose2d<T>>(name + ".deconv", dec_in, out_ch, k, 2, pad, 1);
    if (!last) layer.bn = std::make_unique<nn::BatchNorm2d<T>>(name + ".bn", out_ch);
    decoder_.push_back(std::move(layer));
    dec_in = out_ch;
  }

  // Weights ~ N(0, 0.02); batch-norm scale 1, shift 0. One stream, fixed
  // layer order, so identical (arch, seed) rebuilds identical parameters.
  Xoshiro256 rng(init_seed.value);
  for (auto& l : encoder_) {
    l.conv->init(rng, 0.02);
    if (l.bn) l.bn->init();
  }
  for (auto& l : decoder_) {
    l.deconv->init(rng, 0.02);
    if (l.bn) l.bn->init();
  }
  noise_rng_ = Xoshiro256(derive_seed(init_seed.value, "gen_noise"));
}

template <typename T>
nn::ParamRefs<T> Generator<T>::params() {
  nn::ParamRefs<T> refs;
  for (auto& l : encoder_) {
    l.conv->collect(refs);
    if (l.bn) l.bn->collect(refs);
  }
  for (auto& l : decoder_) {
    l.deconv->collect(refs);
    if (l.bn) l.bn->collect(refs);
  }
  return refs;
}

template <typename T>
std::size_t Generator<T>::parameter_count() {
  return nn::trainable_count(params());
}

template <typename T>
std::vector<Tensor<T>> Generator<T>::encode(const Tensor<T>& overhead, nn::Mode mode) {
  std::vector<Tensor<T>> outs;
  Tensor<T> x = overhead;
  enc_shapes_.clear();
  int idx = 1;
  for (auto& l : encoder_) {
    x = l.conv->forward(x);
    if (l.bn) x = l.bn->forward(x, mode);
    x = l.act.forward(x);
    ensure_finite(x, "gen.enc" + std::to_string(idx++));
    enc_shapes_.push_back(x.shape());
    outs.push_back(x);
  }
  return outs;
}

template <typename T>
Tensor<T> Generator<T>::condition_block(const Tensor<T>& overhead, nn::Mode mode) {
  const std::vector<Tensor<T>> maps = encode(overhead, mode);
  Tensor<T> block;
  for (int l : arch_.tap_layers()) {
    Tensor<T> crop = crop_center(maps[static_cast<std::size_t>(l - 1)], arch_.crop_size);
    block = block.empty() ? std::move(crop) : nn::channel_concat(block, crop);
  }
  return block;
}

template <typename T>
Tensor<T> Generator<T>::decode(const Tensor<T>& block, nn::Mode mode) {
  Tensor<T> x = block;
  if (arch_.noise_input) {
    // Optional extra conditioning channel of fresh gaussian noise.
    Tensor<T> noise({block.dim(0), 1, block.dim(2), block.dim(3)});
    for (std::size_t i = 0; i < noise.numel(); ++i) {
      noise[i] = static_cast<T>(noise_rng_.normal());
    }
    x = nn::channel_concat(x, noise);
  }
  int idx = 1;
  for (auto& l : decoder_) {
    x = l.deconv->forward(x);
    if (l.bn) {
      x = l.bn->forward(x, mode);
      x = l.relu.forward(x);
    } else {
      x = l.tanh.forward(x);
    }
    ensure_finite(x, "gen.dec" + std::to_string(idx++));
  }
  return x;
}

template <typename T>
Tensor<T> Generator<T>::forward(const Tensor<T>& overhead, nn::Mode mode) {
  return decode(condition_block(overhead, mode), mode);
}

template <typename T>
void Generator<T>::backward(const Tensor<T>& d_output) {
  // Decoder, last layer first.
  Tensor<T> g = d_output;
  for (int l = 3; l >= 0; --l) {
    DecLayer& layer = decoder_[static_cast<std::size_t>(l)];
    if (layer.bn) {
      g = layer.relu.backward(g);
      g = layer.bn->backward(g, /*accum_param_grads=*/true);
    } else {
      g = layer.tanh.backward(g);
    }
    g = layer.deconv->backward(g, /*need_dx=*/true, /*accum_param_grads=*/true);
  }
  if (arch_.noise_input) {
    Tensor<T> d_block, d_noise;
    nn::channel_split(g, g.dim(1) - 1, d_block, d_noise);
    g = std::move(d_block);  // noise is an input, its gradient is dropped
  }

  // Split the block gradient back into per-tap crops, then walk the encoder
  // top-down, adding each tap's scattered gradient where its layer ends.
  const std::vector<int> taps = arch_.tap_layers();
  const int depth = static_cast<int>(encoder_.size());
  std::vector<Tensor<T>> layer_grads(static_cast<std::size_t>(depth));
  int ch0 = 0;
  for (int t : taps) {
    const int tc = arch_.encoder_channels[static_cast<std::size_t>(t - 1)];
    Tensor<T> d_crop({g.dim(0), tc, arch_.crop_size, arch_.crop_size});
    for (int b = 0; b < g.dim(0); ++b) {
      for (int c = 0; c < tc; ++c) {
        for (int y = 0; y < arch_.crop_size; ++y) {
          for (int x = 0; x < arch_.crop_size; ++x) {
            d_crop.at(b, c, y, x) = g.at(b, ch0 + c, y, x);
          }
        }
      }
    }
    layer_grads[static_cast<std::size_t>(t - 1)] =
        crop_scatter(d_crop, enc_shapes_[static_cast<std::size_t>(t - 1)]);
    ch0 += tc;
  }

  Tensor<T> downstream;  // gradient flowing from layer l+1 into layer l's output
  for (int l = depth - 1; l >= 0; --l) {
    Tensor<T>& tap_grad = layer_grads[static_cast<std::size_t>(l)];
    Tensor<T> grad_out;
    if (!downstream.empty() && !tap_grad.empty()) {
      grad_out = std::move(tap_grad);
      kernels::add(downstream.data(), grad_out.data(), grad_out.numel());
    } else if (!tap_grad.empty()) {
      grad_out = std::move(tap_grad);
    } else {
      grad_out = std::move(downstream);
    }
    EncLayer& layer = encoder_[static_cast<std::size_t>(l)];
    Tensor<T> gg = layer.act.backward(grad_out);
    if (layer.bn) gg = layer.bn->backward(gg, /*accum_param_grads=*/true);
    downstream = layer.conv->backward(gg, /*need_dx=*/l > 0, /*accum_param_grads=*/true);
  }
}

template class Generator<float>;
template class Generator<double>;

template <typename T>
GroundImage generate(Generator<T>& gen, const OverheadImage& overhead, nn::Mode mode) {
  Tensor<T> batch({1, kImageChannels, kOverheadSize, kOverheadSize});
  for (std::size_t i = 0; i < batch.numel(); ++i) {
    batch[i] = static_cast<T>(overhead.chw()[i]);
  }
  Tensor<T> out = gen.forward(batch, mode);
  Tensor<float> chw({kImageChannels, kGroundSize, kGroundSize});
  for (std::size_t i = 0; i < chw.numel(); ++i) chw[i] = static_cast<float>(out[i]);
  return GroundImage::from_chw(std::move(chw));
}

template GroundImage generate(Generator<float>&, const OverheadImage&, nn::Mode);
template GroundImage generate(Generator<double>&, const OverheadImage&, nn::Mode);

Tensor<float> to_batch(const OverheadImage& img) {
  Tensor<float> out({1, kImageChannels, kOverheadSize, kOverheadSize});
  std::copy(img.chw().data(), img.chw().data() + img.chw().numel(), out.data());
  return out;
}

Tensor<float> to_batch(const GroundImage& img) {
  Tensor<float> out({1, kImageChannels, kGroundSize, kGroundSize});
  std::copy(img.chw().data(), img.chw().data() + img.chw().numel(), out.data());
  return out;
}

GroundImage ground_from_slice(const Tensor<float>& batch, int index) {
  Tensor<float> chw({kImageChannels, kGroundSize, kGroundSize});
  std::copy(batch.slice(index), batch.slice(index) + chw.numel(), chw.data());
  return GroundImage::from_chw(std::move(chw));
}

}  // namespace crossview
