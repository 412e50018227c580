#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "crossview/rng.hpp"
#include "crossview/tensor.hpp"

namespace crossview {

// Every in-model image lives in [-1, 1] (the generator ends in tanh, so this
// is the only range that survives a round trip). Byte images exist solely at
// the I/O boundary; normalize/denormalize below are the single conversion
// site.

inline constexpr int kOverheadSize = 128;
inline constexpr int kGroundSize = 64;
inline constexpr int kImageChannels = 3;

enum class LandCover { rural, urban };

const char* land_cover_name(LandCover c);
std::optional<LandCover> land_cover_from_name(const std::string& name);

namespace detail {
template <int kSide>
class NormalizedImage {
 public:
  NormalizedImage() : chw_({kImageChannels, kSide, kSide}) {}
  // Validates shape, finiteness and range.
  static NormalizedImage from_chw(Tensor<float> chw);

  static constexpr int side() { return kSide; }
  const Tensor<float>& chw() const { return chw_; }
  Tensor<float>& chw() { return chw_; }

  float at(int c, int y, int x) const { return chw_.at(c, y, x); }
  float& at(int c, int y, int x) { return chw_.at(c, y, x); }

  bool bit_equal(const NormalizedImage& o) const { return chw_.bit_equal(o.chw_); }

 private:
  Tensor<float> chw_;
};
}  // namespace detail

// 128x128 RGB overhead tile.
using OverheadImage = detail::NormalizedImage<kOverheadSize>;
// 64x64 RGB ground-level view.
using GroundImage = detail::NormalizedImage<kGroundSize>;

// One co-located pair. location_id is unique within a dataset.
struct PairedSample {
  OverheadImage overhead;
  GroundImage ground;
  std::string location_id;
  std::optional<LandCover> label;
};

// Byte image at the I/O boundary: row-major height x width x channel.
struct ByteImage {
  int height = 0;
  int width = 0;
  std::vector<std::uint8_t> hwc;  // height*width*3
};

// v -> v/127.5 - 1. Input must be a [0,255] integer image; a value outside
// that range is rejected with its (y, x, channel) coordinate.
Tensor<float> normalize_image(const std::vector<int>& hwc, int height, int width);
Tensor<float> normalize_image(const ByteImage& img);
float normalize_value(int v);  // validates [0,255]

// v -> round((v+1)*127.5), clamped to [0,255]. Total: out-of-range inputs
// clamp rather than fail.
ByteImage denormalize_image(const Tensor<float>& chw);
std::uint8_t denormalize_value(float v);

}  // namespace crossview
