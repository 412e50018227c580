#include "crossview/image.hpp"

#include <cmath>

#include "crossview/errors.hpp"

namespace crossview {

const char* land_cover_name(LandCover c) { return c == LandCover::rural ? "rural" : "urban"; }

std::optional<LandCover> land_cover_from_name(const std::string& name) {
  if (name == "rural") return LandCover::rural;
  if (name == "urban") return LandCover::urban;
  return std::nullopt;
}

namespace detail {

template <int kSide>
NormalizedImage<kSide> NormalizedImage<kSide>::from_chw(Tensor<float> chw) {
  if (chw.rank() != 3 || chw.dim(0) != kImageChannels || chw.dim(1) != kSide ||
      chw.dim(2) != kSide) {
    throw ValidationError("image tensor must be [3x" + std::to_string(kSide) + "x" +
                          std::to_string(kSide) + "], got " + shape_string(chw.shape()));
  }
  for (std::size_t i = 0; i < chw.numel(); ++i) {
    const float v = chw[i];
    if (!std::isfinite(v) || v < -1.0f || v > 1.0f) {
      throw ValidationError("image value " + std::to_string(v) + " outside [-1,1] at flat index " +
                            std::to_string(i));
    }
  }
  NormalizedImage out;
  out.chw_ = std::move(chw);
  return out;
}

template class NormalizedImage<kOverheadSize>;
template class NormalizedImage<kGroundSize>;

}  // namespace detail

float normalize_value(int v) {
  if (v < 0 || v > 255) {
    throw ValidationError("pixel value " + std::to_string(v) + " outside [0,255]");
  }
  return static_cast<float>(v) / 127.5f - 1.0f;
}

Tensor<float> normalize_image(const std::vector<int>& hwc, int height, int width) {
  if (static_cast<std::size_t>(height) * width * kImageChannels != hwc.size()) {
    throw ValidationError("raw image buffer size does not match dimensions");
  }
  Tensor<float> out({kImageChannels, height, width});
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      for (int c = 0; c < kImageChannels; ++c) {
        const int v = hwc[(static_cast<std::size_t>(y) * width + x) * kImageChannels + c];
        if (v < 0 || v > 255) {
          throw ValidationError("pixel value " + std::to_string(v) + " outside [0,255] at (y=" +
                                std::to_string(y) + ", x=" + std::to_string(x) +
                                ", channel=" + std::to_string(c) + ")");
        }
        out.at(c, y, x) = static_cast<float>(v) / 127.5f - 1.0f;
      }
    }
  }
  return out;
}

Tensor<float> normalize_image(const ByteImage& img) {
  Tensor<float> out({kImageChannels, img.height, img.width});
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < kImageChannels; ++c) {
        const std::uint8_t v =
            img.hwc[(static_cast<std::size_t>(y) * img.width + x) * kImageChannels + c];
        out.at(c, y, x) = static_cast<float>(v) / 127.5f - 1.0f;
      }
    }
  }
  return out;
}

std::uint8_t denormalize_value(float v) {
  if (v < -1.0f) v = -1.0f;
  if (v > 1.0f) v = 1.0f;
  const long r = std::lroundf((v + 1.0f) * 127.5f);
  return static_cast<std::uint8_t>(r < 0 ? 0 : (r > 255 ? 255 : r));
}

ByteImage denormalize_image(const Tensor<float>& chw) {
  ByteImage out;
  out.height = chw.dim(1);
  out.width = chw.dim(2);
  out.hwc.resize(static_cast<std::size_t>(out.height) * out.width * kImageChannels);
  for (int y = 0; y < out.height; ++y) {
    for (int x = 0; x < out.width; ++x) {
      for (int c = 0; c < kImageChannels; ++c) {
        out.hwc[(static_cast<std::size_t>(y) * out.width + x) * kImageChannels + c] =
            denormalize_value(chw.at(c, y, x));
      }
    }
  }
  return out;
}

}  // namespace crossview
