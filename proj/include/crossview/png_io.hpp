#pragma once

#include <filesystem>

#include "crossview/image.hpp"

namespace crossview {

// 8-bit RGB PNG round trip. Reading converts palette/gray/alpha inputs to
// RGB8; writing uses fixed settings so identical pixels produce identical
// files.
ByteImage read_png(const std::filesystem::path& path);
void write_png(const std::filesystem::path& path, const ByteImage& img);

}  // namespace crossview
