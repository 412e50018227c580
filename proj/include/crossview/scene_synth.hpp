#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "crossview/image.hpp"
#include "crossview/rng.hpp"

namespace crossview::scene {

// Procedural stand-in for co-located aerial/ground photo pairs: a small tile
// world rendered top-down at 128x128 and as a pseudo-perspective 64x64 view.
// Everything here is a pure function of its arguments (seeds included), which
// is what makes the downstream determinism and label-recovery tests possible.

enum class TerrainToken : std::uint8_t { grass = 0, tree, road, house, water };
inline constexpr int kTokenCount = 5;

inline constexpr int kGridSide = 16;
inline constexpr int kCellPixels = 8;  // 16 cells * 8 px = 128 px overhead
inline constexpr int kCenterRow = kGridSide / 2;

// Urban iff road+house cell fraction >= 0.35; rural iff <= 0.15. The
// generator never emits the ambiguous middle band.
inline constexpr double kUrbanMinFraction = 0.35;
inline constexpr double kRuralMaxFraction = 0.15;

// Per-pixel render noise bound (per channel, uniform).
inline constexpr float kNoiseAmplitude = 0.05f;

struct Rgb {
  float r, g, b;
  float channel(int c) const { return c == 0 ? r : (c == 1 ? g : b); }
};

// Fixed palette in normalized [-1,1] RGB. Colors are kept at least 0.2 apart
// in max-channel distance so a pixel within 0.1 of a palette color can only
// belong to that token even after render noise.
Rgb palette_color(TerrainToken t);
Rgb sky_color();

struct WorldGrid {
  std::array<TerrainToken, kGridSide * kGridSide> cells{};
  LandCover klass = LandCover::rural;
  Seed seed;

  TerrainToken cell(int row, int col) const { return cells[row * kGridSide + col]; }
  TerrainToken& cell(int row, int col) { return cells[row * kGridSide + col]; }
  int built_cell_count() const;     // road + house cells
  double built_fraction() const;    // over all 256 cells
};

WorldGrid make_world(Seed seed, LandCover target_class);

OverheadImage render_overhead(const WorldGrid& world);

// The ground view depends only on the center-row cells (it is re-seeded from
// their content), so any two worlds sharing that row render identically.
GroundImage render_ground(const WorldGrid& world);

// n samples with round(n*class_balance) urban, deterministic in seed.
// class_balance in (0,1); n >= 2. Sample i is generated from
// derive_seed(seed, i), so parallel generation matches serial output.
std::vector<PairedSample> make_dataset(Seed seed, int n, double class_balance);

// Label-recovery oracle: counts overhead pixels within `tol` (max-channel
// distance) of the road/house palette colors and thresholds the fraction.
double built_pixel_fraction(const OverheadImage& img, float tol = 0.1f);
LandCover recover_label(const OverheadImage& img, float tol = 0.1f);

}  // namespace crossview::scene
