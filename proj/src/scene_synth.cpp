#include "crossview/scene_synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "crossview/errors.hpp"
#include "crossview/threadpool.hpp"

namespace crossview::scene {

namespace {

constexpr Rgb kPalette[kTokenCount] = {
    {-0.55f, 0.25f, -0.60f},   // grass
    {-0.75f, -0.10f, -0.75f},  // tree
    {-0.10f, -0.10f, -0.10f},  // road
    {0.55f, 0.05f, -0.35f},    // house
    {-0.60f, -0.25f, 0.60f},   // water
};
constexpr Rgb kSky = {-0.15f, 0.30f, 0.85f};

float noise_sample(Xoshiro256& rng) {
  // Uniform in [-amplitude, amplitude).
  return (rng.uniform_float() * 2.0f - 1.0f) * kNoiseAmplitude;
}

bool is_built(TerrainToken t) { return t == TerrainToken::road || t == TerrainToken::house; }

// Paint full road rows/columns, then sprinkle houses until the exact built
// target is reached (converting back to grass if the lines overshot).
void build_urban(WorldGrid& world, Xoshiro256& rng, int target_built) {
  const int n_road_rows = 2 + static_cast<int>(rng.uniform_int(3));
  const int n_road_cols = 2 + static_cast<int>(rng.uniform_int(3));
  for (int i = 0; i < n_road_rows; ++i) {
    const int r = static_cast<int>(rng.uniform_int(kGridSide));
    for (int c = 0; c < kGridSide; ++c) world.cell(r, c) = TerrainToken::road;
  }
  for (int i = 0; i < n_road_cols; ++i) {
    const int c = static_cast<int>(rng.uniform_int(kGridSide));
    for (int r = 0; r < kGridSide; ++r) world.cell(r, c) = TerrainToken::road;
  }
  while (world.built_cell_count() < target_built) {
    const int idx = static_cast<int>(rng.uniform_int(kGridSide * kGridSide));
    if (!is_built(world.cells[idx])) world.cells[idx] = TerrainToken::house;
  }
  while (world.built_cell_count() > target_built) {
    const int idx = static_cast<int>(rng.uniform_int(kGridSide * kGridSide));
    if (is_built(world.cells[idx])) world.cells[idx] = TerrainToken::grass;
  }
}

// A short road, a couple of houses near it, trimmed/extended to the target.
void build_rural(WorldGrid& world, Xoshiro256& rng, int target_built) {
  const bool horizontal = rng.uniform_int(2) == 0;
  const int line = static_cast<int>(rng.uniform_int(kGridSide));
  const int len = 3 + static_cast<int>(rng.uniform_int(8));
  const int start = static_cast<int>(rng.uniform_int(kGridSide - len + 1));
  for (int i = 0; i < len; ++i) {
    if (horizontal) {
      world.cell(line, start + i) = TerrainToken::road;
    } else {
      world.cell(start + i, line) = TerrainToken::road;
    }
  }
  while (world.built_cell_count() < target_built) {
    const int idx = static_cast<int>(rng.uniform_int(kGridSide * kGridSide));
    if (!is_built(world.cells[idx])) world.cells[idx] = TerrainToken::house;
  }
  while (world.built_cell_count() > target_built) {
    const int idx = static_cast<int>(rng.uniform_int(kGridSide * kGridSide));
    if (is_built(world.cells[idx])) world.cells[idx] = TerrainToken::grass;
  }
}

std::uint64_t center_row_hash(const WorldGrid& world) {
  std::uint64_t h = 0xCBF29CE484222325ULL;
  for (int c = 0; c < kGridSide; ++c) {
    h ^= static_cast<std::uint8_t>(world.cell(kCenterRow, c));
    h *= 0x100000001B3ULL;
  }
  return h;
}

float clamp_unit(float v) { return v < -1.0f ? -1.0f : (v > 1.0f ? 1.0f : v); }

}  // namespace

Rgb palette_color(TerrainToken t) { return kPalette[static_cast<int>(t)]; }
Rgb sky_color() { return kSky; }

int WorldGrid::built_cell_count() const {
  int n = 0;
  for (TerrainToken t : cells) n += is_built(t) ? 1 : 0;
  return n;
}

double WorldGrid::built_fraction() const {
  return static_cast<double>(built_cell_count()) / (kGridSide * kGridSide);
}

WorldGrid make_world(Seed seed, LandCover target_class) {
  WorldGrid world;
  world.seed = seed;
  world.klass = target_class;
  Xoshiro256 rng(derive_seed(seed.value, "world"));

  world.cells.fill(TerrainToken::grass);

  // Vegetation and water first; roads/houses overwrite them.
  const int n_trees = 20 + static_cast<int>(rng.uniform_int(41));
  for (int i = 0; i < n_trees; ++i) {
    world.cells[rng.uniform_int(kGridSide * kGridSide)] = TerrainToken::tree;
  }
  if (rng.uniform_int(2) == 0) {
    const int cy = static_cast<int>(rng.uniform_int(kGridSide));
    const int cx = static_cast<int>(rng.uniform_int(kGridSide));
    const int radius = 1 + static_cast<int>(rng.uniform_int(3));
    for (int r = 0; r < kGridSide; ++r) {
      for (int c = 0; c < kGridSide; ++c) {
        if (std::abs(r - cy) + std::abs(c - cx) <= radius) {
          world.cell(r, c) = TerrainToken::water;
        }
      }
    }
  }

  const int total = kGridSide * kGridSide;
  if (target_class == LandCover::urban) {
    // Built fraction in [0.40, 0.55]: comfortably above the 0.35 class line.
    const int lo = static_cast<int>(std::ceil(0.40 * total));
    const int hi = static_cast<int>(std::floor(0.55 * total));
    build_urban(world, rng, lo + static_cast<int>(rng.uniform_int(hi - lo + 1)));
    // The ground view renders cells (center row, columns 8..15), nearest
    // first. Keep that strip representative of the class: at least three of
    // the four nearest cells built. Only adds cells, so the >= 0.35 bound
    // holds.
    int built_near = 0;
    for (int c = kCenterRow; c < kCenterRow + 4; ++c) {
      built_near += is_built(world.cell(kCenterRow, c)) ? 1 : 0;
    }
    while (built_near < 3) {
      const int c = kCenterRow + static_cast<int>(rng.uniform_int(4));
      if (!is_built(world.cell(kCenterRow, c))) {
        world.cell(kCenterRow, c) = TerrainToken::house;
        ++built_near;
      }
    }
  } else {
    // Built fraction in [4/256, 30/256] ~ [0.016, 0.117], below the 0.15 line.
    build_rural(world, rng, 4 + static_cast<int>(rng.uniform_int(27)));
    // Rural ground views show no roads or houses: clear the visible strip.
    // Only removes cells, so the <= 0.15 bound holds.
    for (int c = kCenterRow; c < kGridSide; ++c) {
      if (is_built(world.cell(kCenterRow, c))) {
        world.cell(kCenterRow, c) = TerrainToken::grass;
      }
    }
  }

  const double frac = world.built_fraction();
  if (target_class == LandCover::urban ? frac < kUrbanMinFraction : frac > kRuralMaxFraction) {
    throw RuntimeFault("world generator violated its class-fraction invariant");
  }
  return world;
}

OverheadImage render_overhead(const WorldGrid& world) {
  Tensor<float> chw({kImageChannels, kOverheadSize, kOverheadSize});
  Xoshiro256 rng(derive_seed(world.seed.value, "overhead"));
  for (int y = 0; y < kOverheadSize; ++y) {
    const int row = y / kCellPixels;
    for (int x = 0; x < kOverheadSize; ++x) {
      const Rgb base = palette_color(world.cell(row, x / kCellPixels));
      for (int c = 0; c < kImageChannels; ++c) {
        chw.at(c, y, x) = clamp_unit(base.channel(c) + noise_sample(rng));
      }
    }
  }
  return OverheadImage::from_chw(std::move(chw));
}

GroundImage render_ground(const WorldGrid& world) {
  Tensor<float> chw({kImageChannels, kGroundSize, kGroundSize});
  // Seeded from the center-row content only: same row => identical render.
  Xoshiro256 rng(derive_seed(center_row_hash(world), "ground"));

  const int horizon = kGroundSize / 3;  // rows [0, horizon) are sky

  // Looking outward from the grid center along the center row: cells at
  // columns 8..15 become horizontal bands, nearer cells taller. Band k gets
  // height proportional to 1/(k+2), laid out bottom-up from the image floor.
  constexpr int kBands = kGridSide - kCenterRow;
  double weight_total = 0.0;
  for (int k = 0; k < kBands; ++k) weight_total += 1.0 / (k + 2);
  const int ground_rows = kGroundSize - horizon;
  std::array<int, kBands + 1> offset{};  // rows from the bottom
  double prefix = 0.0;
  for (int k = 0; k < kBands; ++k) {
    prefix += 1.0 / (k + 2);
    offset[k + 1] = static_cast<int>(std::lround(ground_rows * prefix / weight_total));
  }
  offset[kBands] = ground_rows;

  std::array<Rgb, kGroundSize> row_color{};
  for (int y = 0; y < horizon; ++y) row_color[y] = kSky;
  for (int k = 0; k < kBands; ++k) {
    const Rgb color = palette_color(world.cell(kCenterRow, kCenterRow + k));
    for (int off = offset[k]; off < offset[k + 1]; ++off) {
      row_color[kGroundSize - 1 - off] = color;
    }
  }

  for (int y = 0; y < kGroundSize; ++y) {
    const Rgb base = row_color[y];
    for (int x = 0; x < kGroundSize; ++x) {
      for (int c = 0; c < kImageChannels; ++c) {
        chw.at(c, y, x) = clamp_unit(base.channel(c) + noise_sample(rng));
      }
    }
  }
  return GroundImage::from_chw(std::move(chw));
}

std::vector<PairedSample> make_dataset(Seed seed, int n, double class_balance) {
  if (n < 2) throw ValidationError("dataset size must be at least 2");
  if (!(class_balance > 0.0 && class_balance < 1.0)) {
    throw ValidationError("class_balance must be strictly between 0 and 1");
  }
  std::vector<PairedSample> out(static_cast<std::size_t>(n));
  parallel_for(n, [&](std::int64_t begin, std::int64_t end) {
    for (std::int64_t i = begin; i < end; ++i) {
      // round((i+1)*b) - round(i*b) interleaves the classes and telescopes
      // to exactly round(n*b) urban samples.
      const bool urban = std::llround((i + 1) * class_balance) - std::llround(i * class_balance) == 1;
      const LandCover klass = urban ? LandCover::urban : LandCover::rural;
      const WorldGrid world = make_world(Seed{derive_seed(seed.value, static_cast<std::uint64_t>(i))}, klass);
      PairedSample& s = out[static_cast<std::size_t>(i)];
      s.overhead = render_overhead(world);
      s.ground = render_ground(world);
      s.label = klass;
      char buf[32];
      std::snprintf(buf, sizeof(buf), "loc_%06lld", static_cast<long long>(i));
      s.location_id = buf;
    }
  });
  return out;
}

double built_pixel_fraction(const OverheadImage& img, float tol) {
  const Rgb road = palette_color(TerrainToken::road);
  const Rgb house = palette_color(TerrainToken::house);
  std::int64_t built = 0;
  for (int y = 0; y < kOverheadSize; ++y) {
    for (int x = 0; x < kOverheadSize; ++x) {
      float d_road = 0.0f, d_house = 0.0f;
      for (int c = 0; c < kImageChannels; ++c) {
        d_road = std::max(d_road, std::fabs(img.at(c, y, x) - road.channel(c)));
        d_house = std::max(d_house, std::fabs(img.at(c, y, x) - house.channel(c)));
      }
      if (d_road <= tol || d_house <= tol) ++built;
    }
  }
  return static_cast<double>(built) / (kOverheadSize * kOverheadSize);
}

LandCover recover_label(const OverheadImage& img, float tol) {
  return built_pixel_fraction(img, tol) >= kUrbanMinFraction ? LandCover::urban
                                                             : LandCover::rural;
}

}  // namespace crossview::scene
