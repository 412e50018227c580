#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "crossview/image.hpp"
#include "crossview/losses.hpp"

namespace crossview {

// JSON manifest schema (version 1):
// {
//   "version": 1,
//   "entries": [
//     {"location_id": "...", "overhead_path": "...", "ground_path": "...",
//      "label": "rural"|"urban" (optional),
//      "latitude": <number> (optional), "longitude": <number> (optional)}
//   ]
// }
// Image paths are relative to the manifest's directory.
struct ManifestEntry {
  std::string location_id;
  std::string overhead_path;
  std::string ground_path;
  std::optional<LandCover> label;
  std::optional<double> latitude;
  std::optional<double> longitude;
};

struct DatasetManifest {
  int version = 1;
  std::vector<ManifestEntry> entries;
};

DatasetManifest read_manifest(const std::filesystem::path& path);
void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path);

// Decodes every entry, in manifest order. Enforces: unique location_ids,
// files present, overhead exactly 128x128 and ground exactly 64x64 (no
// silent resizing). Violations name the offending entry index.
std::vector<PairedSample> load_dataset(const std::filesystem::path& manifest_path);

// Writes <location_id>_overhead.png / <location_id>_ground.png plus
// manifest.json into dir; returns the manifest path.
std::filesystem::path save_dataset(std::span<const PairedSample> samples,
                                   const std::filesystem::path& dir);

// CSV with header "step,d_loss,g_loss"; step is 1-based. Values are printed
// with %.17g so the file round-trips doubles exactly.
void write_loss_trace(const std::filesystem::path& path, const std::vector<StepLoss>& history);
std::vector<StepLoss> read_loss_trace(const std::filesystem::path& path);

// Comparison grid: one row per location, tiles [overhead | generated | real],
// 64x64 each (the overhead is 2x2 box-filtered down to tile size).
ByteImage compose_comparison_grid(std::span<const PairedSample> samples,
                                  std::span<const GroundImage> generated);

}  // namespace crossview
