#include "crossview/data_io.hpp"

#include <cstdio>
#include <fstream>
#include <unordered_set>

#include <json.hpp>

#include "crossview/errors.hpp"
#include "crossview/png_io.hpp"

namespace crossview {

using nlohmann::json;

DatasetManifest read_manifest(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest: " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ValidationError("manifest " + path.string() + " is not valid JSON: " + e.what());
  }
  DatasetManifest m;
  if (!j.contains("version") || !j["version"].is_number_integer()) {
    throw ValidationError("manifest missing integer 'version'");
  }
  m.version = j["version"].get<int>();
  if (m.version != 1) {
    throw ValidationError("unsupported manifest version " + std::to_string(m.version));
  }
  if (!j.contains("entries") || !j["entries"].is_array()) {
    throw ValidationError("manifest missing 'entries' array");
  }
  std::size_t idx = 0;
  for (const json& e : j["entries"]) {
    ManifestEntry entry;
    try {
      entry.location_id = e.at("location_id").get<std::string>();
      entry.overhead_path = e.at("overhead_path").get<std::string>();
      entry.ground_path = e.at("ground_path").get<std::string>();
    } catch (const json::exception&) {
      throw ValidationError("manifest entry " + std::to_string(idx) +
                            " missing location_id/overhead_path/ground_path");
    }
    if (e.contains("label")) {
      const auto name = e["label"].get<std::string>();
      entry.label = land_cover_from_name(name);
      if (!entry.label) {
        throw ValidationError("manifest entry " + std::to_string(idx) + " has unknown label '" +
                              name + "'");
      }
    }
    if (e.contains("latitude")) entry.latitude = e["latitude"].get<double>();
    if (e.contains("longitude")) entry.longitude = e["longitude"].get<double>();
    m.entries.push_back(std::move(entry));
    ++idx;
  }
  return m;
}

void write_manifest(const DatasetManifest& manifest, const std::filesystem::path& path) {
  json j;
  j["version"] = manifest.version;
  j["entries"] = json::array();
  for (const ManifestEntry& e : manifest.entries) {
    json je;
    je["location_id"] = e.location_id;
    je["overhead_path"] = e.overhead_path;
    je["ground_path"] = e.ground_path;
    if (e.label) je["label"] = land_cover_name(*e.label);
    if (e.latitude) je["latitude"] = *e.latitude;
    if (e.longitude) je["longitude"] = *e.longitude;
    j["entries"].push_back(std::move(je));
  }
  std::ofstream out(path);
  if (!out) throw RuntimeFault("cannot write manifest: " + path.string());
  out << j.dump(2) << "\n";
  if (!out) throw RuntimeFault("failed writing manifest: " + path.string());
}

namespace {

ByteImage load_exact_png(const std::filesystem::path& path, int side, std::size_t entry_index,
                         const char* role) {
  if (!std::filesystem::exists(path)) {
    throw ValidationError("manifest entry " + std::to_string(entry_index) + ": missing " + role +
                          " file " + path.string());
  }
  ByteImage img = read_png(path);
  if (img.width != side || img.height != side) {
    throw ValidationError("manifest entry " + std::to_string(entry_index) + ": " + role +
                          " image is " + std::to_string(img.width) + "x" +
                          std::to_string(img.height) + ", expected " + std::to_string(side) + "x" +
                          std::to_string(side));
  }
  return img;
}

}  // namespace

std::vector<PairedSample> load_dataset(const std::filesystem::path& manifest_path) {
  const DatasetManifest manifest = read_manifest(manifest_path);
  const std::filesystem::path base = manifest_path.parent_path();
  std::vector<PairedSample> out;
  out.reserve(manifest.entries.size());
  std::unordered_set<std::string> seen_ids;
  for (std::size_t i = 0; i < manifest.entries.size(); ++i) {
    const ManifestEntry& e = manifest.entries[i];
    if (!seen_ids.insert(e.location_id).second) {
      throw ValidationError("manifest entry " + std::to_string(i) + ": duplicate location_id '" +
                            e.location_id + "'");
    }
    PairedSample s;
    s.location_id = e.location_id;
    s.label = e.label;
    const ByteImage ov = load_exact_png(base / e.overhead_path, kOverheadSize, i, "overhead");
    const ByteImage gr = load_exact_png(base / e.ground_path, kGroundSize, i, "ground");
    s.overhead = OverheadImage::from_chw(normalize_image(ov));
    s.ground = GroundImage::from_chw(normalize_image(gr));
    out.push_back(std::move(s));
  }
  return out;
}

std::filesystem::path save_dataset(std::span<const PairedSample> samples,
                                   const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  DatasetManifest manifest;
  for (const PairedSample& s : samples) {
    ManifestEntry e;
    e.location_id = s.location_id;
    e.overhead_path = s.location_id + "_overhead.png";
    e.ground_path = s.location_id + "_ground.png";
    e.label = s.label;
    write_png(dir / e.overhead_path, denormalize_image(s.overhead.chw()));
    write_png(dir / e.ground_path, denormalize_image(s.ground.chw()));
    manifest.entries.push_back(std::move(e));
  }
  const std::filesystem::path manifest_path = dir / "manifest.json";
  write_manifest(manifest, manifest_path);
  return manifest_path;
}

void write_loss_trace(const std::filesystem::path& path, const std::vector<StepLoss>& history) {
  std::FILE* f = std::fopen(path.c_str(), "w");
  if (!f) throw RuntimeFault("cannot write loss trace: " + path.string());
  std::fputs("step,d_loss,g_loss\n", f);
  for (std::size_t i = 0; i < history.size(); ++i) {
    std::fprintf(f, "%zu,%.17g,%.17g\n", i + 1, history[i].d_loss, history[i].g_loss);
  }
  if (std::fclose(f) != 0) throw RuntimeFault("failed writing loss trace: " + path.string());
}

namespace {

Tensor<float> downsample_overhead(const OverheadImage& img) {
  Tensor<float> out({kImageChannels, kGroundSize, kGroundSize});
  for (int c = 0; c < kImageChannels; ++c) {
    for (int y = 0; y < kGroundSize; ++y) {
      for (int x = 0; x < kGroundSize; ++x) {
        out.at(c, y, x) = (img.at(c, 2 * y, 2 * x) + img.at(c, 2 * y, 2 * x + 1) +
                           img.at(c, 2 * y + 1, 2 * x) + img.at(c, 2 * y + 1, 2 * x + 1)) /
                          4.0f;
      }
    }
  }
  return out;
}

}  // namespace

ByteImage compose_comparison_grid(std::span<const PairedSample> samples,
                                  std::span<const GroundImage> generated) {
  if (samples.size() != generated.size() || samples.empty()) {
    throw ValidationError("grid needs matching, non-empty sample and view lists");
  }
  const int n = static_cast<int>(samples.size());
  const int tile = kGroundSize;
  ByteImage grid;
  grid.height = n * tile;
  grid.width = 3 * tile;
  grid.hwc.assign(static_cast<std::size_t>(grid.height) * grid.width * 3, 0);
  auto blit = [&](const Tensor<float>& chw, int row, int col) {
    const ByteImage tile_img = denormalize_image(chw);
    for (int y = 0; y < tile; ++y) {
      for (int x = 0; x < tile; ++x) {
        for (int c = 0; c < 3; ++c) {
          grid.hwc[((static_cast<std::size_t>(row) * tile + y) * grid.width + col * tile + x) * 3 +
                   c] = tile_img.hwc[(static_cast<std::size_t>(y) * tile + x) * 3 + c];
        }
      }
    }
  };
  for (int i = 0; i < n; ++i) {
    blit(downsample_overhead(samples[static_cast<std::size_t>(i)].overhead), i, 0);
    blit(generated[static_cast<std::size_t>(i)].chw(), i, 1);
    blit(samples[static_cast<std::size_t>(i)].ground.chw(), i, 2);
  }
  return grid;
}

std::vector<StepLoss> read_loss_trace(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open loss trace: " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "step,d_loss,g_loss") {
    throw ValidationError("loss trace has an unexpected header: " + path.string());
  }
  std::vector<StepLoss> out;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    StepLoss s;
    std::size_t step = 0;
    if (std::sscanf(line.c_str(), "%zu,%lg,%lg", &step, &s.d_loss, &s.g_loss) != 3) {
      throw ValidationError("malformed loss trace line: " + line);
    }
    out.push_back(s);
  }
  return out;
}

}  // namespace crossview
