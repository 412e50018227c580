// Command-line entry points: dataset synthesis, training, view generation,
// scoring and land-cover classification.
//
// Exit codes: 0 success, 1 usage/validation error, 2 runtime fault.

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "crossview/checkpoint.hpp"
#include "crossview/config.hpp"
#include "crossview/data_io.hpp"
#include "crossview/discriminator.hpp"
#include "crossview/errors.hpp"
#include "crossview/evaluation.hpp"
#include "crossview/generator.hpp"
#include "crossview/kernels.hpp"
#include "crossview/png_io.hpp"
#include "crossview/scene_classifier.hpp"
#include "crossview/scene_synth.hpp"
#include "crossview/threadpool.hpp"
#include "crossview/training.hpp"

namespace fs = std::filesystem;
using namespace crossview;

namespace {

std::vector<GroundImage> generate_views(TrainState& state,
                                        const std::vector<PairedSample>& samples,
                                        std::size_t count) {
  std::vector<GroundImage> out;
  out.reserve(count);
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < count; begin += kChunk) {
    const std::size_t end = std::min(count, begin + kChunk);
    Tensor<float> overheads({static_cast<int>(end - begin), kImageChannels, kOverheadSize,
                             kOverheadSize});
    for (std::size_t i = begin; i < end; ++i) {
      const auto& chw = samples[i].overhead.chw();
      std::copy(chw.data(), chw.data() + chw.numel(), overheads.slice(static_cast<int>(i - begin)));
    }
    Tensor<float> views = state.gen->forward(overheads, nn::Mode::eval);
    for (int b = 0; b < views.dim(0); ++b) out.push_back(ground_from_slice(views, b));
  }
  return out;
}

int cmd_synth_data(const std::string& out_dir, int n, std::uint64_t seed, double balance,
                   bool force) {
  const fs::path dir(out_dir);
  if (fs::exists(dir) && !fs::is_empty(dir) && !force) {
    throw ValidationError("output directory " + dir.string() +
                          " is not empty (use --force to write anyway)");
  }
  const auto samples = scene::make_dataset(Seed{seed}, n, balance);
  const fs::path manifest = save_dataset(samples, dir);
  std::printf("%s\n", manifest.c_str());
  return 0;
}

int cmd_train(const std::optional<std::string>& config_path, const std::string& data,
              const std::string& out_dir, const std::optional<std::string>& variant,
              const std::optional<std::uint64_t>& seed, const std::optional<int>& epochs,
              const std::optional<int>& batch_size, const std::optional<std::string>& resume) {
  RunConfig cfg;
  if (config_path) cfg = load_run_config(*config_path);
  if (variant) {
    const auto v = variant_from_name(*variant);
    if (!v) throw ValidationError("unknown variant '" + *variant + "'");
    cfg.generator.variant = *v;
  }
  if (seed) cfg.train.seed = *seed;
  if (epochs) cfg.train.epochs = *epochs;
  if (batch_size) cfg.train.batch_size = *batch_size;
  if (!config_path || cfg.generator.width_multiplier == 0) {
    cfg.generator.width_multiplier = profile_width_multiplier(cfg.train.profile);
  }
  cfg.train.validate();

  const auto dataset = load_dataset(data);
  if (resume) {
    TrainState state = load_checkpoint(*resume);
    if (epochs) state.config.epochs = *epochs;
    run_training(state, dataset, out_dir);
  } else {
    train(cfg.train, cfg.generator, dataset, out_dir);
  }
  std::printf("%s\n", (fs::path(out_dir) / "final.ckpt").c_str());
  return 0;
}

int cmd_generate(const std::string& checkpoint, const std::string& data,
                 const std::string& out_dir, int grid_n,
                 const std::optional<std::string>& variant) {
  TrainState state = load_checkpoint(checkpoint);
  if (variant) {
    const auto v = variant_from_name(*variant);
    if (!v) throw ValidationError("unknown variant '" + *variant + "'");
    if (*v != state.gen_config.variant) {
      throw ValidationError(std::string("checkpoint was trained with variant '") +
                            variant_name(state.gen_config.variant) + "', flags say '" + *variant +
                            "'");
    }
  }
  const auto dataset = load_dataset(data);
  if (grid_n < 1) throw ValidationError("--grid must be >= 1");
  if (static_cast<std::size_t>(grid_n) > dataset.size()) {
    throw ValidationError("--grid " + std::to_string(grid_n) + " exceeds manifest size " +
                          std::to_string(dataset.size()));
  }
  const auto views = generate_views(state, dataset, static_cast<std::size_t>(grid_n));
  const ByteImage grid = compose_comparison_grid(
      std::span<const PairedSample>(dataset.data(), static_cast<std::size_t>(grid_n)),
      std::span<const GroundImage>(views.data(), views.size()));
  fs::create_directories(out_dir);
  const fs::path out_path = fs::path(out_dir) / "grid.png";
  write_png(out_path, grid);
  std::printf("%s\n", out_path.c_str());
  return 0;
}

int cmd_score(const std::string& checkpoint, const std::string& data,
              const std::string& classifier_path, int splits, std::uint64_t seed,
              const std::string& out_file) {
  TrainState state = load_checkpoint(checkpoint);
  const auto dataset = load_dataset(data);
  const auto classifier = SceneClassifier::load(classifier_path);
  const auto views = generate_views(state, dataset, dataset.size());
  const ScoreReport report = inception_score(views, *classifier, splits, Seed{seed});
  report.write(out_file);
  std::printf("inception_score mean %.5f std %.5f n_images %d n_splits %d\n",
              report.inception_score_mean, report.inception_score_std, report.n_images,
              report.n_splits);
  return 0;
}

int cmd_classify(const std::string& checkpoint, const std::string& data, int n_train,
                 bool baseline_grayscale, std::uint64_t seed, const std::string& out_file) {
  const auto dataset = load_dataset(data);
  std::vector<LandCover> labels;
  labels.reserve(dataset.size());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].label) {
      throw ValidationError("manifest entry " + std::to_string(i) +
                            " has no label; classification needs labeled data");
    }
    labels.push_back(*dataset[i].label);
  }

  std::vector<std::vector<float>> features;
  features.reserve(dataset.size());
  if (baseline_grayscale) {
    for (const auto& s : dataset) features.push_back(grayscale_patch_features(s.overhead));
  } else {
    TrainState state = load_checkpoint(checkpoint);
    constexpr std::size_t kChunk = 64;
    for (std::size_t begin = 0; begin < dataset.size(); begin += kChunk) {
      const std::size_t end = std::min(dataset.size(), begin + kChunk);
      Tensor<float> overheads({static_cast<int>(end - begin), kImageChannels, kOverheadSize,
                               kOverheadSize});
      for (std::size_t i = begin; i < end; ++i) {
        const auto& chw = dataset[i].overhead.chw();
        std::copy(chw.data(), chw.data() + chw.numel(),
                  overheads.slice(static_cast<int>(i - begin)));
      }
      Tensor<float> feats = extract_features_batch(*state.gen, *state.disc, overheads);
      for (int b = 0; b < feats.dim(0); ++b) {
        features.emplace_back(feats.slice(b), feats.slice(b) + feats.dim(1));
      }
    }
  }

  ClassificationReport report = classify_land_cover(features, labels, n_train, Seed{seed});
  report.feature_source = baseline_grayscale ? "grayscale_patch" : "cgan_features";
  report.write(out_file);
  std::printf("accuracy %.5f n_train %d n_test %d feature_source %s\n", report.accuracy,
              report.n_train, report.n_test, report.feature_source.c_str());
  return 0;
}

int cmd_train_classifier(const std::string& data, const std::string& out_file,
                         std::uint64_t seed) {
  const auto dataset = load_dataset(data);
  TrainedSceneClassifier trained = train_scene_classifier(dataset, Seed{seed});
  trained.classifier->save(out_file);
  std::printf("holdout_accuracy %.5f epochs %d %s\n", trained.holdout_accuracy,
              trained.epochs_used, out_file.c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Cross-view synthesis: overhead imagery to ground-level views"};
  app.require_subcommand(1);
  int threads = 0;
  app.add_option("--threads", threads, "Worker threads (0 = hardware default)");

  // synth-data
  auto* synth = app.add_subcommand("synth-data", "Write a synthetic paired dataset");
  std::string sd_out;
  int sd_n = 100;
  std::uint64_t sd_seed = 0;
  double sd_balance = 0.5;
  bool sd_force = false;
  synth->add_option("--out", sd_out, "Output directory")->required();
  synth->add_option("--n", sd_n, "Number of pairs")->required();
  synth->add_option("--seed", sd_seed, "Dataset seed");
  synth->add_option("--balance", sd_balance, "Urban fraction in (0,1)");
  synth->add_flag("--force", sd_force, "Write into a non-empty directory");

  // train
  auto* tr = app.add_subcommand("train", "Train the conditional model");
  std::string tr_data, tr_out;
  std::optional<std::string> tr_config, tr_variant, tr_resume;
  std::optional<std::uint64_t> tr_seed;
  std::optional<int> tr_epochs, tr_batch;
  tr->add_option("--config", tr_config, "JSON config file");
  tr->add_option("--data", tr_data, "Dataset manifest")->required();
  tr->add_option("--out", tr_out, "Checkpoint/trace directory")->required();
  tr->add_option("--variant", tr_variant, "low|mid|high|concat (overrides config)");
  tr->add_option("--seed", tr_seed, "Training seed (overrides config)");
  tr->add_option("--epochs", tr_epochs, "Epochs (overrides config)");
  tr->add_option("--batch-size", tr_batch, "Batch size (overrides config)");
  tr->add_option("--resume", tr_resume, "Continue from a checkpoint");

  // generate
  auto* gen = app.add_subcommand("generate", "Render an overhead|generated|real grid");
  std::string ge_ckpt, ge_data, ge_out;
  int ge_grid = 5;
  std::optional<std::string> ge_variant;
  gen->add_option("--checkpoint", ge_ckpt, "Trained checkpoint")->required();
  gen->add_option("--data", ge_data, "Dataset manifest")->required();
  gen->add_option("--out", ge_out, "Output directory")->required();
  gen->add_option("--grid", ge_grid, "Rows (first N manifest entries)")->required();
  gen->add_option("--variant", ge_variant, "Assert the checkpoint's variant");

  // score
  auto* sc = app.add_subcommand("score", "Inception score of generated views");
  std::string sc_ckpt, sc_data, sc_cls, sc_out = "score_report.json";
  int sc_splits = 10;
  std::uint64_t sc_seed = 0;
  sc->add_option("--checkpoint", sc_ckpt, "Trained checkpoint")->required();
  sc->add_option("--data", sc_data, "Dataset manifest")->required();
  sc->add_option("--classifier", sc_cls, "Scene classifier file")->required();
  sc->add_option("--splits", sc_splits, "Number of splits");
  sc->add_option("--seed", sc_seed, "Shuffle seed");
  sc->add_option("--out", sc_out, "Report JSON path")->required();

  // classify
  auto* cl = app.add_subcommand("classify", "Land-cover classification from features");
  std::string cl_ckpt, cl_data, cl_out = "classification_report.json";
  int cl_ntrain = 0;
  std::uint64_t cl_seed = 0;
  std::string cl_baseline;
  cl->add_option("--checkpoint", cl_ckpt, "Trained checkpoint")->required();
  cl->add_option("--data", cl_data, "Labeled dataset manifest")->required();
  cl->add_option("--n-train", cl_ntrain, "Training sample count")->required();
  cl->add_option("--baseline", cl_baseline, "Use 'grayscale' patch features instead");
  cl->add_option("--seed", cl_seed, "Split seed");
  cl->add_option("--out", cl_out, "Report JSON path")->required();

  // train-classifier
  auto* tc = app.add_subcommand("train-classifier", "Train the scene classifier used by 'score'");
  std::string tc_data, tc_out;
  std::uint64_t tc_seed = 0;
  tc->add_option("--data", tc_data, "Labeled dataset manifest")->required();
  tc->add_option("--out", tc_out, "Classifier file path")->required();
  tc->add_option("--seed", tc_seed, "Training seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (threads > 0) ThreadPool::instance().set_num_threads(threads);
    if (*synth) return cmd_synth_data(sd_out, sd_n, sd_seed, sd_balance, sd_force);
    if (*tr) {
      return cmd_train(tr_config, tr_data, tr_out, tr_variant, tr_seed, tr_epochs, tr_batch,
                       tr_resume);
    }
    if (*gen) return cmd_generate(ge_ckpt, ge_data, ge_out, ge_grid, ge_variant);
    if (*sc) return cmd_score(sc_ckpt, sc_data, sc_cls, sc_splits, sc_seed, sc_out);
    if (*cl) {
      if (!cl_baseline.empty() && cl_baseline != "grayscale") {
        throw ValidationError("--baseline only supports 'grayscale'");
      }
      return cmd_classify(cl_ckpt, cl_data, cl_ntrain, cl_baseline == "grayscale", cl_seed,
                          cl_out);
    }
    if (*tc) return cmd_train_classifier(tc_data, tc_out, tc_seed);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "fault: %s\n", e.what());
    return 2;
  }
  return 1;
}
