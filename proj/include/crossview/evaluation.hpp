#pragma once

#include <array>
#include <filesystem>
#include <memory>
#include <vector>

#include <json.hpp>

#include "crossview/image.hpp"
#include "crossview/rng.hpp"

namespace crossview {

// Pluggable image classifier: ground image in, probability distribution over
// C >= 2 classes out (non-negative, summing to 1 within 1e-6).
class ClassifierInterface {
 public:
  virtual ~ClassifierInterface() = default;
  virtual int num_classes() const = 0;
  virtual std::vector<double> predict_proba(const GroundImage& image) const = 0;
  // Batched hook; the default loops over predict_proba.
  virtual std::vector<std::vector<double>> predict_batch(
      const std::vector<GroundImage>& images) const;
};

struct ScoreReport {
  double inception_score_mean = 0.0;
  double inception_score_std = 0.0;
  int n_images = 0;
  int n_splits = 0;

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

// exp(mean KL(p(y|x) || p(y))) per split, p(y) being the split's mean
// prediction; images are shuffled by `seed` then cut into n_splits
// near-equal contiguous splits. Reported as mean/std over splits.
// Probabilities are clamped at 1e-12 inside the logs. A classifier output
// that is not a distribution is rejected with the offending image index.
ScoreReport inception_score(const std::vector<GroundImage>& images,
                            const ClassifierInterface& classifier, int n_splits, Seed seed);

struct ClassificationReport {
  double accuracy = 0.0;
  // confusion[truth][prediction], indexed by (rural=0, urban=1).
  std::array<std::array<int, 2>, 2> confusion{};
  int n_train = 0;
  int n_test = 0;
  std::string feature_source;  // "cgan_features" | "grayscale_patch"

  nlohmann::json to_json() const;
  void write(const std::filesystem::path& path) const;
};

// Linear maximum-margin classifier (hinge loss, L2 regularization, weight
// 1.0) on standardized features. Seeded shuffle; the first n_train samples
// train, the rest are scored. Requires both classes in the training slice.
ClassificationReport classify_land_cover(const std::vector<std::vector<float>>& features,
                                         const std::vector<LandCover>& labels, int n_train,
                                         Seed seed);

// Prior-method baseline: the center 10x10 patch of the overhead image,
// channel-averaged to one gray value per pixel, flattened row-major.
std::vector<float> grayscale_patch_features(const OverheadImage& overhead);

}  // namespace crossview
