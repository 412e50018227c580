#pragma once

#include <filesystem>
#include <memory>
#include <vector>

#include "crossview/evaluation.hpp"
#include "crossview/image.hpp"
#include "crossview/nn.hpp"

namespace crossview {

// Small convolutional rural/urban classifier over ground images; the
// desk-scale stand-in for a large pretrained scene model. Three stride-2
// conv blocks, global average pooling, a linear head and softmax.
class SceneClassifier : public ClassifierInterface {
 public:
  struct Arch {
    std::vector<int> channels = {8, 16, 32};
    int kernel_size = 5;
    int classes = 2;
  };

  SceneClassifier(const Arch& arch, Seed init_seed);
  ~SceneClassifier() override;
  SceneClassifier(SceneClassifier&&) noexcept;
  SceneClassifier& operator=(SceneClassifier&&) noexcept;

  int num_classes() const override;
  std::vector<double> predict_proba(const GroundImage& image) const override;
  std::vector<std::vector<double>> predict_batch(
      const std::vector<GroundImage>& images) const override;

  // Training-side access.
  Tensor<float> forward_logits(const Tensor<float>& images, nn::Mode mode);
  void backward(const Tensor<float>& d_logits);
  nn::ParamRefs<float> params();

  void save(const std::filesystem::path& path) const;
  static std::unique_ptr<SceneClassifier> load(const std::filesystem::path& path);

 private:
  struct Impl;
  // predict_proba is logically const; the layers cache activations.
  mutable std::unique_ptr<Impl> impl_;
};

struct SceneClassifierTrainOptions {
  int max_epochs = 60;
  int batch_size = 32;
  double learning_rate = 1e-3;
  double holdout_fraction = 0.2;
  double target_accuracy = 0.95;
};

struct TrainedSceneClassifier {
  std::unique_ptr<SceneClassifier> classifier;
  double holdout_accuracy = 0.0;
  int epochs_used = 0;
};

// Trains on the labeled samples until the holdout accuracy reaches the
// target; throws RuntimeFault if the budget runs out (the synthetic classes
// are near-separable, so failure means the dataset is broken). Deterministic
// in seed.
TrainedSceneClassifier train_scene_classifier(const std::vector<PairedSample>& dataset, Seed seed,
                                              const SceneClassifierTrainOptions& options = {});

}  // namespace crossview
