#include "crossview/scene_classifier.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "crossview/checkpoint.hpp"
#include "crossview/errors.hpp"

namespace crossview {

struct SceneClassifier::Impl {
  Arch arch;
  struct Block {
    std::unique_ptr<nn::Conv2d<float>> conv;
    std::unique_ptr<nn::BatchNorm2d<float>> bn;  // null on block 1
    nn::LeakyReLU<float> act{0.2f};
  };
  std::vector<Block> blocks;
  nn::GlobalAvgPool<float> pool;
  std::unique_ptr<nn::Linear<float>> head;

  explicit Impl(const Arch& a, Seed seed) : arch(a) {
    const int k = arch.kernel_size;
    int in_ch = kImageChannels;
    for (std::size_t i = 0; i < arch.channels.size(); ++i) {
      Block b;
      const std::string name = "cls.block" + std::to_string(i + 1);
      b.conv = std::make_unique<nn::Conv2d<float>>(name + ".conv", in_ch, arch.channels[i], k, 2,
                                                   k / 2);
      if (i > 0) b.bn = std::make_unique<nn::BatchNorm2d<float>>(name + ".bn", arch.channels[i]);
      blocks.push_back(std::move(b));
      in_ch = arch.channels[i];
    }
    head = std::make_unique<nn::Linear<float>>("cls.head", in_ch, arch.classes);
    Xoshiro256 rng(seed.value);
    for (auto& b : blocks) {
      b.conv->init(rng, 0.02);
      if (b.bn) b.bn->init();
    }
    head->init(rng, 0.02);
  }

  Tensor<float> forward(const Tensor<float>& x, nn::Mode mode) {
    Tensor<float> h = x;
    int idx = 1;
    for (auto& b : blocks) {
      h = b.conv->forward(h);
      if (b.bn) h = b.bn->forward(h, mode);
      h = b.act.forward(h);
      ensure_finite(h, "cls.block" + std::to_string(idx++));
    }
    return head->forward(pool.forward(h));
  }

  void backward(const Tensor<float>& d_logits) {
    Tensor<float> g = head->backward(d_logits, /*need_dx=*/true, /*accum_param_grads=*/true);
    g = pool.backward(g);
    for (int i = static_cast<int>(blocks.size()) - 1; i >= 0; --i) {
      Block& b = blocks[static_cast<std::size_t>(i)];
      g = b.act.backward(g);
      if (b.bn) g = b.bn->backward(g, true);
      g = b.conv->backward(g, /*need_dx=*/i > 0, /*accum_param_grads=*/true);
    }
  }

  nn::ParamRefs<float> params() {
    nn::ParamRefs<float> refs;
    for (auto& b : blocks) {
      b.conv->collect(refs);
      if (b.bn) b.bn->collect(refs);
    }
    head->collect(refs);
    return refs;
  }
};

SceneClassifier::SceneClassifier(const Arch& arch, Seed init_seed)
    : impl_(std::make_unique<Impl>(arch, init_seed)) {}
SceneClassifier::~SceneClassifier() = default;
SceneClassifier::SceneClassifier(SceneClassifier&&) noexcept = default;
SceneClassifier& SceneClassifier::operator=(SceneClassifier&&) noexcept = default;

int SceneClassifier::num_classes() const { return impl_->arch.classes; }

namespace {

std::vector<double> softmax_row(const float* z, int n) {
  double zmax = z[0];
  for (int i = 1; i < n; ++i) zmax = std::max(zmax, static_cast<double>(z[i]));
  std::vector<double> p(static_cast<std::size_t>(n));
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    p[static_cast<std::size_t>(i)] = std::exp(static_cast<double>(z[i]) - zmax);
    sum += p[static_cast<std::size_t>(i)];
  }
  for (double& v : p) v /= sum;
  return p;
}

Tensor<float> ground_images_to_batch(const std::vector<GroundImage>& images, std::size_t begin,
                                     std::size_t end) {
  Tensor<float> batch({static_cast<int>(end - begin), kImageChannels, kGroundSize, kGroundSize});
  for (std::size_t i = begin; i < end; ++i) {
    const auto& chw = images[i].chw();
    std::copy(chw.data(), chw.data() + chw.numel(), batch.slice(static_cast<int>(i - begin)));
  }
  return batch;
}

}  // namespace

std::vector<double> SceneClassifier::predict_proba(const GroundImage& image) const {
  Tensor<float> batch({1, kImageChannels, kGroundSize, kGroundSize});
  std::copy(image.chw().data(), image.chw().data() + image.chw().numel(), batch.data());
  Tensor<float> logits = impl_->forward(batch, nn::Mode::eval);
  return softmax_row(logits.data(), impl_->arch.classes);
}

std::vector<std::vector<double>> SceneClassifier::predict_batch(
    const std::vector<GroundImage>& images) const {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  constexpr std::size_t kChunk = 64;
  for (std::size_t begin = 0; begin < images.size(); begin += kChunk) {
    const std::size_t end = std::min(images.size(), begin + kChunk);
    Tensor<float> logits =
        impl_->forward(ground_images_to_batch(images, begin, end), nn::Mode::eval);
    for (int b = 0; b < logits.dim(0); ++b) {
      out.push_back(softmax_row(logits.data() + static_cast<std::size_t>(b) * impl_->arch.classes,
                                impl_->arch.classes));
    }
  }
  return out;
}

Tensor<float> SceneClassifier::forward_logits(const Tensor<float>& images, nn::Mode mode) {
  return impl_->forward(images, mode);
}

void SceneClassifier::backward(const Tensor<float>& d_logits) { impl_->backward(d_logits); }

nn::ParamRefs<float> SceneClassifier::params() { return impl_->params(); }

void SceneClassifier::save(const std::filesystem::path& path) const {
  ContainerWriter w("scene_classifier");
  w.header()["arch"] = {{"channels", impl_->arch.channels},
                        {"kernel_size", impl_->arch.kernel_size},
                        {"classes", impl_->arch.classes}};
  w.header()["labels"] = {"rural", "urban"};
  for (const nn::Param<float>* p : impl_->params()) {
    w.add_f32(p->name, p->value.shape(), p->value.data());
  }
  w.write(path);
}

std::unique_ptr<SceneClassifier> SceneClassifier::load(const std::filesystem::path& path) {
  ContainerReader r(path);
  if (r.kind() != "scene_classifier") {
    throw ValidationError(path.string() + " holds a '" + r.kind() + "', not a scene_classifier");
  }
  Arch arch;
  const auto& ja = r.header().at("arch");
  arch.channels = ja.at("channels").get<std::vector<int>>();
  arch.kernel_size = ja.at("kernel_size").get<int>();
  arch.classes = ja.at("classes").get<int>();
  auto cls = std::make_unique<SceneClassifier>(arch, Seed{0});
  for (nn::Param<float>* p : cls->impl_->params()) {
    Tensor<float> v = r.read_f32(p->name);
    if (v.shape() != p->value.shape()) {
      throw ValidationError("classifier tensor '" + p->name + "' has the wrong shape");
    }
    p->value = std::move(v);
  }
  return cls;
}

TrainedSceneClassifier train_scene_classifier(const std::vector<PairedSample>& dataset, Seed seed,
                                              const SceneClassifierTrainOptions& options) {
  std::vector<int> labeled;
  bool has_rural = false, has_urban = false;
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    if (!dataset[i].label) continue;
    labeled.push_back(static_cast<int>(i));
    (*dataset[i].label == LandCover::rural ? has_rural : has_urban) = true;
  }
  if (!has_rural || !has_urban) {
    throw ValidationError("scene classifier training needs both classes present");
  }

  Xoshiro256 rng(derive_seed(seed.value, "scene_classifier"));
  for (std::size_t i = labeled.size() - 1; i > 0; --i) {
    const std::size_t j = rng.uniform_int(i + 1);
    std::swap(labeled[i], labeled[j]);
  }
  const int n = static_cast<int>(labeled.size());
  int n_holdout = static_cast<int>(std::lround(n * options.holdout_fraction));
  n_holdout = std::clamp(n_holdout, 1, n - 1);
  const int n_train = n - n_holdout;

  auto label_of = [&](int idx) {
    return *dataset[static_cast<std::size_t>(idx)].label == LandCover::urban ? 1 : 0;
  };

  SceneClassifier::Arch arch;
  auto classifier = std::make_unique<SceneClassifier>(
      arch, Seed{derive_seed(seed.value, "scene_classifier_init")});
  nn::ParamRefs<float> params = classifier->params();
  const nn::AdamConfig adam{options.learning_rate, 0.9, 0.999, 1e-8};
  std::uint64_t adam_t = 0;

  std::vector<GroundImage> holdout_images;
  std::vector<int> holdout_labels;
  for (int i = n_train; i < n; ++i) {
    holdout_images.push_back(dataset[static_cast<std::size_t>(labeled[static_cast<std::size_t>(i)])].ground);
    holdout_labels.push_back(label_of(labeled[static_cast<std::size_t>(i)]));
  }

  auto holdout_accuracy = [&]() {
    const auto preds = classifier->predict_batch(holdout_images);
    int correct = 0;
    for (std::size_t i = 0; i < preds.size(); ++i) {
      const int pred = preds[i][1] > preds[i][0] ? 1 : 0;
      if (pred == holdout_labels[i]) ++correct;
    }
    return static_cast<double>(correct) / static_cast<double>(preds.size());
  };

  std::vector<int> train_idx(labeled.begin(), labeled.begin() + n_train);
  const int batch = std::min(options.batch_size, n_train);
  const int steps = n_train / batch;
  TrainedSceneClassifier result;
  for (int epoch = 0; epoch < options.max_epochs; ++epoch) {
    for (std::size_t i = train_idx.size() - 1; i > 0; --i) {
      const std::size_t j = rng.uniform_int(i + 1);
      std::swap(train_idx[i], train_idx[j]);
    }
    for (int s = 0; s < steps; ++s) {
      Tensor<float> images({batch, kImageChannels, kGroundSize, kGroundSize});
      std::vector<int> targets(static_cast<std::size_t>(batch));
      for (int b = 0; b < batch; ++b) {
        const int idx = train_idx[static_cast<std::size_t>(s * batch + b)];
        const auto& chw = dataset[static_cast<std::size_t>(idx)].ground.chw();
        std::copy(chw.data(), chw.data() + chw.numel(), images.slice(b));
        targets[static_cast<std::size_t>(b)] = label_of(idx);
      }
      nn::zero_grads(params);
      Tensor<float> logits = classifier->forward_logits(images, nn::Mode::train);
      // Cross-entropy gradient: (softmax - onehot) / batch.
      Tensor<float> d_logits({batch, arch.classes});
      for (int b = 0; b < batch; ++b) {
        const auto p = softmax_row(logits.data() + static_cast<std::size_t>(b) * arch.classes,
                                   arch.classes);
        for (int c = 0; c < arch.classes; ++c) {
          const double onehot = c == targets[static_cast<std::size_t>(b)] ? 1.0 : 0.0;
          d_logits.at(b, c) = static_cast<float>((p[static_cast<std::size_t>(c)] - onehot) /
                                                 batch);
        }
      }
      classifier->backward(d_logits);
      nn::adam_update(params, adam_t, adam);
    }
    result.epochs_used = epoch + 1;
    result.holdout_accuracy = holdout_accuracy();
    if (result.holdout_accuracy >= options.target_accuracy) {
      result.classifier = std::move(classifier);
      return result;
    }
  }
  throw RuntimeFault("scene classifier failed to reach " +
                     std::to_string(options.target_accuracy) + " holdout accuracy (got " +
                     std::to_string(result.holdout_accuracy) + "); the dataset looks broken");
}

}  // namespace crossview
