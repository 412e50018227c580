#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "crossview/errors.hpp"
#include "crossview/evaluation.hpp"
#include "crossview/scene_classifier.hpp"
#include "crossview/scene_synth.hpp"

using namespace crossview;

namespace {

// Stub classifier driven by a fixed prediction table (cycled by image order).
class StubClassifier : public ClassifierInterface {
 public:
  StubClassifier(int classes, std::vector<std::vector<double>> table)
      : classes_(classes), table_(std::move(table)) {}
  int num_classes() const override { return classes_; }
  std::vector<double> predict_proba(const GroundImage&) const override {
    return table_[index_++ % table_.size()];
  }

 private:
  int classes_;
  std::vector<std::vector<double>> table_;
  mutable std::size_t index_ = 0;
};

std::vector<GroundImage> dummy_images(int n) {
  std::vector<GroundImage> out;
  out.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) out.emplace_back();
  return out;
}

}  // namespace

TEST_CASE("inception score: constant classifier gives exactly 1.0") {
  StubClassifier cls(3, {{0.2, 0.5, 0.3}});
  const ScoreReport r = inception_score(dummy_images(16), cls, 4, Seed{1});
  CHECK(std::fabs(r.inception_score_mean - 1.0) <= 1e-9);
  CHECK(r.inception_score_std == 0.0);
  CHECK(r.n_images == 16);
  CHECK(r.n_splits == 4);
}

TEST_CASE("inception score: one-hot uniform over 4 classes gives exactly 4.0") {
  StubClassifier cls(4, {{1, 0, 0, 0}, {0, 1, 0, 0}, {0, 0, 1, 0}, {0, 0, 0, 1}});
  const ScoreReport r = inception_score(dummy_images(16), cls, 1, Seed{2});
  CHECK(std::fabs(r.inception_score_mean - 4.0) <= 1e-6);
}

TEST_CASE("inception score: two-image worked example") {
  StubClassifier cls(2, {{0.9, 0.1}, {0.1, 0.9}});
  const ScoreReport r = inception_score(dummy_images(2), cls, 1, Seed{3});
  // Direct-summation oracle: marginal (0.5, 0.5), per-image KL identical.
  const double kl = 0.9 * std::log(0.9 / 0.5) + 0.1 * std::log(0.1 / 0.5);
  CHECK(r.inception_score_mean == doctest::Approx(std::exp(kl)).epsilon(1e-12));
  CHECK(std::fabs(r.inception_score_mean - 1.44500) <= 1e-4);
}

TEST_CASE("inception score bounds: 1 <= score <= C on randomized predictions") {
  Xoshiro256 rng(4);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<double>> table;
    for (int i = 0; i < 12; ++i) {
      std::vector<double> p(5);
      double sum = 0.0;
      for (double& v : p) {
        v = rng.uniform_double() + 1e-9;
        sum += v;
      }
      for (double& v : p) v /= sum;
      table.push_back(std::move(p));
    }
    StubClassifier cls(5, std::move(table));
    const ScoreReport r = inception_score(dummy_images(12), cls, 3,
                                          Seed{static_cast<std::uint64_t>(trial)});
    CHECK(r.inception_score_mean >= 1.0 - 1e-12);
    CHECK(r.inception_score_mean <= 5.0 + 1e-12);
  }
}

TEST_CASE("inception score with one split is seed-invariant") {
  StubClassifier cls(2, {{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}});
  const ScoreReport a = inception_score(dummy_images(9), cls, 1, Seed{10});
  StubClassifier cls2(2, {{0.8, 0.2}, {0.3, 0.7}, {0.5, 0.5}});
  const ScoreReport b = inception_score(dummy_images(9), cls2, 1, Seed{77});
  CHECK(a.inception_score_mean == b.inception_score_mean);
}

TEST_CASE("inception score rejects non-distribution outputs with the image index") {
  StubClassifier cls(2, {{0.9, 0.1}, {0.9, 0.3}});  // second row sums to 1.2
  try {
    inception_score(dummy_images(2), cls, 1, Seed{5});
    FAIL("expected rejection");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()).find("image 1") != std::string::npos);
  }
  CHECK_THROWS_AS(inception_score(dummy_images(2), cls, 3, Seed{5}), ValidationError);
}

TEST_CASE("grayscale patch features: constant image and index-loop oracle") {
  Tensor<float> gray({3, 128, 128});
  gray.fill(0.25f);
  const auto feats = grayscale_patch_features(OverheadImage::from_chw(gray));
  REQUIRE(feats.size() == 100);
  for (float f : feats) CHECK(f == doctest::Approx(0.25f));

  const auto ds = scene::make_dataset(Seed{6}, 2, 0.5);
  const auto& img = ds[0].overhead;
  const auto got = grayscale_patch_features(img);
  std::size_t k = 0;
  for (int y = 59; y < 69; ++y) {
    for (int x = 59; x < 69; ++x, ++k) {
      const float mean = (img.at(0, y, x) + img.at(1, y, x) + img.at(2, y, x)) / 3.0f;
      CHECK(got[k] == mean);
    }
  }
}

TEST_CASE("linear classifier separates the two-cluster toy problem perfectly") {
  Xoshiro256 rng(7);
  std::vector<std::vector<float>> features;
  std::vector<LandCover> labels;
  for (int i = 0; i < 40; ++i) {
    const bool urban = i % 2 == 0;
    const float cx = urban ? 1.0f : -1.0f;
    features.push_back({cx + 0.05f * (rng.uniform_float() - 0.5f),
                        0.05f * (rng.uniform_float() - 0.5f)});
    labels.push_back(urban ? LandCover::urban : LandCover::rural);
  }
  const ClassificationReport r = classify_land_cover(features, labels, 20, Seed{8});
  CHECK(r.accuracy == 1.0);
  CHECK(r.n_train == 20);
  CHECK(r.n_test == 20);
  CHECK(r.confusion[0][0] + r.confusion[0][1] + r.confusion[1][0] + r.confusion[1][1] ==
        r.n_test);
}

TEST_CASE("random labels score chance accuracy on 1000 test points") {
  Xoshiro256 rng(9);
  std::vector<std::vector<float>> features;
  std::vector<LandCover> labels;
  for (int i = 0; i < 1200; ++i) {
    std::vector<float> f(8);
    for (float& v : f) v = rng.uniform_float() * 2.0f - 1.0f;
    features.push_back(std::move(f));
    labels.push_back(rng.uniform_int(2) == 0 ? LandCover::rural : LandCover::urban);
  }
  const ClassificationReport r = classify_land_cover(features, labels, 200, Seed{10});
  CHECK(r.n_test == 1000);
  CHECK(r.accuracy > 0.45);
  CHECK(r.accuracy < 0.55);
}

TEST_CASE("classification is deterministic in the seed and validates inputs") {
  std::vector<std::vector<float>> features;
  std::vector<LandCover> labels;
  Xoshiro256 rng(11);
  for (int i = 0; i < 30; ++i) {
    features.push_back({rng.uniform_float(), rng.uniform_float()});
    labels.push_back(i % 3 == 0 ? LandCover::urban : LandCover::rural);
  }
  const auto a = classify_land_cover(features, labels, 10, Seed{12});
  const auto b = classify_land_cover(features, labels, 10, Seed{12});
  CHECK(a.accuracy == b.accuracy);
  CHECK(a.confusion == b.confusion);

  CHECK_THROWS_AS(classify_land_cover(features, labels, 30, Seed{12}), ValidationError);
  CHECK_THROWS_AS(classify_land_cover(features, labels, 0, Seed{12}), ValidationError);

  // Single-class training slice.
  std::vector<LandCover> all_rural(labels.size(), LandCover::rural);
  CHECK_THROWS_AS(classify_land_cover(features, all_rural, 10, Seed{12}), ValidationError);
}

TEST_CASE("scene classifier reaches the holdout target on synthetic data") {
  const auto ds = scene::make_dataset(Seed{13}, 500, 0.5);
  const TrainedSceneClassifier trained = train_scene_classifier(ds, Seed{14});
  CHECK(trained.holdout_accuracy >= 0.95);

  // Distribution contract on random inputs.
  Xoshiro256 rng(15);
  for (int i = 0; i < 100; ++i) {
    Tensor<float> chw({3, 64, 64});
    for (std::size_t j = 0; j < chw.numel(); ++j) chw[j] = rng.uniform_float() * 2.0f - 1.0f;
    const auto p = trained.classifier->predict_proba(GroundImage::from_chw(chw));
    REQUIRE(p.size() == 2);
    CHECK(p[0] >= 0.0);
    CHECK(p[1] >= 0.0);
    CHECK(std::fabs(p[0] + p[1] - 1.0) <= 1e-6);
  }
}

TEST_CASE("scene classifier training is deterministic in the seed") {
  const auto ds = scene::make_dataset(Seed{16}, 120, 0.5);
  const TrainedSceneClassifier a = train_scene_classifier(ds, Seed{17});
  const TrainedSceneClassifier b = train_scene_classifier(ds, Seed{17});
  CHECK(a.holdout_accuracy == b.holdout_accuracy);
  CHECK(a.epochs_used == b.epochs_used);
}

TEST_CASE("scene classifier save/load preserves predictions") {
  const auto ds = scene::make_dataset(Seed{18}, 120, 0.5);
  const TrainedSceneClassifier trained = train_scene_classifier(ds, Seed{19});
  const auto dir = std::filesystem::temp_directory_path() / "crossview_cls";
  std::filesystem::create_directories(dir);
  trained.classifier->save(dir / "cls.bin");
  const auto loaded = SceneClassifier::load(dir / "cls.bin");
  const auto pa = trained.classifier->predict_proba(ds[0].ground);
  const auto pb = loaded->predict_proba(ds[0].ground);
  CHECK(pa == pb);
}

TEST_CASE("report JSON carries the exact field names") {
  ScoreReport s;
  s.inception_score_mean = 1.5;
  s.inception_score_std = 0.1;
  s.n_images = 10;
  s.n_splits = 2;
  const auto js = s.to_json();
  CHECK(js.contains("inception_score_mean"));
  CHECK(js.contains("inception_score_std"));
  CHECK(js.contains("n_images"));
  CHECK(js.contains("n_splits"));

  ClassificationReport c;
  c.feature_source = "grayscale_patch";
  const auto jc = c.to_json();
  CHECK(jc.contains("accuracy"));
  CHECK(jc.contains("confusion"));
  CHECK(jc.contains("n_train"));
  CHECK(jc.contains("n_test"));
  CHECK(jc["feature_source"] == "grayscale_patch");
}
