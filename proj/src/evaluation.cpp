#include "crossview/evaluation.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include "crossview/errors.hpp"

namespace crossview {

using nlohmann::json;

std::vector<std::vector<double>> ClassifierInterface::predict_batch(
    const std::vector<GroundImage>& images) const {
  std::vector<std::vector<double>> out;
  out.reserve(images.size());
  for (const GroundImage& img : images) out.push_back(predict_proba(img));
  return out;
}

json ScoreReport::to_json() const {
  return json{{"inception_score_mean", inception_score_mean},
              {"inception_score_std", inception_score_std},
              {"n_images", n_images},
              {"n_splits", n_splits}};
}

void ScoreReport::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFault("cannot write score report: " + path.string());
  out << to_json().dump(2) << "\n";
}

json ClassificationReport::to_json() const {
  return json{{"accuracy", accuracy},
              {"confusion",
               {{"rural", {{"rural", confusion[0][0]}, {"urban", confusion[0][1]}}},
                {"urban", {{"rural", confusion[1][0]}, {"urban", confusion[1][1]}}}}},
              {"n_train", n_train},
              {"n_test", n_test},
              {"feature_source", feature_source}};
}

void ClassificationReport::write(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw RuntimeFault("cannot write classification report: " + path.string());
  out << to_json().dump(2) << "\n";
}

ScoreReport inception_score(const std::vector<GroundImage>& images,
                            const ClassifierInterface& classifier, int n_splits, Seed seed) {
  const int n = static_cast<int>(images.size());
  if (n_splits < 1) throw ValidationError("n_splits must be >= 1");
  if (n < n_splits) throw ValidationError("need at least one image per split");

  const std::vector<std::vector<double>> preds = classifier.predict_batch(images);
  const int classes = classifier.num_classes();
  for (int i = 0; i < n; ++i) {
    const auto& p = preds[static_cast<std::size_t>(i)];
    if (static_cast<int>(p.size()) != classes) {
      throw ValidationError("classifier output for image " + std::to_string(i) +
                            " has wrong length");
    }
    double sum = 0.0;
    for (double v : p) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ValidationError("classifier output for image " + std::to_string(i) +
                              " is not a distribution (negative or non-finite entry)");
      }
      sum += v;
    }
    if (std::fabs(sum - 1.0) > 1e-6) {
      throw ValidationError("classifier output for image " + std::to_string(i) +
                            " sums to " + std::to_string(sum) + ", not 1");
    }
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  constexpr double kLogClamp = 1e-12;
  std::vector<double> split_scores;
  split_scores.reserve(static_cast<std::size_t>(n_splits));
  for (int s = 0; s < n_splits; ++s) {
    const int begin = static_cast<int>(static_cast<std::int64_t>(n) * s / n_splits);
    const int end = static_cast<int>(static_cast<std::int64_t>(n) * (s + 1) / n_splits);
    const int count = end - begin;

    std::vector<double> marginal(static_cast<std::size_t>(classes), 0.0);
    for (int i = begin; i < end; ++i) {
      const auto& p = preds[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      for (int c = 0; c < classes; ++c) marginal[static_cast<std::size_t>(c)] += p[c];
    }
    for (double& m : marginal) m /= count;

    double kl_sum = 0.0;
    for (int i = begin; i < end; ++i) {
      const auto& p = preds[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
      double kl = 0.0;
      for (int c = 0; c < classes; ++c) {
        const double pc = p[static_cast<std::size_t>(c)];
        if (pc > 0.0) {
          kl += pc * (std::log(std::max(pc, kLogClamp)) -
                      std::log(std::max(marginal[static_cast<std::size_t>(c)], kLogClamp)));
        }
      }
      kl_sum += kl;
    }
    split_scores.push_back(std::exp(kl_sum / count));
  }

  ScoreReport report;
  report.n_images = n;
  report.n_splits = n_splits;
  double mean = 0.0;
  for (double s : split_scores) mean += s;
  mean /= n_splits;
  double var = 0.0;
  for (double s : split_scores) var += (s - mean) * (s - mean);
  report.inception_score_mean = mean;
  report.inception_score_std = std::sqrt(var / n_splits);
  return report;
}

std::vector<float> grayscale_patch_features(const OverheadImage& overhead) {
  constexpr int kPatch = 10;
  const int y0 = kOverheadSize / 2 - kPatch / 2;
  const int x0 = kOverheadSize / 2 - kPatch / 2;
  std::vector<float> out;
  out.reserve(kPatch * kPatch);
  for (int y = 0; y < kPatch; ++y) {
    for (int x = 0; x < kPatch; ++x) {
      const float r = overhead.at(0, y0 + y, x0 + x);
      const float g = overhead.at(1, y0 + y, x0 + x);
      const float b = overhead.at(2, y0 + y, x0 + x);
      out.push_back((r + g + b) / 3.0f);
    }
  }
  return out;
}

}  // namespace crossview
