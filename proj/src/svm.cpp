// Linear maximum-margin classifier on standardized features: hinge loss with
// L2 regularization (weight 1.0), trained by deterministic full-batch
// projected subgradient descent with the 1/(lambda*t) step schedule.

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "crossview/errors.hpp"
#include "crossview/evaluation.hpp"

namespace crossview {

namespace {

constexpr double kLambda = 1.0;
constexpr int kIterations = 2000;

struct Scaler {
  std::vector<double> mean, inv_std;

  void fit(const std::vector<const std::vector<float>*>& rows) {
    const std::size_t dim = rows[0]->size();
    mean.assign(dim, 0.0);
    inv_std.assign(dim, 0.0);
    for (const auto* r : rows) {
      for (std::size_t d = 0; d < dim; ++d) mean[d] += (*r)[d];
    }
    for (double& m : mean) m /= static_cast<double>(rows.size());
    std::vector<double> var(dim, 0.0);
    for (const auto* r : rows) {
      for (std::size_t d = 0; d < dim; ++d) {
        const double c = (*r)[d] - mean[d];
        var[d] += c * c;
      }
    }
    for (std::size_t d = 0; d < dim; ++d) {
      const double sd = std::sqrt(var[d] / static_cast<double>(rows.size()));
      inv_std[d] = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant dims carry no signal
    }
  }

  std::vector<double> transform(const std::vector<float>& row) const {
    std::vector<double> out(row.size());
    for (std::size_t d = 0; d < row.size(); ++d) out[d] = (row[d] - mean[d]) * inv_std[d];
    return out;
  }
};

}  // namespace

ClassificationReport classify_land_cover(const std::vector<std::vector<float>>& features,
                                         const std::vector<LandCover>& labels, int n_train,
                                         Seed seed) {
  const int n = static_cast<int>(features.size());
  if (n != static_cast<int>(labels.size())) {
    throw ValidationError("features and labels disagree in length");
  }
  if (n_train < 1 || n_train >= n) {
    throw ValidationError("n_train must satisfy 1 <= n_train < n_total");
  }
  const std::size_t dim = features[0].size();
  for (const auto& f : features) {
    if (f.size() != dim) throw ValidationError("feature vectors have inconsistent lengths");
  }

  std::vector<int> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Xoshiro256 rng(seed);
  for (int i = n - 1; i > 0; --i) {
    const int j = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(i) + 1));
    std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
  }

  bool train_has_rural = false, train_has_urban = false;
  for (int i = 0; i < n_train; ++i) {
    (labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])] == LandCover::rural
         ? train_has_rural
         : train_has_urban) = true;
  }
  if (!train_has_rural || !train_has_urban) {
    throw ValidationError("training slice holds a single class; cannot fit a classifier");
  }

  std::vector<const std::vector<float>*> train_rows;
  train_rows.reserve(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) {
    train_rows.push_back(&features[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])]);
  }
  Scaler scaler;
  scaler.fit(train_rows);

  std::vector<std::vector<double>> x(static_cast<std::size_t>(n_train));
  std::vector<double> y(static_cast<std::size_t>(n_train));
  for (int i = 0; i < n_train; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    x[static_cast<std::size_t>(i)] = scaler.transform(features[static_cast<std::size_t>(idx)]);
    y[static_cast<std::size_t>(i)] =
        labels[static_cast<std::size_t>(idx)] == LandCover::urban ? 1.0 : -1.0;
  }

  std::vector<double> w(dim, 0.0);
  double bias = 0.0;
  std::vector<double> grad(dim);
  for (int t = 1; t <= kIterations; ++t) {
    for (std::size_t d = 0; d < dim; ++d) grad[d] = kLambda * w[d];
    double grad_b = 0.0;
    for (int i = 0; i < n_train; ++i) {
      const auto& xi = x[static_cast<std::size_t>(i)];
      double margin = bias;
      for (std::size_t d = 0; d < dim; ++d) margin += w[d] * xi[d];
      margin *= y[static_cast<std::size_t>(i)];
      if (margin < 1.0) {
        const double c = -y[static_cast<std::size_t>(i)] / static_cast<double>(n_train);
        for (std::size_t d = 0; d < dim; ++d) grad[d] += c * xi[d];
        grad_b += c;
      }
    }
    const double eta = 1.0 / (kLambda * static_cast<double>(t));
    for (std::size_t d = 0; d < dim; ++d) w[d] -= eta * grad[d];
    bias -= eta * grad_b;
  }

  ClassificationReport report;
  report.n_train = n_train;
  report.n_test = n - n_train;
  report.feature_source = "cgan_features";
  int correct = 0;
  for (int i = n_train; i < n; ++i) {
    const int idx = order[static_cast<std::size_t>(i)];
    const std::vector<double> xi = scaler.transform(features[static_cast<std::size_t>(idx)]);
    double score = bias;
    for (std::size_t d = 0; d < dim; ++d) score += w[d] * xi[d];
    const int predicted = score >= 0.0 ? 1 : 0;
    const int truth = labels[static_cast<std::size_t>(idx)] == LandCover::urban ? 1 : 0;
    report.confusion[static_cast<std::size_t>(truth)][static_cast<std::size_t>(predicted)] += 1;
    if (predicted == truth) ++correct;
  }
  report.accuracy = static_cast<double>(correct) / static_cast<double>(report.n_test);
  return report;
}

}  // namespace crossview
