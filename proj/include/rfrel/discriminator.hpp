#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfrel/imaging.hpp"

namespace rfrel {

/// Train/validation/test fractions and the shuffle seed of one pair.
struct SplitSpec {
  double train_frac = 0.6;
  double val_frac = 0.2;
  double test_frac = 0.2;
  std::uint64_t shuffle_seed = 0;

  void validate() const;
};

struct SplitCounts {
  std::size_t train = 0;
  std::size_t val = 0;
  std::size_t test = 0;
};

/// Per-class split sizes: train and val rounded, test takes the rest.
/// ArgumentError if any part would be empty.
SplitCounts split_counts(std::size_t n, const SplitSpec& spec);

/// An item of class `label` (0 = x, 1 = y) at position `index` in its list.
struct LabeledIndex {
  int label = 0;
  std::size_t index = 0;
  bool operator==(const LabeledIndex&) const = default;
};

struct SplitPlan {
  std::vector<LabeledIndex> train;
  std::vector<LabeledIndex> val;
  std::vector<LabeledIndex> test;
};

/// Shuffles each class with the spec seed, then cuts contiguous parts.
/// Within each part, class 0 items precede class 1 items.
SplitPlan plan_split(std::size_t n_x, std::size_t n_y, const SplitSpec& spec);

template <typename T>
struct LabeledSet {
  std::vector<const T*> items;
  std::vector<int> labels;

  std::size_t size() const noexcept { return items.size(); }
};

struct ImageSplit {
  LabeledSet<TileImage> train;
  LabeledSet<TileImage> val;
  LabeledSet<TileImage> test;
};

/// Images of x are labeled 0, images of y labeled 1. The result points
/// into the input spans.
ImageSplit split_images(std::span<const TileImage> images_x, std::span<const TileImage> images_y,
                        const SplitSpec& spec);

/// Hyperparameters of the pooled logistic-regression discriminator.
struct TrainConfig {
  int epochs = 200;
  double learning_rate = 0.5;
  double l2 = 1e-3;
  int pool_grid = 28;  // must divide 224

  void validate() const;
};

nlohmann::json to_json(const TrainConfig& c);
TrainConfig train_config_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SplitSpec& s);
SplitSpec split_spec_from_json(const nlohmann::json& j);

/// Average-pool to pool_grid x pool_grid, then log1p. Row-major.
std::vector<float> pool_features(const TileImage& image, int pool_grid);

/// Row-major feature rows with binary labels.
struct FeatureMatrix {
  std::size_t dim = 0;
  std::vector<float> data;
  std::vector<int> labels;

  explicit FeatureMatrix(std::size_t dimension = 0) : dim(dimension) {}
  std::size_t rows() const noexcept { return labels.size(); }
  std::span<const float> row(std::size_t i) const { return {data.data() + i * dim, dim}; }
  void add(std::span<const float> features, int label);
};

/// Pooled features of every image of one measurement, computed once and
/// shared by all pairs involving that measurement.
struct MeasurementFeatures {
  std::size_t dim = 0;
  std::vector<std::vector<float>> images;
};

MeasurementFeatures extract_features(std::span<const TileImage> images, int pool_grid, int workers = 0);
MeasurementFeatures extract_features_serial(std::span<const TileImage> images, int pool_grid);

FeatureMatrix gather(const MeasurementFeatures& x, const MeasurementFeatures& y,
                     std::span<const LabeledIndex> part);

/// Logistic model over standardized features.
class LogisticDiscriminator {
 public:
  LogisticDiscriminator(std::vector<double> mean, std::vector<double> inv_scale, std::vector<double> weights,
                        double bias);

  double probability(std::span<const float> features) const;
  int predict(std::span<const float> features) const { return probability(features) >= 0.5 ? 1 : 0; }

  const std::vector<double>& weights() const noexcept { return weights_; }
  double bias() const noexcept { return bias_; }

  // Epoch whose parameters were kept (0 = untrained) and its val accuracy.
  int best_epoch = 0;
  double best_val_accuracy = 0.0;

 private:
  std::vector<double> mean_;
  std::vector<double> inv_scale_;
  std::vector<double> weights_;
  double bias_ = 0.0;
};

/// Standardize with train statistics, initialise at the class prior, run
/// full-batch gradient descent on the L2-regularised log loss, and keep
/// the parameters of the best validation epoch (earliest on ties).
LogisticDiscriminator reference_train(const FeatureMatrix& train, const FeatureMatrix& val,
                                      const TrainConfig& hyper);
LogisticDiscriminator reference_train(const LabeledSet<TileImage>& train, const LabeledSet<TileImage>& val,
                                      const TrainConfig& hyper);

struct DeltaResult {
  std::size_t correct = 0;
  std::size_t total = 0;
  double delta = 0.0;
};

DeltaResult delta_from_counts(std::size_t correct, std::size_t total);

double accuracy(const LogisticDiscriminator& disc, const FeatureMatrix& set);

DeltaResult evaluate_delta(const LogisticDiscriminator& disc, const FeatureMatrix& test);
DeltaResult evaluate_delta(const LogisticDiscriminator& disc, const LabeledSet<TileImage>& test,
                           int pool_grid);

}  // namespace rfrel
