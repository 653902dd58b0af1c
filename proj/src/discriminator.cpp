#include "rfrel/discriminator.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rfrel/parallel.hpp"
#include "rfrel/rng.hpp"

namespace rfrel {

void SplitSpec::validate() const {
  if (!(train_frac > 0.0 && val_frac > 0.0 && test_frac > 0.0))
    throw ArgumentError("split fractions must be positive");
  if (std::abs(train_frac + val_frac + test_frac - 1.0) > 1e-9)
    throw ArgumentError("split fractions must sum to 1");
}

SplitCounts split_counts(std::size_t n, const SplitSpec& spec) {
  spec.validate();
  const auto dn = static_cast<double>(n);
  SplitCounts c;
  c.train = static_cast<std::size_t>(std::llround(spec.train_frac * dn));
  c.val = static_cast<std::size_t>(std::llround(spec.val_frac * dn));
  if (c.train + c.val > n) c.val = n - std::min(c.train, n);
  c.test = n - c.train - c.val;
  if (c.train == 0 || c.val == 0 || c.test == 0)
    throw ArgumentError("too few images (" + std::to_string(n) + ") for a non-empty train/val/test split");
  return c;
}

SplitPlan plan_split(std::size_t n_x, std::size_t n_y, const SplitSpec& spec) {
  if (n_x == 0 || n_y == 0) throw ArgumentError("both image lists must be non-empty");
  SplitPlan plan;
  const std::size_t sizes[2] = {n_x, n_y};
  for (int label = 0; label < 2; ++label) {
    const auto n = sizes[label];
    const auto counts = split_counts(n, spec);
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Rng rng(derive_seed(spec.shuffle_seed, Stream::pair, {static_cast<std::uint64_t>(label)}));
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      const LabeledIndex item{label, order[i]};
      if (i < counts.train) plan.train.push_back(item);
      else if (i < counts.train + counts.val) plan.val.push_back(item);
      else plan.test.push_back(item);
    }
  }
  return plan;
}

ImageSplit split_images(std::span<const TileImage> images_x, std::span<const TileImage> images_y,
                        const SplitSpec& spec) {
  const auto plan = plan_split(images_x.size(), images_y.size(), spec);
  auto fill = [&](const std::vector<LabeledIndex>& part) {
    LabeledSet<TileImage> set;
    for (const auto& li : part) {
      set.items.push_back(li.label == 0 ? &images_x[li.index] : &images_y[li.index]);
      set.labels.push_back(li.label);
    }
    return set;
  };
  return {fill(plan.train), fill(plan.val), fill(plan.test)};
}

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("epochs must be >= 0");
  if (!(learning_rate > 0.0)) throw ArgumentError("learning_rate must be positive");
  if (!(l2 >= 0.0)) throw ArgumentError("l2 must be >= 0");
  if (pool_grid < 1 || kTileGrid % pool_grid != 0) throw ArgumentError("pool_grid must divide 224");
}

nlohmann::json to_json(const TrainConfig& c) {
  return {{"epochs", c.epochs}, {"learning_rate", c.learning_rate}, {"l2", c.l2}, {"pool_grid", c.pool_grid}};
}

TrainConfig train_config_from_json(const nlohmann::json& j) {
  TrainConfig c;
  c.epochs = j.value("epochs", c.epochs);
  c.learning_rate = j.value("learning_rate", c.learning_rate);
  c.l2 = j.value("l2", c.l2);
  c.pool_grid = j.value("pool_grid", c.pool_grid);
  c.validate();
  return c;
}

nlohmann::json to_json(const SplitSpec& s) {
  return {{"train", s.train_frac}, {"val", s.val_frac}, {"test", s.test_frac}};
}

SplitSpec split_spec_from_json(const nlohmann::json& j) {
  SplitSpec s;
  s.train_frac = j.value("train", s.train_frac);
  s.val_frac = j.value("val", s.val_frac);
  s.test_frac = j.value("test", s.test_frac);
  s.validate();
  return s;
}

std::vector<float> pool_features(const TileImage& image, int pool_grid) {
  if (pool_grid < 1 || kTileGrid % pool_grid != 0) throw ArgumentError("pool_grid must divide 224");
  const int block = kTileGrid / pool_grid;
  const double area = static_cast<double>(block * block);
  std::vector<float> out(static_cast<std::size_t>(pool_grid * pool_grid));
  for (int pr = 0; pr < pool_grid; ++pr) {
    for (int pc = 0; pc < pool_grid; ++pc) {
      std::uint64_t sum = 0;
      for (int r = pr * block; r < (pr + 1) * block; ++r)
        for (int c = pc * block; c < (pc + 1) * block; ++c) sum += image.at(r, c);
      out[static_cast<std::size_t>(pr * pool_grid + pc)] =
          static_cast<float>(std::log1p(static_cast<double>(sum) / area));
    }
  }
  return out;
}

void FeatureMatrix::add(std::span<const float> features, int label) {
  if (features.size() != dim) throw ArgumentError("feature dimension mismatch");
  data.insert(data.end(), features.begin(), features.end());
  labels.push_back(label);
}

MeasurementFeatures extract_features(std::span<const TileImage> images, int pool_grid, int workers) {
  MeasurementFeatures f;
  f.dim = static_cast<std::size_t>(pool_grid * pool_grid);
  f.images.resize(images.size());
  ExceptionSlot errors;
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
  for (std::size_t i = 0; i < images.size(); ++i) {
    errors.run([&] { f.images[i] = pool_features(images[i], pool_grid); });
  }
  errors.rethrow();
  return f;
}

MeasurementFeatures extract_features_serial(std::span<const TileImage> images, int pool_grid) {
  MeasurementFeatures f;
  f.dim = static_cast<std::size_t>(pool_grid * pool_grid);
  for (const auto& image : images) f.images.push_back(pool_features(image, pool_grid));
  return f;
}

FeatureMatrix gather(const MeasurementFeatures& x, const MeasurementFeatures& y,
                     std::span<const LabeledIndex> part) {
  if (x.dim != y.dim) throw ArgumentError("feature dimension mismatch between measurements");
  FeatureMatrix m(x.dim);
  for (const auto& li : part) {
    const auto& src = li.label == 0 ? x : y;
    if (li.index >= src.images.size()) throw ArgumentError("split index out of range");
    m.add(src.images[li.index], li.label);
  }
  return m;
}

LogisticDiscriminator::LogisticDiscriminator(std::vector<double> mean, std::vector<double> inv_scale,
                                             std::vector<double> weights, double bias)
    : mean_(std::move(mean)), inv_scale_(std::move(inv_scale)), weights_(std::move(weights)), bias_(bias) {}

double LogisticDiscriminator::probability(std::span<const float> features) const {
  if (features.size() != weights_.size()) throw ArgumentError("feature dimension mismatch");
  double z = bias_;
  for (std::size_t j = 0; j < features.size(); ++j)
    z += weights_[j] * (static_cast<double>(features[j]) - mean_[j]) * inv_scale_[j];
  return 1.0 / (1.0 + std::exp(-z));
}

namespace {

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

// Standardized copy of a feature matrix, row-major.
std::vector<double> standardize(const FeatureMatrix& m, const std::vector<double>& mean,
                                const std::vector<double>& inv_scale) {
  std::vector<double> z(m.rows() * m.dim);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const auto row = m.row(i);
    for (std::size_t j = 0; j < m.dim; ++j)
      z[i * m.dim + j] = (static_cast<double>(row[j]) - mean[j]) * inv_scale[j];
  }
  return z;
}

double margin(const std::vector<double>& z, std::size_t i, std::size_t dim, const std::vector<double>& w, double b) {
  const double* row = z.data() + i * dim;
  double s = b;
  for (std::size_t j = 0; j < dim; ++j) s += w[j] * row[j];
  return s;
}

double standardized_accuracy(const std::vector<double>& z, const std::vector<int>& labels, std::size_t dim,
                             const std::vector<double>& w, double b) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int pred = sigmoid(margin(z, i, dim, w, b)) >= 0.5 ? 1 : 0;
    correct += pred == labels[i];
  }
  return labels.empty() ? 0.0 : static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace

LogisticDiscriminator reference_train(const FeatureMatrix& train, const FeatureMatrix& val,
                                      const TrainConfig& hyper) {
  hyper.validate();
  const std::size_t n = train.rows();
  const std::size_t d = train.dim;
  const auto positives = static_cast<std::size_t>(std::count(train.labels.begin(), train.labels.end(), 1));
  if (n == 0 || positives == 0 || positives == n)
    throw ArgumentError("training set must contain both classes");
  if (val.rows() == 0) throw ArgumentError("validation set is empty");
  if (val.dim != d) throw ArgumentError("train/val feature dimension mismatch");

  std::vector<double> mean(d, 0.0);
  std::vector<double> inv_scale(d, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train.row(i);
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (auto& m : mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto row = train.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = row[j] - mean[j];
      inv_scale[j] += dv * dv;
    }
  }
  for (auto& s : inv_scale) {
    const double sd = std::sqrt(s / static_cast<double>(n));
    s = sd > 1e-12 ? 1.0 / sd : 0.0;  // constant features drop out
  }

  const auto ztrain = standardize(train, mean, inv_scale);
  const auto zval = standardize(val, mean, inv_scale);

  std::vector<double> w(d, 0.0);
  double b = std::log(static_cast<double>(positives) / static_cast<double>(n - positives));

  std::vector<double> best_w = w;
  double best_b = b;
  int best_epoch = 0;
  double best_acc = standardized_accuracy(zval, val.labels, d, w, b);

  std::vector<double> grad(d);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (int epoch = 1; epoch <= hyper.epochs; ++epoch) {
    std::fill(grad.begin(), grad.end(), 0.0);
    double grad_b = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double err = sigmoid(margin(ztrain, i, d, w, b)) - train.labels[i];
      const double* row = ztrain.data() + i * d;
      for (std::size_t j = 0; j < d; ++j) grad[j] += err * row[j];
      grad_b += err;
    }
    for (std::size_t j = 0; j < d; ++j) w[j] -= hyper.learning_rate * (grad[j] * inv_n + hyper.l2 * w[j]);
    b -= hyper.learning_rate * grad_b * inv_n;

    const double acc = standardized_accuracy(zval, val.labels, d, w, b);
    if (acc > best_acc) {
      best_acc = acc;
      best_w = w;
      best_b = b;
      best_epoch = epoch;
    }
  }

  LogisticDiscriminator disc(std::move(mean), std::move(inv_scale), std::move(best_w), best_b);
  disc.best_epoch = best_epoch;
  disc.best_val_accuracy = best_acc;
  return disc;
}

namespace {

FeatureMatrix pool_set(const LabeledSet<TileImage>& set, int pool_grid) {
  FeatureMatrix m(static_cast<std::size_t>(pool_grid * pool_grid));
  for (std::size_t i = 0; i < set.size(); ++i) m.add(pool_features(*set.items[i], pool_grid), set.labels[i]);
  return m;
}

}  // namespace

LogisticDiscriminator reference_train(const LabeledSet<TileImage>& train, const LabeledSet<TileImage>& val,
                                      const TrainConfig& hyper) {
  hyper.validate();
  return reference_train(pool_set(train, hyper.pool_grid), pool_set(val, hyper.pool_grid), hyper);
}

DeltaResult delta_from_counts(std::size_t correct, std::size_t total) {
  if (total == 0) throw ArgumentError("test set is empty");
  if (correct > total) throw ArgumentError("correct exceeds total");
  return {correct, total, static_cast<double>(correct) / static_cast<double>(total)};
}

double accuracy(const LogisticDiscriminator& disc, const FeatureMatrix& set) {
  return evaluate_delta(disc, set).delta;
}

DeltaResult evaluate_delta(const LogisticDiscriminator& disc, const FeatureMatrix& test) {
  std::size_t correct = 0;
  for (std::size_t i = 0; i < test.rows(); ++i) correct += disc.predict(test.row(i)) == test.labels[i];
  return delta_from_counts(correct, test.rows());
}

DeltaResult evaluate_delta(const LogisticDiscriminator& disc, const LabeledSet<TileImage>& test, int pool_grid) {
  return evaluate_delta(disc, pool_set(test, pool_grid));
}

}  // namespace rfrel
