#pragma once

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "rfrel/discriminator.hpp"

namespace rfrel {

struct DissimilarityRecord {
  int tx_id = 0;
  int x = 0;  // 1-based, x < y
  int y = 0;
  double delta = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::string discriminator_id;
  std::uint64_t seed = 0;

  bool operator==(const DissimilarityRecord&) const = default;
};

/// Symmetric n x n delta grid for one transmitter, stored as one optional
/// record per unordered pair. Measurement indices are 1-based.
class DissimilarityMatrix {
 public:
  DissimilarityMatrix() = default;
  DissimilarityMatrix(int tx_id, int n);

  /// Complete matrix from a value function f(x, y), x < y. For tests and
  /// for analytics on matrices that did not come from a discriminator.
  static DissimilarityMatrix from_function(int tx_id, int n, const std::function<double(int, int)>& f);

  int tx_id() const noexcept { return tx_id_; }
  int n() const noexcept { return n_; }
  std::size_t pair_count() const noexcept { return entries_.size(); }

  /// Absent on the diagonal and for pairs not yet computed.
  std::optional<double> delta(int x, int y) const;
  /// Like delta() but throws IncompleteMatrixError for missing pairs.
  double at(int x, int y) const;
  const std::optional<DissimilarityRecord>& record(int x, int y) const;

  void set(DissimilarityRecord record);
  void record_failure(int x, int y, std::string message);
  void clear_failure(int x, int y);

  bool complete() const;
  std::size_t entry_count() const;
  std::vector<std::pair<int, int>> missing_pairs() const;
  const std::map<std::pair<int, int>, std::string>& failures() const noexcept { return failures_; }
  /// Present deltas in (x, y) lexicographic order.
  std::vector<double> values() const;

  /// IncompleteMatrixError listing (a prefix of) the missing pairs.
  void require_complete() const;

  nlohmann::json to_json() const;
  static DissimilarityMatrix from_json(const nlohmann::json& doc);
  /// Written to a temporary file and renamed into place.
  void save(const std::filesystem::path& path) const;
  static DissimilarityMatrix load(const std::filesystem::path& path);

 private:
  std::size_t slot(int x, int y) const;

  int tx_id_ = 0;
  int n_ = 0;
  std::vector<std::optional<DissimilarityRecord>> entries_;
  std::map<std::pair<int, int>, std::string> failures_;
};

/// One unit of work for a discriminator: measurements x < y of tx_id.
struct PairJob {
  int tx_id = 0;
  int x = 0;
  int y = 0;
  std::uint64_t seed = 0;
};

/// Computes delta for one measurement pair. Implementations must be pure
/// in the job and safe to call concurrently.
class PairDiscriminator {
 public:
  virtual ~PairDiscriminator() = default;
  virtual std::string id() const = 0;
  virtual DeltaResult run(const PairJob& job) const = 0;
};

/// Pooled logistic regression over precomputed per-measurement features.
class ReferencePairDiscriminator final : public PairDiscriminator {
 public:
  /// features[i] holds measurement i + 1.
  ReferencePairDiscriminator(std::vector<MeasurementFeatures> features, SplitSpec split, TrainConfig hyper);

  std::string id() const override;
  DeltaResult run(const PairJob& job) const override;

 private:
  std::vector<MeasurementFeatures> features_;
  SplitSpec split_;
  TrainConfig hyper_;
};

std::uint64_t pair_seed(std::uint64_t master_seed, int tx_id, int x, int y);

struct MatrixOptions {
  int workers = 0;
  /// Stop after this many new computations (simulates an interruption).
  std::size_t max_new_entries = std::numeric_limits<std::size_t>::max();
  /// Rewritten atomically after every finished entry when set.
  std::optional<std::filesystem::path> checkpoint;
  /// Called under a lock, in completion order.
  std::function<void(const DissimilarityRecord&, std::chrono::duration<double>)> on_entry;
  std::function<void(int, int, const std::string&)> on_failure;
};

struct MatrixRunStats {
  std::size_t computed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

/// Fills the missing entries of `matrix` in parallel. Entries already
/// present are skipped, so rerunning over a complete matrix is a no-op.
/// Discriminator exceptions become per-entry failures.
MatrixRunStats fill_matrix(DissimilarityMatrix& matrix, const PairDiscriminator& disc, std::uint64_t master_seed,
                           const MatrixOptions& options = {});

/// Single-threaded reference of fill_matrix.
MatrixRunStats fill_matrix_serial(DissimilarityMatrix& matrix, const PairDiscriminator& disc,
                                  std::uint64_t master_seed, const MatrixOptions& options = {});

}  // namespace rfrel
