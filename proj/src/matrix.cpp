#include "rfrel/matrix.hpp"

#include <algorithm>
#include <fstream>
#include <mutex>
#include <sstream>

#include "rfrel/parallel.hpp"
#include "rfrel/rng.hpp"

namespace rfrel {

DissimilarityMatrix::DissimilarityMatrix(int tx_id, int n) : tx_id_(tx_id), n_(n) {
  if (n < 2) throw ArgumentError("a dissimilarity matrix needs at least 2 measurements");
  entries_.resize(static_cast<std::size_t>(n) * static_cast<std::size_t>(n - 1) / 2);
}

DissimilarityMatrix DissimilarityMatrix::from_function(int tx_id, int n, const std::function<double(int, int)>& f) {
  DissimilarityMatrix m(tx_id, n);
  for (int x = 1; x <= n; ++x)
    for (int y = x + 1; y <= n; ++y) m.set({tx_id, x, y, f(x, y), 0, 0, "synthetic", 0});
  return m;
}

std::size_t DissimilarityMatrix::slot(int x, int y) const {
  if (x > y) std::swap(x, y);
  if (x < 1 || y > n_ || x == y) throw ArgumentError("pair index out of range");
  const auto a = static_cast<std::size_t>(x - 1);
  const auto b = static_cast<std::size_t>(y - 1);
  const auto n = static_cast<std::size_t>(n_);
  // Row-major upper triangle without the diagonal.
  return a * n - a * (a + 1) / 2 + (b - a - 1);
}

std::optional<double> DissimilarityMatrix::delta(int x, int y) const {
  if (x == y) return std::nullopt;
  const auto& r = entries_[slot(x, y)];
  if (!r) return std::nullopt;
  return r->delta;
}

double DissimilarityMatrix::at(int x, int y) const {
  const auto d = delta(x, y);
  if (!d)
    throw IncompleteMatrixError("transmitter " + std::to_string(tx_id_) + ": no delta for pair (" +
                                std::to_string(x) + ", " + std::to_string(y) + ")");
  return *d;
}

const std::optional<DissimilarityRecord>& DissimilarityMatrix::record(int x, int y) const {
  return entries_[slot(x, y)];
}

void DissimilarityMatrix::set(DissimilarityRecord record) {
  if (record.x > record.y) std::swap(record.x, record.y);
  if (!(record.delta >= 0.0 && record.delta <= 1.0)) throw ArgumentError("delta must lie in [0, 1]");
  record.tx_id = tx_id_;
  const auto key = std::make_pair(record.x, record.y);
  entries_[slot(record.x, record.y)] = std::move(record);
  failures_.erase(key);
}

void DissimilarityMatrix::record_failure(int x, int y, std::string message) {
  if (x > y) std::swap(x, y);
  (void)slot(x, y);
  failures_[{x, y}] = std::move(message);
}

void DissimilarityMatrix::clear_failure(int x, int y) {
  if (x > y) std::swap(x, y);
  failures_.erase({x, y});
}

bool DissimilarityMatrix::complete() const {
  return std::all_of(entries_.begin(), entries_.end(), [](const auto& r) { return r.has_value(); });
}

std::size_t DissimilarityMatrix::entry_count() const {
  return static_cast<std::size_t>(
      std::count_if(entries_.begin(), entries_.end(), [](const auto& r) { return r.has_value(); }));
}

std::vector<std::pair<int, int>> DissimilarityMatrix::missing_pairs() const {
  std::vector<std::pair<int, int>> missing;
  for (int x = 1; x <= n_; ++x)
    for (int y = x + 1; y <= n_; ++y)
      if (!entries_[slot(x, y)]) missing.emplace_back(x, y);
  return missing;
}

std::vector<double> DissimilarityMatrix::values() const {
  std::vector<double> v;
  for (const auto& r : entries_)
    if (r) v.push_back(r->delta);
  return v;
}

void DissimilarityMatrix::require_complete() const {
  const auto missing = missing_pairs();
  if (missing.empty()) return;
  std::ostringstream os;
  os << "transmitter " << tx_id_ << ": " << missing.size() << " missing pair(s):";
  const std::size_t shown = std::min<std::size_t>(missing.size(), 20);
  for (std::size_t i = 0; i < shown; ++i) os << " (" << missing[i].first << "," << missing[i].second << ")";
  if (shown < missing.size()) os << " ...";
  throw IncompleteMatrixError(os.str());
}

nlohmann::json DissimilarityMatrix::to_json() const {
  using nlohmann::json;
  json records = json::array();
  for (const auto& r : entries_) {
    if (!r) continue;
    records.push_back({{"tx_id", r->tx_id},
                       {"x", r->x},
                       {"y", r->y},
                       {"delta", r->delta},
                       {"correct", r->correct},
                       {"total", r->total},
                       {"discriminator_id", r->discriminator_id},
                       {"seed", r->seed}});
  }
  json failures = json::array();
  for (const auto& [pair, msg] : failures_)
    failures.push_back({{"x", pair.first}, {"y", pair.second}, {"error", msg}});
  return {{"schema_version", 1},
          {"tx_id", tx_id_},
          {"n", n_},
          {"complete", complete()},
          {"records", std::move(records)},
          {"failures", std::move(failures)}};
}

DissimilarityMatrix DissimilarityMatrix::from_json(const nlohmann::json& doc) {
  try {
    DissimilarityMatrix m(doc.at("tx_id").get<int>(), doc.at("n").get<int>());
    for (const auto& r : doc.at("records")) {
      m.set({r.at("tx_id").get<int>(), r.at("x").get<int>(), r.at("y").get<int>(), r.at("delta").get<double>(),
             r.at("correct").get<std::size_t>(), r.at("total").get<std::size_t>(),
             r.at("discriminator_id").get<std::string>(), r.at("seed").get<std::uint64_t>()});
    }
    if (doc.contains("failures"))
      for (const auto& f : doc.at("failures"))
        m.record_failure(f.at("x").get<int>(), f.at("y").get<int>(), f.at("error").get<std::string>());
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed matrix document: ") + e.what());
  }
}

void DissimilarityMatrix::save(const std::filesystem::path& path) const {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw PersistenceError("cannot open for writing", tmp);
    out << to_json().dump(1) << '\n';
    if (!out) throw PersistenceError("write failed", tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw PersistenceError("cannot move matrix into place", path);
}

DissimilarityMatrix DissimilarityMatrix::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PersistenceError("cannot open", path);
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("matrix file " + path.string() + " is not valid JSON: " + e.what());
  }
}

ReferencePairDiscriminator::ReferencePairDiscriminator(std::vector<MeasurementFeatures> features, SplitSpec split,
                                                       TrainConfig hyper)
    : features_(std::move(features)), split_(split), hyper_(hyper) {
  split_.validate();
  hyper_.validate();
}

std::string ReferencePairDiscriminator::id() const {
  std::ostringstream os;
  os << "reference-logreg/pool" << hyper_.pool_grid << "/e" << hyper_.epochs << "/lr" << hyper_.learning_rate
     << "/l2" << hyper_.l2;
  return os.str();
}

DeltaResult ReferencePairDiscriminator::run(const PairJob& job) const {
  const auto count = static_cast<int>(features_.size());
  if (job.x < 1 || job.y < 1 || job.x > count || job.y > count || job.x == job.y)
    throw ArgumentError("pair job refers to unknown measurements");
  const auto& fx = features_[static_cast<std::size_t>(job.x - 1)];
  const auto& fy = features_[static_cast<std::size_t>(job.y - 1)];
  SplitSpec spec = split_;
  spec.shuffle_seed = job.seed;
  const auto plan = plan_split(fx.images.size(), fy.images.size(), spec);
  const auto disc = reference_train(gather(fx, fy, plan.train), gather(fx, fy, plan.val), hyper_);
  return evaluate_delta(disc, gather(fx, fy, plan.test));
}

std::uint64_t pair_seed(std::uint64_t master_seed, int tx_id, int x, int y) {
  return derive_seed(master_seed, Stream::pair,
                     {static_cast<std::uint64_t>(tx_id), static_cast<std::uint64_t>(x), static_cast<std::uint64_t>(y)});
}

namespace {

MatrixRunStats fill(DissimilarityMatrix& matrix, const PairDiscriminator& disc, std::uint64_t master_seed,
                    const MatrixOptions& options, int threads) {
  MatrixRunStats stats;
  auto pending = matrix.missing_pairs();
  stats.skipped = matrix.entry_count();
  if (pending.size() > options.max_new_entries) pending.resize(options.max_new_entries);
  const std::string disc_id = disc.id();
  std::mutex lock;

  auto work = [&](const std::pair<int, int>& pair) {
    const auto [x, y] = pair;
    const PairJob job{matrix.tx_id(), x, y, pair_seed(master_seed, matrix.tx_id(), x, y)};
    const auto start = std::chrono::steady_clock::now();
    std::optional<DissimilarityRecord> record;
    std::string error;
    try {
      const auto r = disc.run(job);
      if (r.total == 0 || r.correct > r.total) throw PluginError("discriminator returned an invalid count");
      record = DissimilarityRecord{job.tx_id, x, y, r.delta, r.correct, r.total, disc_id, job.seed};
    } catch (const std::exception& e) {
      error = e.what();
    }
    const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start;
    std::lock_guard guard(lock);
    if (record) {
      matrix.set(*record);
      ++stats.computed;
      if (options.on_entry) options.on_entry(*record, elapsed);
    } else {
      matrix.record_failure(x, y, error);
      ++stats.failed;
      if (options.on_failure) options.on_failure(x, y, error);
    }
    if (options.checkpoint) matrix.save(*options.checkpoint);
  };

  ExceptionSlot errors;
#pragma omp parallel for schedule(dynamic) num_threads(threads)
  for (std::size_t i = 0; i < pending.size(); ++i) {
    errors.run([&] { work(pending[i]); });
  }
  errors.rethrow();
  return stats;
}

}  // namespace

MatrixRunStats fill_matrix(DissimilarityMatrix& matrix, const PairDiscriminator& disc, std::uint64_t master_seed,
                           const MatrixOptions& options) {
  return fill(matrix, disc, master_seed, options, resolve_workers(options.workers));
}

MatrixRunStats fill_matrix_serial(DissimilarityMatrix& matrix, const PairDiscriminator& disc,
                                  std::uint64_t master_seed, const MatrixOptions& options) {
  return fill(matrix, disc, master_seed, options, 1);
}

}  // namespace rfrel
