#pragma once

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfrel/dataset.hpp"
#include "rfrel/graph.hpp"
#include "rfrel/imaging.hpp"
#include "rfrel/matrix.hpp"
#include "rfrel/synth.hpp"

namespace rfrel {

inline constexpr int kRunSpecSchemaVersion = 1;

struct ImagingConfig {
  std::size_t samples_per_image = 10000;
  std::size_t images_per_measurement = 100;
  ExtentPolicy extent;
  int png_channels = 1;
  bool export_csv = false;
};

struct CorpusSource {
  enum class Kind { synth, path };
  Kind kind = Kind::synth;
  // synth
  MutationModel model;  // model.seed is taken from RunSpec::seed
  int n_tx = 5;
  int n_meas = 25;
  std::size_t samples_per_measurement = 0;  // 0: samples_per_image * images_per_measurement
  // path
  std::string manifest;
  std::string ground_truth;  // optional sidecar
};

struct DiscriminatorConfig {
  enum class Kind { reference, plugin };
  Kind kind = Kind::reference;
  SplitSpec split;
  TrainConfig reference;
  std::string plugin_command;
};

struct ObservabilityConfig {
  double tau = 0.75;
  ObservabilityMode mode = ObservabilityMode::component_closure;
  std::uint64_t enumeration_budget = 100000;
  std::size_t samples = 10000;
  std::vector<double> quantiles{0.05, 0.5, 0.95};
  double coverage_target = 0.9;
};

struct AnalyticsConfig {
  std::vector<double> tau_grid = default_tau_grid();
  std::vector<double> degree_taus{0.6, 0.75, 0.9};
  std::vector<int> k_list{2, 3, 4};
  double cluster_tau = 0.75;
  EdgeRule edge_rule = EdgeRule::strict;
  double eps_hi = 0.0;
  double eps_lo = 0.0;
  std::vector<double> temporal_quantiles{0.05, 0.5, 0.95};
  ObservabilityConfig observability;

  /// 21 points 0, 0.05, ..., 1.
  static std::vector<double> default_tau_grid();
};

/// Everything that defines an experiment. Relative paths are resolved
/// against base_dir (the directory of the run-spec file).
struct RunSpec {
  std::uint64_t seed = 1;
  std::filesystem::path output_dir = "run";
  int workers = 0;
  CorpusSource corpus;
  ImagingConfig imaging;
  DiscriminatorConfig discriminator;
  AnalyticsConfig analytics;
  std::filesystem::path base_dir = ".";

  /// Range checks plus resolvability of referenced paths.
  void validate() const;
  std::filesystem::path resolve(const std::filesystem::path& p) const;
  std::size_t samples_per_measurement() const;
  MutationModel synth_model() const;
};

/// include_execution = false drops output_dir and workers, which do not
/// influence any computed number.
nlohmann::json to_json(const RunSpec& spec, bool include_execution = true);
RunSpec run_spec_from_json(const nlohmann::json& doc, const std::filesystem::path& base_dir = ".");
RunSpec load_run_spec(const std::filesystem::path& path);

enum ExitCode : int { kExitOk = 0, kExitValidation = 1, kExitIncomplete = 2 };

/// Standard locations inside a run directory.
struct RunLayout {
  std::filesystem::path root;
  std::filesystem::path corpus_dir;
  std::filesystem::path images_dir;
  std::filesystem::path matrices_dir;
  std::filesystem::path report_dir;
  std::filesystem::path graphs_dir;
  std::filesystem::path logs_dir;
  std::filesystem::path jobs_dir;

  explicit RunLayout(const std::filesystem::path& output_dir);
  std::filesystem::path matrix_file(int tx_id) const;
  std::filesystem::path image_file(int tx_id, int measurement_index, std::size_t segment) const;
};

std::filesystem::path manifest_path(const RunSpec& spec);
std::optional<std::filesystem::path> ground_truth_path(const RunSpec& spec);

/// Line-delimited JSON log; every event gets a "ts" field.
class RunLog {
 public:
  RunLog(const std::filesystem::path& dir, const std::string& command);
  void write(nlohmann::json event);

 private:
  std::mutex mutex_;
  std::ofstream out_;
};

/// Tile images of one measurement under the run's imaging config.
std::vector<TileImage> measurement_images(const Corpus& corpus, int tx_id, int measurement_index,
                                          const ImagingConfig& imaging, int workers = 0);

/// Builds the configured pair discriminator for one transmitter.
std::unique_ptr<PairDiscriminator> make_discriminator(const Corpus& corpus, int tx_id, const RunSpec& spec);

/// Loads a matrix file when present (resume), else a fresh empty matrix,
/// then fills every missing entry.
MatrixRunStats dissimilarity_matrix(DissimilarityMatrix& matrix, const PairDiscriminator& disc,
                                    const RunSpec& spec, MatrixOptions options);

std::filesystem::path cmd_simulate(const RunSpec& spec);
/// Writes PNGs (and optional CSV grids) for every measurement.
std::size_t cmd_images(const RunSpec& spec);

struct MatrixCommandOptions {
  std::size_t max_new_entries = std::numeric_limits<std::size_t>::max();
};

struct MatrixCommandResult {
  int exit_code = kExitOk;
  std::size_t computed = 0;
  std::size_t skipped = 0;
  std::size_t failed = 0;
};

MatrixCommandResult cmd_matrix(const RunSpec& spec, const MatrixCommandOptions& options = {});

struct ReportBundle {
  std::vector<std::filesystem::path> files;
  nlohmann::json summary;
};

/// The 8 CSV analytics plus summary.json. IncompleteMatrixError when any
/// matrix is missing entries.
ReportBundle cmd_report(const RunSpec& spec);

/// Full corpus check; throws the ValidationError of the first bad entry.
Corpus cmd_validate(const RunSpec& spec);

/// Every matrix of the corpus, loaded from the run directory.
std::vector<DissimilarityMatrix> load_matrices(const RunSpec& spec, const std::vector<int>& tx_ids);

}  // namespace rfrel
