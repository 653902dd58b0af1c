#pragma once

#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfrel/matrix.hpp"

namespace rfrel {

/// Resolves the PNG image paths of one measurement, in segment order.
using ImagePathResolver = std::function<std::vector<std::filesystem::path>(int tx_id, int measurement_index)>;

/// Job document handed to an external discriminator:
///   {"tx_id", "x", "y", "seed",
///    "train"|"val"|"test": [{"path": "...", "label": 0|1}, ...]}
nlohmann::json make_plugin_job(const PairJob& job, const SplitPlan& plan,
                               const std::vector<std::filesystem::path>& images_x,
                               const std::vector<std::filesystem::path>& images_y);

/// Parses the last non-empty stdout line: {"delta", "correct", "total"}.
/// PluginError when malformed or inconsistent.
DeltaResult parse_plugin_result(const std::string& stdout_text);

/// Runs `command <job.json>` once per pair. A nonzero exit status or a
/// malformed result makes the entry fail.
class PluginDiscriminator final : public PairDiscriminator {
 public:
  PluginDiscriminator(std::string command, ImagePathResolver images, SplitSpec split,
                      std::filesystem::path job_dir);

  std::string id() const override;
  DeltaResult run(const PairJob& job) const override;

 private:
  std::string command_;
  ImagePathResolver images_;
  SplitSpec split_;
  std::filesystem::path job_dir_;
};

}  // namespace rfrel
