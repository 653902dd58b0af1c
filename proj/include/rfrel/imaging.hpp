#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfrel/dataset.hpp"

namespace rfrel {

inline constexpr int kTileGrid = 224;

/// Histogram window in the I-Q plane.
struct Extent {
  double i_min = -1.0;
  double i_max = 1.0;
  double q_min = -1.0;
  double q_max = 1.0;

  static Extent symmetric(double half_width) { return {-half_width, half_width, -half_width, half_width}; }
  /// ArgumentError unless both axes have positive, finite width.
  void validate() const;
  bool operator==(const Extent&) const = default;
};

struct TileSource {
  int transmitter_id = 0;
  int measurement_index = 0;
  int segment_index = 0;
};

/// 224 x 224 count grid, row-major, row 0 = largest Q.
struct TileImage {
  std::vector<std::uint32_t> counts = std::vector<std::uint32_t>(kTileGrid * kTileGrid, 0);
  Extent extent;
  TileSource source;

  std::uint32_t at(int row, int col) const { return counts[static_cast<std::size_t>(row * kTileGrid + col)]; }
  std::uint64_t total() const;
};

/// Left-closed, right-open bin of v among 224 equal bins over [lo, hi];
/// v == hi lands in the last bin. Returns -1 outside the window.
int bin_index(double v, double lo, double hi);

/// Lower edge of bin k (k = 224 gives hi).
inline double bin_edge(double lo, double hi, int k) {
  return lo + (hi - lo) * static_cast<double>(k) / kTileGrid;
}

TileImage iq_to_image(std::span<const Sample> segment, const Extent& extent, TileSource source = {});

struct ExtentPolicy {
  enum class Kind { percentile, fixed };
  Kind kind = Kind::percentile;
  double percentile = 0.999;  // of max(|I|, |Q|)
  double half_width = 1.5;    // used when kind == fixed

  void validate() const;
};

nlohmann::json to_json(const ExtentPolicy& p);
ExtentPolicy extent_policy_from_json(const nlohmann::json& j);

/// Symmetric window [-a, a]^2 chosen from the whole measurement.
Extent measurement_extent(std::span<const Sample> samples, const ExtentPolicy& policy);

/// Consecutive non-overlapping segments rendered with one shared extent.
/// Images are rendered in parallel; result order is segment order.
std::vector<TileImage> segment_measurement(std::span<const Sample> samples, std::size_t samples_per_image,
                                           std::size_t n_images, const ExtentPolicy& policy = {},
                                           TileSource source = {}, int workers = 0);

/// Single-threaded reference for segment_measurement.
std::vector<TileImage> segment_measurement_serial(std::span<const Sample> samples,
                                                  std::size_t samples_per_image, std::size_t n_images,
                                                  const ExtentPolicy& policy = {}, TileSource source = {});

/// round(255 * log1p(count) / log1p(max_count)); all zeros for an empty grid.
std::vector<std::uint8_t> grayscale_pixels(const TileImage& image);

/// 8-bit PNG; channels = 1 (gray) or 3 (gray replicated to RGB).
void export_png(const TileImage& image, const fs::path& path, int channels = 1);

/// Row-major count dump, 224 comma-separated values per line.
void export_csv(const TileImage& image, const fs::path& path);

}  // namespace rfrel
