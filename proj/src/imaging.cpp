#include "rfrel/imaging.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <memory>
#include <numeric>

#include "rfrel/parallel.hpp"
#include "rfrel/stats.hpp"

namespace rfrel {

void Extent::validate() const {
  const bool finite = std::isfinite(i_min) && std::isfinite(i_max) && std::isfinite(q_min) && std::isfinite(q_max);
  if (!finite || !(i_max > i_min) || !(q_max > q_min))
    throw ArgumentError("histogram extent must have positive width and height");
}

std::uint64_t TileImage::total() const {
  return std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
}

int bin_index(double v, double lo, double hi) {
  if (!(v >= lo && v <= hi)) return -1;
  if (v == hi) return kTileGrid - 1;
  int k = static_cast<int>((v - lo) / (hi - lo) * kTileGrid);
  k = std::clamp(k, 0, kTileGrid - 1);
  // The scaled estimate can be off by one near an edge; settle it against
  // the edges themselves so binning agrees with bin_edge exactly.
  while (k > 0 && v < bin_edge(lo, hi, k)) --k;
  while (k < kTileGrid - 1 && v >= bin_edge(lo, hi, k + 1)) ++k;
  return k;
}

TileImage iq_to_image(std::span<const Sample> segment, const Extent& extent, TileSource source) {
  if (segment.empty()) throw ArgumentError("cannot image an empty segment");
  extent.validate();
  TileImage image;
  image.extent = extent;
  image.source = source;
  for (const auto& s : segment) {
    const int col = bin_index(s.real(), extent.i_min, extent.i_max);
    const int qbin = bin_index(s.imag(), extent.q_min, extent.q_max);
    if (col < 0 || qbin < 0) continue;
    const int row = kTileGrid - 1 - qbin;
    ++image.counts[static_cast<std::size_t>(row * kTileGrid + col)];
  }
  return image;
}

void ExtentPolicy::validate() const {
  if (kind == Kind::percentile && !(percentile > 0.0 && percentile <= 1.0))
    throw ArgumentError("extent percentile must lie in (0, 1]");
  if (kind == Kind::fixed && !(half_width > 0.0 && std::isfinite(half_width)))
    throw ArgumentError("fixed extent half_width must be positive");
}

nlohmann::json to_json(const ExtentPolicy& p) {
  if (p.kind == ExtentPolicy::Kind::fixed) return {{"policy", "fixed"}, {"half_width", p.half_width}};
  return {{"policy", "percentile"}, {"percentile", p.percentile}};
}

ExtentPolicy extent_policy_from_json(const nlohmann::json& j) {
  ExtentPolicy p;
  const auto kind = j.value("policy", std::string("percentile"));
  if (kind == "fixed") p.kind = ExtentPolicy::Kind::fixed;
  else if (kind != "percentile") throw ArgumentError("unknown extent policy '" + kind + "'");
  p.percentile = j.value("percentile", p.percentile);
  p.half_width = j.value("half_width", p.half_width);
  p.validate();
  return p;
}

Extent measurement_extent(std::span<const Sample> samples, const ExtentPolicy& policy) {
  policy.validate();
  if (policy.kind == ExtentPolicy::Kind::fixed) return Extent::symmetric(policy.half_width);
  if (samples.empty()) throw ArgumentError("cannot choose an extent for an empty measurement");
  std::vector<double> radius(samples.size());
  std::transform(samples.begin(), samples.end(), radius.begin(), [](const Sample& s) {
    return static_cast<double>(std::max(std::abs(s.real()), std::abs(s.imag())));
  });
  // Type-7 quantile via two selections instead of a full sort.
  const double h = (static_cast<double>(radius.size()) - 1.0) * policy.percentile;
  const auto lo = static_cast<std::size_t>(std::floor(h));
  std::nth_element(radius.begin(), radius.begin() + static_cast<std::ptrdiff_t>(lo), radius.end());
  const double at_lo = radius[lo];
  double a = at_lo;
  if (lo + 1 < radius.size() && h > static_cast<double>(lo)) {
    const double at_hi = *std::min_element(radius.begin() + static_cast<std::ptrdiff_t>(lo) + 1, radius.end());
    a = at_lo + (h - static_cast<double>(lo)) * (at_hi - at_lo);
  }
  if (!(a > 0.0)) throw ArgumentError("measurement has zero amplitude; extent would be degenerate");
  return Extent::symmetric(a);
}

namespace {

void check_budget(std::size_t available, std::size_t samples_per_image, std::size_t n_images) {
  if (samples_per_image == 0 || n_images == 0) throw ArgumentError("samples_per_image and n_images must be >= 1");
  const std::size_t required = samples_per_image * n_images;
  if (available < required)
    throw ArgumentError("insufficient samples: required " + std::to_string(required) + ", available " +
                        std::to_string(available));
}

TileImage render_segment(std::span<const Sample> samples, std::size_t samples_per_image, std::size_t i,
                         const Extent& extent, TileSource source) {
  source.segment_index = static_cast<int>(i);
  return iq_to_image(samples.subspan(i * samples_per_image, samples_per_image), extent, source);
}

}  // namespace

std::vector<TileImage> segment_measurement(std::span<const Sample> samples, std::size_t samples_per_image,
                                           std::size_t n_images, const ExtentPolicy& policy, TileSource source,
                                           int workers) {
  check_budget(samples.size(), samples_per_image, n_images);
  const Extent extent = measurement_extent(samples, policy);
  std::vector<TileImage> images(n_images);
  ExceptionSlot errors;
#pragma omp parallel for schedule(static) num_threads(resolve_workers(workers))
  for (std::size_t i = 0; i < n_images; ++i) {
    errors.run([&] { images[i] = render_segment(samples, samples_per_image, i, extent, source); });
  }
  errors.rethrow();
  return images;
}

std::vector<TileImage> segment_measurement_serial(std::span<const Sample> samples, std::size_t samples_per_image,
                                                  std::size_t n_images, const ExtentPolicy& policy,
                                                  TileSource source) {
  check_budget(samples.size(), samples_per_image, n_images);
  const Extent extent = measurement_extent(samples, policy);
  std::vector<TileImage> images;
  images.reserve(n_images);
  for (std::size_t i = 0; i < n_images; ++i)
    images.push_back(render_segment(samples, samples_per_image, i, extent, source));
  return images;
}

std::vector<std::uint8_t> grayscale_pixels(const TileImage& image) {
  std::vector<std::uint8_t> pixels(image.counts.size(), 0);
  const auto max_count = *std::max_element(image.counts.begin(), image.counts.end());
  if (max_count == 0) return pixels;
  const double denom = std::log1p(static_cast<double>(max_count));
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    const double v = 255.0 * std::log1p(static_cast<double>(image.counts[i])) / denom;
    pixels[i] = static_cast<std::uint8_t>(std::lround(v));
  }
  return pixels;
}

void export_png(const TileImage& image, const fs::path& path, int channels) {
  if (channels != 1 && channels != 3) throw ArgumentError("PNG export supports 1 or 3 channels");
  const auto gray = grayscale_pixels(image);

  std::unique_ptr<FILE, int (*)(FILE*)> file(std::fopen(path.c_str(), "wb"), &std::fclose);
  if (!file) throw PersistenceError("cannot open for writing", path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!png || !info) {
    png_destroy_write_struct(&png, &info);
    throw PersistenceError("libpng initialisation failed", path);
  }
  std::vector<std::uint8_t> row(static_cast<std::size_t>(kTileGrid * channels));
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw PersistenceError("PNG encoding failed", path);
  }
  png_init_io(png, file.get());
  png_set_IHDR(png, info, kTileGrid, kTileGrid, 8, channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int r = 0; r < kTileGrid; ++r) {
    for (int c = 0; c < kTileGrid; ++c) {
      const auto v = gray[static_cast<std::size_t>(r * kTileGrid + c)];
      for (int ch = 0; ch < channels; ++ch) row[static_cast<std::size_t>(c * channels + ch)] = v;
    }
    png_write_row(png, row.data());
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  if (std::fflush(file.get()) != 0) throw PersistenceError("write failed", path);
}

void export_csv(const TileImage& image, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing", path);
  for (int r = 0; r < kTileGrid; ++r) {
    for (int c = 0; c < kTileGrid; ++c) {
      if (c) out << ',';
      out << image.at(r, c);
    }
    out << '\n';
  }
  if (!out) throw PersistenceError("write failed", path);
}

}  // namespace rfrel
