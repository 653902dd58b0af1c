#pragma once

#include <complex>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "rfrel/error.hpp"

namespace rfrel {

namespace fs = std::filesystem;

/// One complex baseband sample as stored on disk (float32 I, float32 Q).
using Sample = std::complex<float>;

inline constexpr int kManifestSchemaVersion = 1;
inline constexpr double kDefaultSampleRateHz = 512e3;
inline constexpr double kDefaultCenterFreqHz = 900e6;

struct IqTrace {
  std::vector<Sample> samples;
  double sample_rate_hz = kDefaultSampleRateHz;
  double center_freq_hz = kDefaultCenterFreqHz;
  int transmitter_id = 0;
  int measurement_index = 1;

  /// Throws ValidationError on an empty trace, non-finite samples, or
  /// non-positive rates.
  void validate() const;
};

/// Throws ValidationError naming the first non-finite sample.
void check_finite(std::span<const Sample> samples);

/// Headerless little-endian float32 pairs, I then Q.
void write_iq(const IqTrace& trace, const fs::path& path);
void write_iq_samples(std::span<const Sample> samples, const fs::path& path);

/// Reads exactly expected_count samples. CorruptCorpusError when the file
/// length is not 8 * expected_count, ValidationError on NaN/Inf.
std::vector<Sample> read_iq(const fs::path& path, std::size_t expected_count);

std::uint32_t crc32_bytes(std::span<const std::byte> bytes);
std::uint32_t crc32_file(const fs::path& path);
std::string format_checksum(std::uint32_t crc);

struct MeasurementDescriptor {
  int measurement_index = 1;
  std::string path;  // relative to the manifest directory
  std::size_t sample_count = 0;
  std::uint32_t checksum = 0;
};

struct TransmitterEntry {
  int transmitter_id = 0;
  std::vector<MeasurementDescriptor> measurements;
};

struct CaptureInfo {
  double sample_rate_hz = kDefaultSampleRateHz;
  double center_freq_hz = kDefaultCenterFreqHz;
  std::map<std::string, std::string> notes;
};

struct CorpusManifest {
  std::vector<TransmitterEntry> transmitters;
  CaptureInfo capture;

  std::size_t size() const;
};

nlohmann::json to_json(const CorpusManifest& manifest);
CorpusManifest manifest_from_json(const nlohmann::json& doc);

void save_manifest(const CorpusManifest& manifest, const fs::path& path);
CorpusManifest read_manifest(const fs::path& path);

/// Structural checks only (duplicates, contiguous 1..M indices).
void check_manifest_structure(const CorpusManifest& manifest);

/// A validated, immutable corpus. Traces are read from disk on demand.
class Corpus {
 public:
  Corpus(CorpusManifest manifest, fs::path root);

  const CorpusManifest& manifest() const noexcept { return manifest_; }
  const fs::path& root() const noexcept { return root_; }
  std::size_t size() const noexcept { return manifest_.size(); }

  std::vector<int> transmitter_ids() const;
  /// Measurements of one transmitter ordered by measurement_index.
  const std::vector<MeasurementDescriptor>& measurements(int transmitter_id) const;
  fs::path trace_path(const MeasurementDescriptor& descriptor) const;
  IqTrace trace(int transmitter_id, int measurement_index) const;

 private:
  const TransmitterEntry& entry(int transmitter_id) const;

  CorpusManifest manifest_;
  fs::path root_;
};

/// Parses the manifest, then checks every descriptor: duplicates, index
/// contiguity, file existence, byte length, CRC-32.
Corpus load_corpus(const fs::path& manifest_path);

}  // namespace rfrel
