#include "rfrel/dataset.hpp"

#include <zlib.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <set>
#include <sstream>

namespace rfrel {

std::string describe(const EntryRef& entry) {
  std::ostringstream os;
  os << "transmitter " << entry.transmitter_id << " measurement " << entry.measurement_index;
  return os.str();
}

namespace {

std::uint32_t to_little(std::uint32_t v) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(v);
  return v;
}

void encode(std::span<const Sample> samples, std::vector<char>& out) {
  out.resize(samples.size() * 8);
  char* p = out.data();
  for (const auto& s : samples) {
    for (float f : {s.real(), s.imag()}) {
      const auto bits = to_little(std::bit_cast<std::uint32_t>(f));
      std::memcpy(p, &bits, 4);
      p += 4;
    }
  }
}

std::vector<char> slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw PersistenceError("cannot open", path);
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw PersistenceError("read failed", path);
  return bytes;
}

}  // namespace

void check_finite(std::span<const Sample> samples) {
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (!std::isfinite(samples[i].real()) || !std::isfinite(samples[i].imag())) {
      throw ValidationError("non-finite sample at position " + std::to_string(i));
    }
  }
}

void IqTrace::validate() const {
  const EntryRef ref{transmitter_id, measurement_index};
  if (samples.empty()) throw ValidationError("trace has no samples", ref);
  if (!(sample_rate_hz > 0.0) || !(center_freq_hz > 0.0))
    throw ValidationError("sample rate and center frequency must be positive", ref);
  if (measurement_index < 1) throw ValidationError("measurement_index must be >= 1", ref);
  try {
    check_finite(samples);
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), ref);
  }
}

void write_iq_samples(std::span<const Sample> samples, const fs::path& path) {
  std::vector<char> bytes;
  encode(samples, bytes);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing", path);
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) throw PersistenceError("write failed", path);
}

void write_iq(const IqTrace& trace, const fs::path& path) {
  trace.validate();
  write_iq_samples(trace.samples, path);
}

std::vector<Sample> read_iq(const fs::path& path, std::size_t expected_count) {
  const auto bytes = slurp(path);
  if (bytes.size() != expected_count * 8) {
    throw CorruptCorpusError("size mismatch in " + path.string() + ": expected " +
                             std::to_string(expected_count * 8) + " bytes, found " +
                             std::to_string(bytes.size()));
  }
  std::vector<Sample> samples(expected_count);
  const char* p = bytes.data();
  for (auto& s : samples) {
    std::uint32_t re = 0;
    std::uint32_t im = 0;
    std::memcpy(&re, p, 4);
    std::memcpy(&im, p + 4, 4);
    p += 8;
    s = {std::bit_cast<float>(to_little(re)), std::bit_cast<float>(to_little(im))};
  }
  check_finite(samples);
  return samples;
}

std::uint32_t crc32_bytes(std::span<const std::byte> bytes) {
  uLong crc = ::crc32(0L, Z_NULL, 0);
  // zlib takes uInt lengths; feed large buffers in chunks.
  constexpr std::size_t kChunk = 1u << 30;
  for (std::size_t off = 0; off < bytes.size(); off += kChunk) {
    const auto len = std::min(kChunk, bytes.size() - off);
    crc = ::crc32(crc, reinterpret_cast<const Bytef*>(bytes.data() + off), static_cast<uInt>(len));
  }
  return static_cast<std::uint32_t>(crc);
}

std::uint32_t crc32_file(const fs::path& path) {
  const auto bytes = slurp(path);
  return crc32_bytes(std::as_bytes(std::span(bytes)));
}

std::string format_checksum(std::uint32_t crc) {
  char buf[9];
  std::snprintf(buf, sizeof buf, "%08x", crc);
  return buf;
}

std::size_t CorpusManifest::size() const {
  std::size_t n = 0;
  for (const auto& t : transmitters) n += t.measurements.size();
  return n;
}

nlohmann::json to_json(const CorpusManifest& manifest) {
  using nlohmann::json;
  json txs = json::array();
  for (const auto& t : manifest.transmitters) {
    json ms = json::array();
    for (const auto& m : t.measurements) {
      ms.push_back({{"measurement_index", m.measurement_index},
                    {"path", m.path},
                    {"sample_count", m.sample_count},
                    {"checksum", format_checksum(m.checksum)}});
    }
    txs.push_back({{"transmitter_id", t.transmitter_id}, {"measurements", std::move(ms)}});
  }
  json notes = json::object();
  for (const auto& [k, v] : manifest.capture.notes) notes[k] = v;
  return {{"schema_version", kManifestSchemaVersion},
          {"capture",
           {{"sample_rate_hz", manifest.capture.sample_rate_hz},
            {"center_freq_hz", manifest.capture.center_freq_hz},
            {"notes", std::move(notes)}}},
          {"transmitters", std::move(txs)}};
}

CorpusManifest manifest_from_json(const nlohmann::json& doc) {
  CorpusManifest m;
  try {
    if (!doc.contains("schema_version")) throw ValidationError("manifest lacks schema_version");
    const int version = doc.at("schema_version").get<int>();
    if (version != kManifestSchemaVersion)
      throw ValidationError("unsupported manifest schema_version " + std::to_string(version));
    const auto& cap = doc.at("capture");
    m.capture.sample_rate_hz = cap.at("sample_rate_hz").get<double>();
    m.capture.center_freq_hz = cap.at("center_freq_hz").get<double>();
    if (cap.contains("notes")) {
      for (const auto& [k, v] : cap.at("notes").items())
        m.capture.notes[k] = v.is_string() ? v.get<std::string>() : v.dump();
    }
    for (const auto& t : doc.at("transmitters")) {
      TransmitterEntry entry;
      entry.transmitter_id = t.at("transmitter_id").get<int>();
      for (const auto& d : t.at("measurements")) {
        MeasurementDescriptor md;
        md.measurement_index = d.at("measurement_index").get<int>();
        md.path = d.at("path").get<std::string>();
        md.sample_count = d.at("sample_count").get<std::size_t>();
        md.checksum = static_cast<std::uint32_t>(
            std::stoul(d.at("checksum").get<std::string>(), nullptr, 16));
        entry.measurements.push_back(std::move(md));
      }
      m.transmitters.push_back(std::move(entry));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed manifest: ") + e.what());
  } catch (const std::invalid_argument&) {
    throw ValidationError("malformed manifest: checksum is not hexadecimal");
  }
  return m;
}

void save_manifest(const CorpusManifest& manifest, const fs::path& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw PersistenceError("cannot open for writing", path);
  out << to_json(manifest).dump(2) << '\n';
  if (!out) throw PersistenceError("write failed", path);
}

CorpusManifest read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingFileError("manifest not found: " + path.string());
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError("manifest is not valid JSON: " + std::string(e.what()));
  }
  return manifest_from_json(doc);
}

void check_manifest_structure(const CorpusManifest& manifest) {
  std::set<int> seen_tx;
  for (const auto& t : manifest.transmitters) {
    if (!seen_tx.insert(t.transmitter_id).second)
      throw DuplicateEntryError("transmitter " + std::to_string(t.transmitter_id) + " listed twice");
    std::set<int> indices;
    for (const auto& m : t.measurements) {
      const EntryRef ref{t.transmitter_id, m.measurement_index};
      if (!indices.insert(m.measurement_index).second)
        throw DuplicateEntryError("duplicate measurement entry", ref);
      if (m.sample_count == 0) throw ValidationError("declared sample_count is zero", ref);
    }
    if (indices.empty())
      throw ValidationError("transmitter " + std::to_string(t.transmitter_id) + " has no measurements");
    int expected = 1;
    for (int idx : indices) {
      if (idx != expected) {
        throw IndexGapError("measurement indices are not contiguous from 1 (expected " +
                                std::to_string(expected) + ")",
                            EntryRef{t.transmitter_id, idx});
      }
      ++expected;
    }
  }
}

Corpus::Corpus(CorpusManifest manifest, fs::path root)
    : manifest_(std::move(manifest)), root_(std::move(root)) {
  for (auto& t : manifest_.transmitters) {
    std::sort(t.measurements.begin(), t.measurements.end(),
              [](const auto& a, const auto& b) { return a.measurement_index < b.measurement_index; });
  }
  std::sort(manifest_.transmitters.begin(), manifest_.transmitters.end(),
            [](const auto& a, const auto& b) { return a.transmitter_id < b.transmitter_id; });
}

std::vector<int> Corpus::transmitter_ids() const {
  std::vector<int> ids;
  for (const auto& t : manifest_.transmitters) ids.push_back(t.transmitter_id);
  return ids;
}

const TransmitterEntry& Corpus::entry(int transmitter_id) const {
  for (const auto& t : manifest_.transmitters)
    if (t.transmitter_id == transmitter_id) return t;
  throw ArgumentError("unknown transmitter " + std::to_string(transmitter_id));
}

const std::vector<MeasurementDescriptor>& Corpus::measurements(int transmitter_id) const {
  return entry(transmitter_id).measurements;
}

fs::path Corpus::trace_path(const MeasurementDescriptor& descriptor) const {
  return root_ / descriptor.path;
}

IqTrace Corpus::trace(int transmitter_id, int measurement_index) const {
  const auto& ms = measurements(transmitter_id);
  if (measurement_index < 1 || measurement_index > static_cast<int>(ms.size()))
    throw ArgumentError("no measurement " + std::to_string(measurement_index) + " for transmitter " +
                        std::to_string(transmitter_id));
  const auto& d = ms[static_cast<std::size_t>(measurement_index - 1)];
  IqTrace trace;
  trace.transmitter_id = transmitter_id;
  trace.measurement_index = measurement_index;
  trace.sample_rate_hz = manifest_.capture.sample_rate_hz;
  trace.center_freq_hz = manifest_.capture.center_freq_hz;
  try {
    trace.samples = read_iq(trace_path(d), d.sample_count);
  } catch (const CorruptCorpusError& e) {
    throw CorruptCorpusError(e.what(), EntryRef{transmitter_id, measurement_index});
  } catch (const ValidationError& e) {
    throw ValidationError(e.what(), EntryRef{transmitter_id, measurement_index});
  }
  return trace;
}

Corpus load_corpus(const fs::path& manifest_path) {
  auto manifest = read_manifest(manifest_path);
  check_manifest_structure(manifest);
  const fs::path root = manifest_path.parent_path();
  for (const auto& t : manifest.transmitters) {
    for (const auto& m : t.measurements) {
      const EntryRef ref{t.transmitter_id, m.measurement_index};
      const fs::path file = root / m.path;
      std::error_code ec;
      if (!fs::is_regular_file(file, ec)) throw MissingFileError("missing trace file " + file.string(), ref);
      const auto size = fs::file_size(file, ec);
      if (ec || size != m.sample_count * 8) {
        throw CorruptCorpusError("size mismatch: declared " + std::to_string(m.sample_count) +
                                     " samples (" + std::to_string(m.sample_count * 8) +
                                     " bytes), file has " + std::to_string(size) + " bytes",
                                 ref);
      }
      const auto crc = crc32_file(file);
      if (crc != m.checksum) {
        throw ChecksumMismatchError("checksum mismatch: manifest " + format_checksum(m.checksum) +
                                        ", file " + format_checksum(crc),
                                    ref);
      }
    }
  }
  return Corpus(std::move(manifest), root);
}

}  // namespace rfrel
