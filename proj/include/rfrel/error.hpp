#pragma once

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>

namespace rfrel {

inline constexpr const char* kVersion = RFREL_VERSION;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad caller input: degenerate extents, empty splits, k > n, ...
class ArgumentError : public Error {
 public:
  using Error::Error;
};

class PersistenceError : public Error {
 public:
  PersistenceError(const std::string& what, std::filesystem::path path)
      : Error(what + ": " + path.string()), path_(std::move(path)) {}
  const std::filesystem::path& path() const noexcept { return path_; }

 private:
  std::filesystem::path path_;
};

/// Identifies one measurement inside a corpus.
struct EntryRef {
  int transmitter_id = 0;
  int measurement_index = 0;
};

std::string describe(const EntryRef& entry);

/// Base of every corpus/manifest validation failure. Carries the offending
/// entry when one can be named.
class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what,
                           std::optional<EntryRef> entry = std::nullopt)
      : Error(entry ? describe(*entry) + ": " + what : what), entry_(entry) {}
  const std::optional<EntryRef>& entry() const noexcept { return entry_; }

 private:
  std::optional<EntryRef> entry_;
};

/// File length disagrees with the declared sample count.
class CorruptCorpusError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class MissingFileError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class ChecksumMismatchError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Measurement indices of a transmitter are not exactly 1..M.
class IndexGapError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class DuplicateEntryError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Some dissimilarity entries are absent; analytics refuse to run.
class IncompleteMatrixError : public ArgumentError {
 public:
  using ArgumentError::ArgumentError;
};

class PluginError : public Error {
 public:
  using Error::Error;
};

}  // namespace rfrel
