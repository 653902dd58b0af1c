#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace rfrel {

using Rng = std::mt19937_64;

// Stream tags keep seeds for different purposes apart even when the
// numeric coordinates coincide.
enum class Stream : std::uint64_t {
  states = 0x5354,
  chain = 0x4348,
  measurement = 0x4d45,
  pair = 0x5041,
  subsets = 0x5355,
  nominal = 0x4e4f,
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Hashes a master seed and a coordinate path into an independent seed.
/// Order of the coordinates matters; generation order does not.
std::uint64_t derive_seed(std::uint64_t master, Stream stream,
                          std::initializer_list<std::uint64_t> coords = {}) noexcept;

inline Rng make_rng(std::uint64_t master, Stream stream,
                    std::initializer_list<std::uint64_t> coords = {}) {
  return Rng(derive_seed(master, stream, coords));
}

}  // namespace rfrel
