#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace zsldict {

using Rng = std::mt19937_64;

// FNV-1a; stable across platforms, unlike std::hash.
constexpr std::uint64_t stream_id(std::string_view name) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char ch : name) {
    h ^= static_cast<unsigned char>(ch);
    h *= 0x100000001b3ULL;
  }
  return h;
}

// One independent generator per named consumer ("init", "synth/...", "cv-shuffle"),
// all derived from the single run seed, so adding a consumer never shifts another.
inline Rng make_stream(std::uint64_t seed, std::string_view name) {
  const std::uint64_t id = stream_id(name);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(id), static_cast<std::uint32_t>(id >> 32)};
  return Rng(seq);
}

}  // namespace zsldict
