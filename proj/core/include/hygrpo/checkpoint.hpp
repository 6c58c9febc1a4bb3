#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "hygrpo/math.hpp"
#include "hygrpo/optimizer.hpp"

namespace hygrpo {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// File layout, all integers little-endian:
//   "HYGRPOCK" | u32 version | u64 header length | JSON header |
//   f64 params | f64 reference | f64 adam m | f64 adam v | u64 FNV-1a of all
//   preceding bytes.
// Random streams are pure functions of (seed, step, ...), so seed and step
// are the complete generator state.
struct Checkpoint {
  std::uint32_t version = kCheckpointVersion;
  std::uint64_t config_hash = 0;
  // Canonical config text of the run that wrote the file.
  std::string config;
  std::string variant;
  std::uint64_t seed = 0;
  std::uint64_t step = 0;
  Vector params;
  Vector reference;
  AdamState adam;

  bool operator==(const Checkpoint&) const = default;
};

std::string serialize_checkpoint(const Checkpoint& ckpt);
// Throws CheckpointError on any malformed input; a version mismatch names
// both versions.
Checkpoint deserialize_checkpoint(std::string_view bytes);

// Writes to a sibling temporary file and renames it into place.
void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace hygrpo
