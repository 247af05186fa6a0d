// Binary checkpoint format (all integers and reals little-endian):
//
//   bytes 0..3   magic "TATT"
//   u32          format version (kCheckpointVersion)
//   u64          header length in bytes
//   header       UTF-8 text: key=value config lines, then [vocab],
//                [time_vocab] and [parameters] sections
//   f64 blocks   parameter values, row-major, in parameter_layout() order
//   u64          FNV-1a 64 hash of every preceding byte
#pragma once

#include <cstdint>
#include <filesystem>

#include "tatt/model.hpp"

namespace tatt {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes to a temporary file beside path, then renames it into place.
void save_checkpoint(const Model& m, const std::filesystem::path& path);

/// Throws IoError (unreadable), VersionError (format version differs; the
/// message names both versions) or CorruptionError (bad magic, truncation,
/// hash mismatch, malformed header).
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace tatt
