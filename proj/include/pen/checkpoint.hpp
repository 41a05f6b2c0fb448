#pragma once

#include <cstdint>
#include <string>

#include "json.hpp"
#include "pen/network.hpp"

namespace pen {

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary container: magic "PENCKPT\0", u32 version, u64 manifest length, the
/// JSON manifest, then for each tensor (u32 name length, name, u64 rows, u64
/// cols, rows*cols little-endian float64 in column-major order).
/// The manifest always carries "arch" and "tensors"; callers add fields such
/// as "seed" and "step" through `extra`.
template <typename T>
void save_checkpoint(const std::string& path, const PenParams<T>& params, const nlohmann::json& extra = {});

template <typename T>
struct LoadedCheckpoint {
  PenParams<T> params;
  nlohmann::json manifest;
};

/// Throws IoError for unreadable files and SchemaError for corrupt or
/// inconsistent containers.
template <typename T>
LoadedCheckpoint<T> load_checkpoint(const std::string& path);

template <typename T>
std::string encode_checkpoint(const PenParams<T>& params, const nlohmann::json& extra = {});
template <typename T>
LoadedCheckpoint<T> decode_checkpoint(std::string_view bytes);

}  // namespace pen
