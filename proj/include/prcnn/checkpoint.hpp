#pragma once

#include "prcnn/nn/adam.hpp"

#include <cstdint>
#include <filesystem>

namespace prcnn {

inline constexpr std::uint32_t kCheckpointVersion = 1;

// Layout: "PRCW", u32 version, then per tensor: u32 name length, name bytes,
// u32 rank, rank x u32 dims, f32 payload. All integers and floats little-endian.
void save_checkpoint(const nn::ParameterMap<float>& weights, const std::filesystem::path& path);

// Throws FormatError on bad magic, version mismatch or truncation; nothing is returned partially.
nn::ParameterMap<float> load_checkpoint(const std::filesystem::path& path);

}  // namespace prcnn
