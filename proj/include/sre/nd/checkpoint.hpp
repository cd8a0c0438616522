#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "sre/nd/tensor.hpp"

namespace sre::nd {

// Binary layout, all integers little-endian:
//   "NDM1" | version:u8
//   repeated: name_len:u64 | name bytes | rank:u64 | extents:u64[rank] | values:f64[numel]
inline constexpr std::uint8_t kCheckpointVersion = 1;

std::vector<std::uint8_t> encode_checkpoint(std::span<const NamedTensor> tensors);
std::vector<NamedTensor> decode_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint(const std::filesystem::path& path, std::span<const NamedTensor> tensors);
std::vector<NamedTensor> load_checkpoint(const std::filesystem::path& path);

}  // namespace sre::nd
