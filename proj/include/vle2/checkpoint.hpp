#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"
#include "vle2/tensor.hpp"

namespace vle2 {

// Container: magic "VLE2", format version, JSON metadata (including the
// tensor directory), then a raw little-endian f32 payload guarded by CRC32.
inline constexpr uint32_t kCheckpointVersion = 1;

uint32_t crc32(const uint8_t* data, size_t len, uint32_t seed = 0);

struct LoadedTensor {
  std::string name;
  std::vector<int> shape;
  std::vector<float> data;
};

struct LoadedCheckpoint {
  nlohmann::json meta;
  std::vector<LoadedTensor> tensors;

  const LoadedTensor& find(const std::string& name) const;
};

/// Write-to-temp then atomic rename; bit-exact round trip with load.
void save_checkpoint(const std::string& path, const nlohmann::json& meta,
                     const std::vector<std::pair<std::string, const Tensor*>>& tensors);

LoadedCheckpoint load_checkpoint(const std::string& path);

}  // namespace vle2
