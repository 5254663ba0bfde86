#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mhaff/feature_table.hpp"

namespace mhaff {

struct NamedTensor {
  std::vector<std::size_t> dims;
  std::vector<float> values;

  friend bool operator==(const NamedTensor&, const NamedTensor&) = default;
};

// Binary layout, all integers little-endian u32:
//   "MHAFF001" | config byte count | config text (`key = value` lines)
//   | tensor count | per tensor: name length, name, rank, dims..., float32 values
// Tensors are stored in lexicographic name order (std::map order).
struct Checkpoint {
  ConfigEcho config;
  std::map<std::string, NamedTensor> tensors;
};

inline constexpr char kCheckpointMagic[8] = {'M', 'H', 'A', 'F', 'F', '0', '0', '1'};

std::vector<std::byte> write_checkpoint(const Checkpoint& checkpoint);
Checkpoint read_checkpoint(std::span<const std::byte> bytes);

void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace mhaff
