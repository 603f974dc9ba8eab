#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "intent_rnnt/layers.hpp"
#include "intent_rnnt/tensor.hpp"

namespace intent_rnnt {

inline constexpr std::uint32_t kCheckpointFormatVersion = 1;

struct NamedArray {
  std::string name;
  Tensor value;
};

// Binary container: magic, format version, a JSON config echo, then named
// arrays with explicit shapes stored as little-endian IEEE doubles.
struct Checkpoint {
  std::uint32_t format_version = kCheckpointFormatVersion;
  std::string config_json;
  std::vector<NamedArray> arrays;

  const Tensor& array(const std::string& name) const;
};

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& checkpoint);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::string serialize_checkpoint(const Checkpoint& checkpoint);
Checkpoint deserialize_checkpoint(const std::string& bytes);

Checkpoint checkpoint_from_params(std::string config_json, const ParamList& params);
// Copies arrays into the matching parameters; every parameter must be present
// with the same shape.
void load_params(const Checkpoint& checkpoint, const ParamList& params);

// FNV-1a over parameter names, shapes and raw value bytes.
std::uint64_t param_checksum(const ParamList& params);

}  // namespace intent_rnnt
