#pragma once

// Binary checkpoint: the magic "LKCKPT01", a little-endian u32 entry count,
// then per parameter (in name order) a u32 name length, the name bytes, u32
// rows, u32 cols and rows*cols IEEE-754 float32 values in row-major order.
// The JSON manifest next to it records what the parameters belong to.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>

#include "leakaudit/layers.hpp"
#include "leakaudit/model.hpp"

namespace leakaudit {

std::string serialize_parameters(const ParameterStore& store);
// Names and shapes must match the store exactly.
void deserialize_parameters(const std::string& bytes, ParameterStore& store);
std::map<std::string, Matrix> parse_checkpoint(const std::string& bytes);

void save_checkpoint(const std::filesystem::path& path, const ParameterStore& store);
void load_checkpoint(const std::filesystem::path& path, ParameterStore& store);

struct ModelManifest {
  ModelSpec spec;
  std::uint64_t vocab_fingerprint = 0;
  std::uint64_t seed = 0;
  std::string checkpoint_hash;  // FNV-1a of the checkpoint file, hex
};

void save_manifest(const std::filesystem::path& path, const ModelManifest& manifest);
ModelManifest load_manifest(const std::filesystem::path& path);

}  // namespace leakaudit
