#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "wzjscc/codec.hpp"

namespace wzjscc::codec {

/// Binary archive layout (little-endian):
///
///   "WZJSCKPT"            8-byte magic
///   u32 version           kCheckpointVersion
///   u64 n, n bytes        ModelConfig as JSON text
///   u64 count             number of parameter arrays
///   count × { u32 len, name bytes, 4 × i32 shape (n,c,h,w), numel × f64 }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct ParameterInfo {
    std::string name;
    nn::Shape shape;
};

struct CheckpointInfo {
    std::uint32_t version = 0;
    ModelConfig config;
    std::vector<ParameterInfo> parameters;
    std::size_t total_parameters = 0;
};

void save_checkpoint(const std::filesystem::path& path, const VariantModel& model);
VariantModel load_checkpoint(const std::filesystem::path& path);
/// Throws ConfigError if the stored configuration differs from `expected`.
VariantModel load_checkpoint(const std::filesystem::path& path, const ModelConfig& expected);
CheckpointInfo inspect_checkpoint(const std::filesystem::path& path);

} // namespace wzjscc::codec
