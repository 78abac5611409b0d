#pragma once

#include <cstdint>
#include <filesystem>
#include <vector>

#include "trajlab/model/config.hpp"
#include "trajlab/model/network.hpp"

namespace trajlab::model {

// Layout (all integers u32 little-endian):
//   "CLTM" | version | config length | config JSON (compact, sorted keys)
//   per tensor in storage order: name length | name | rank | dims... | f32 LE data
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct Checkpoint {
  ModelConfig config;
  Params params;
};

std::vector<std::uint8_t> encode_checkpoint(const ModelConfig& c, const Params& p);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

void save_checkpoint(const std::filesystem::path& path, const ModelConfig& c, const Params& p);
Checkpoint load_checkpoint(const std::filesystem::path& path);

std::size_t checkpoint_size(const ModelConfig& c);

}  // namespace trajlab::model
