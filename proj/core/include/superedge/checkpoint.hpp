#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "superedge/model.hpp"
#include "superedge/tensor.hpp"

namespace superedge {

inline constexpr std::uint32_t kCheckpointVersion = 1;

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// "SEDG", u32 version, u32 count, then per tensor: u16 name length, name,
// u8 rank, u32 dims, float32 data. All little-endian. Written to a temporary
// file and renamed into place.
void write_tensor_file(const std::filesystem::path& path, const NamedTensors& tensors);
NamedTensors read_tensor_file(const std::filesystem::path& path);

struct TrainingState {
  ModelParams params;
  AdamState adam;
  int epoch = 0;  // completed epochs
};

// Model tensors, Adam moments ("adam.m.<name>", "adam.v.<name>") and scalar
// bookkeeping ("adam.step", "train.epoch").
void save_checkpoint(const std::filesystem::path& path, const ModelParams& params, const AdamState& adam, int epoch);
TrainingState load_checkpoint(const std::filesystem::path& path, const ModelShape& shape = {});

}  // namespace superedge
