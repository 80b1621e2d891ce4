#pragma once

#include <cstdint>
#include <string>

#include "splatdrop/config.hpp"
#include "splatdrop/optimizer.hpp"
#include "splatdrop/trainer.hpp"

namespace splatdrop {

inline constexpr char kCheckpointMagic[8] = {'S', 'P', 'L', 'D', 'R', 'O', 'P', '\x01'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

// Full training state. The parameter block lists the PLY property order
// (x y z nx ny nz f_dc f_rest opacity scale rot) stored as float64.
struct CheckpointData {
  TrainConfig config;
  int iteration = 0;
  GaussianCloud cloud;
  AdamState adam;
  DensifyStats stats;
};

std::string encode_checkpoint(const CheckpointData& data);
// Throws InputError on bad magic, unsupported version, truncation or trailing bytes.
CheckpointData decode_checkpoint(const std::string& bytes);

void write_checkpoint(const std::string& path, const CheckpointData& data);
CheckpointData read_checkpoint(const std::string& path);

}  // namespace splatdrop
