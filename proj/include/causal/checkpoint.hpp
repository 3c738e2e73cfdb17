#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include "causal/neuralnet.hpp"
#include "causal/train.hpp"

namespace causal::nn {

struct Checkpoint {
  BiGruAttParams<float> params;
  bool contextual = false;
  TrainConfig config;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  double best_val_f1 = 0.0;
  std::string provenance;  // experiment settings, key=value lines
};

// Layout (little-endian): magic "CSDCKPT1", u32 version, u32 d_e, u32 d_h,
// u32 flags (bit 0 contextual inputs, bit 1 trained in float64), u64 seed,
// i32 best epoch, f64 best validation F1, string config, string
// provenance, u32 block count, then per block: string name, u32 rows,
// u32 cols, rows*cols float32 in column-major order. Strings are u32
// length + bytes. Written to a temporary file and renamed into place.
void save_checkpoint(const Checkpoint& checkpoint, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace causal::nn
