#pragma once

#include <string>
#include <vector>

#include "cpfd/model.hpp"

namespace cpfd {

// Binary model checkpoint, little-endian throughout:
//   magic "CPFD" | u32 version | u32 x6 model config (L, K, d_model, d_ff,
//   vocab, max_seq_len) | u32 class count | u32 step | label schema snapshot
//   (u32 count, then u32-length-prefixed strings) | named tensors (u32 count,
//   then per tensor: name, u32 rank, u32 dims, f32 data).
// Values are stored as float32, so a round trip reproduces logits only to
// cast precision.
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointData {
  ModelConfig config;
  int class_count = 0;
  int step = 0;
  std::vector<std::string> class_names;
  std::vector<std::pair<std::string, std::vector<double>>> tensors;
};

void save_checkpoint(const std::string& path, const TaggerModel& model,
                     const std::vector<std::string>& class_names, int step);

CheckpointData load_checkpoint(const std::string& path);

// Rebuilds a frozen model from checkpoint contents.
TaggerModel model_from_checkpoint(const CheckpointData& data);

}  // namespace cpfd
