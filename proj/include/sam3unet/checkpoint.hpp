#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sam3unet/common.hpp"

namespace sam3unet {

inline constexpr uint32_t kCheckpointVersion = 1;

/// One serialized tensor: raw little-endian doubles plus metadata.
struct TensorEntry {
  std::string name;
  Shape shape;
  std::vector<double> data;
  bool trainable = false;
  bool is_param = true;
};

/// Versioned named-parameter container. Doubles are stored verbatim, so a
/// save/load round trip is bit exact. Also used (without the optimizer
/// section) as the pretrained-weight interchange format.
struct CheckpointData {
  uint32_t version = kCheckpointVersion;
  int64_t epoch = 0;
  std::string config_text;
  std::string rng_state;
  std::vector<TensorEntry> tensors;

  // AdamW state, keyed by parameter name; empty when not training.
  int64_t opt_step = 0;
  std::vector<std::string> opt_names;
  std::vector<std::vector<double>> opt_m;
  std::vector<std::vector<double>> opt_v;

  const TensorEntry* find(const std::string& name) const {
    for (const auto& t : tensors)
      if (t.name == name) return &t;
    return nullptr;
  }
};

void save_checkpoint(const CheckpointData& ckpt, const std::filesystem::path& path);
CheckpointData load_checkpoint(const std::filesystem::path& path);

}  // namespace sam3unet
