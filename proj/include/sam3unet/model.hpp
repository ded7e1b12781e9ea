#pragma once

#include "sam3unet/decoder.hpp"
#include "sam3unet/encoder.hpp"

namespace sam3unet {

struct CheckpointData;

struct ModelConfig {
  EncoderConfig encoder;
};

/// Frozen adapted encoder + pyramid projection + lightweight decoder.
class Sam3UNet {
 public:
  Sam3UNet(const ModelConfig& cfg, uint64_t seed);

  /// images: (B,3,H,W); returns three full-resolution logit maps.
  DecoderOutput forward(const Tensor& images, bool training) const;

  AdaptedEncoder& encoder() { return encoder_; }
  const AdaptedEncoder& encoder() const { return encoder_; }
  const ModelConfig& config() const { return cfg_; }

  Registry registry() const;
  std::vector<NamedTensor> trainable_parameters() const;

  /// Copies values from a checkpoint into this model; every registry entry
  /// must be present with a matching shape.
  void load_state(const CheckpointData& ckpt);
  /// Serializes every registry entry.
  void save_state(CheckpointData& ckpt) const;

 private:
  ModelConfig cfg_;
  AdaptedEncoder encoder_;
  PyramidProjector pyramid_;
  Decoder decoder_;
};

Census model_census(const ModelConfig& cfg);

/// Parameter and optimizer-state footprint in bytes (doubles). The
/// optimizer keeps two moments per trainable value.
struct MemoryReport {
  int64_t total_param_bytes = 0;
  int64_t trainable_param_bytes = 0;
  int64_t optimizer_state_bytes = 0;
  double trainable_fraction = 0.0;
};

MemoryReport memory_report(const Census& census);

}  // namespace sam3unet
