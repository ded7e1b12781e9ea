#pragma once

#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "sam3unet/data.hpp"
#include "sam3unet/encoder.hpp"
#include "sam3unet/losses.hpp"
#include "sam3unet/metrics.hpp"
#include "sam3unet/model.hpp"

namespace sam3unet {

struct TrainConfig {
  double lr = 2e-4;
  double weight_decay = 1e-4;
  int64_t epochs = 20;
  int64_t batch_size = 12;
  double lr_floor = 0.0;
  uint64_t seed = 0;
  int64_t eval_every = 0;  // epochs; 0 disables
  std::string checkpoint_dir;
  double clip_grad = 0.0;  // 0 disables
  std::string resume;

  void validate() const {
    if (lr <= 0) throw ConfigError("train.lr must be > 0");
    if (epochs < 1) throw ConfigError("train.epochs must be >= 1");
    if (batch_size < 1) throw ConfigError("train.batch_size must be >= 1");
    if (lr_floor < 0 || lr_floor > lr)
      throw ConfigError("train.lr_floor must be in [0, lr]");
    if (weight_decay < 0) throw ConfigError("train.weight_decay must be >= 0");
    if (clip_grad < 0) throw ConfigError("train.clip_grad must be >= 0");
  }
};

struct MetricsConfig {
  FMode f_mode = FMode::kAdaptive;
  bool strict = false;
};

/// Union of all module configurations, loaded from a flat dotted-key file
/// ("train.lr = 0.0002") with optional command-line overrides.
struct RunConfig {
  EncoderConfig encoder;
  DataConfig data;
  TrainConfig train;
  LossConfig loss;
  MetricsConfig metrics;
};

/// Parses `path` (empty for pure defaults) and applies overrides in order.
/// Unknown keys and malformed values raise ConfigError naming the key.
RunConfig load_run_config(const std::filesystem::path& path,
                          const std::vector<std::pair<std::string, std::string>>&
                              overrides = {});

/// Full key/value snapshot sufficient to reproduce the run.
std::string render_run_config(const RunConfig& cfg);

/// Keys understood by the parser, with their default values.
std::vector<std::pair<std::string, std::string>> config_schema();

/// Encoder image size follows the data input size.
ModelConfig make_model_config(const RunConfig& cfg);

}  // namespace sam3unet
