#pragma once

#include <vector>

#include "sam3unet/pyramid.hpp"

namespace sam3unet {

/// Channel plan of the lightweight block: reduce C -> C/4, split into two
/// C/8 halves, derive two more C/8 parts with depthwise convolutions,
/// concatenate (C/2 total) and expand to out_channels.
struct LightweightBlockConfig {
  int64_t in_channels = 0;
  int64_t out_channels = 0;

  int64_t reduced() const { return in_channels / 4; }
  int64_t branch() const { return in_channels / 8; }
  int64_t concat_width() const { return in_channels / 2; }

  void validate() const {
    if (in_channels < 8 || in_channels % 8 != 0)
      throw ConfigError("lightweight block: in_channels (" +
                        std::to_string(in_channels) + ") must be a positive multiple of 8");
    if (out_channels < 1)
      throw ConfigError("lightweight block: out_channels must be >= 1");
  }
};

class LightweightBlock {
 public:
  LightweightBlock() = default;
  LightweightBlock(LightweightBlockConfig cfg, Rng& rng);

  Tensor forward(const Tensor& x, bool training) const;
  const LightweightBlockConfig& config() const { return cfg_; }
  void collect(const std::string& prefix, Registry& reg) const;

 private:
  LightweightBlockConfig cfg_;
  Conv1x1 reduce_;
  BatchNorm2d bn_reduce_;
  DepthwiseConv3x3 dw1_, dw2_;
  BatchNorm2d bn_dw1_, bn_dw2_;
  Conv1x1 expand_;
  BatchNorm2d bn_expand_;
};

struct DecoderOutput {
  /// Per-head logits at full input resolution, ordered coarse to fine
  /// (stride 16, 8, 4 paths); the last entry is the inference output.
  std::vector<Tensor> logits;
  /// Fused stage features d3, d2, d1.
  std::vector<Tensor> stage_features;
};

/// U-Net-style assembly: a stem block on f4 followed by three fusion
/// stages, each concatenating the upsampled previous stage with its skip,
/// plus one 1x1 supervision head per stage.
class Decoder {
 public:
  Decoder() = default;
  explicit Decoder(Rng& rng);

  DecoderOutput decode(const FeaturePyramid& pyr, bool training) const;
  void collect(const std::string& prefix, Registry& reg) const;

 private:
  LightweightBlock stem_, fuse3_, fuse2_, fuse1_;
  Conv1x1 head3_, head2_, head1_;
};

/// Bilinear interpolation to an explicit target size (pyramid levels are
/// floor-divided, so fixed x2 factors would not line up).
Tensor upsample_to(const Tensor& x, int64_t target_h, int64_t target_w);

}  // namespace sam3unet
