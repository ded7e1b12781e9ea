#pragma once

#include "sam3unet/nn.hpp"

namespace sam3unet {

inline constexpr int64_t kPyramidChannels = 128;

/// Four 128-channel maps at strides 4, 8, 16, 32 of the original image
/// (floor division), plus the image size they were derived from.
struct FeaturePyramid {
  Tensor f1, f2, f3, f4;
  int64_t input_h = 0, input_w = 0;
};

/// Compresses the single-scale token grid with four independent 1x1
/// convolutions and resizes each result bilinearly to its stride.
class PyramidProjector {
 public:
  PyramidProjector() = default;
  PyramidProjector(int64_t embed_dim, Rng& rng);

  FeaturePyramid project(const Tensor& embedding, int64_t input_h, int64_t input_w) const;

  int64_t embed_dim() const { return embed_dim_; }
  void collect(const std::string& prefix, Registry& reg) const;

 private:
  int64_t embed_dim_ = 0;
  Conv1x1 proj_[4];
};

}  // namespace sam3unet
