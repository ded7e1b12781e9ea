#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "sam3unet/rng.hpp"
#include "sam3unet/tensor.hpp"

namespace sam3unet {

struct DataConfig {
  std::string root;
  std::string image_subdir = "image";
  std::string mask_subdir = "mask";
  int64_t input_h = 336;
  int64_t input_w = 336;
  std::array<double, 3> normalize_mean{0.485, 0.456, 0.406};
  std::array<double, 3> normalize_std{0.229, 0.224, 0.225};
  double flip_prob = 0.5;
  uint64_t seed = 0;
  bool strict = false;

  void validate() const {
    if (input_h < 1 || input_w < 1) throw ConfigError("data.input size must be positive");
    if (flip_prob < 0.0 || flip_prob > 1.0)
      throw ConfigError("data.flip_prob must be in [0,1]");
    for (double s : normalize_std)
      if (s <= 0.0) throw ConfigError("data.normalize_std must be > 0");
  }
};

struct SamplePair {
  std::filesystem::path image_path;
  std::filesystem::path mask_path;
  std::string id;  // filename stem
};

struct IndexResult {
  std::vector<SamplePair> pairs;         // sorted by id
  std::vector<std::string> orphans;      // stems present on only one side
};

/// Pairs <root>/<image_subdir>/* with <root>/<mask_subdir>/* by stem.
/// Strict mode fails on orphans and validates that each mask file is
/// binary {0,255}.
IndexResult index_dataset(const DataConfig& cfg);

struct Sample {
  Tensor image;  // (3,H,W) normalized
  Tensor mask;   // (1,H,W) in {0,1}
};

/// Image: bilinear resize to input size, scale to [0,1], channel
/// normalization. Mask: nearest resize, {0,255} -> {0,1}. In training mode
/// a horizontal and a vertical flip are each applied with flip_prob, to
/// image and mask jointly, driven by the supplied RNG.
Sample preprocess(const SamplePair& pair, const DataConfig& cfg, bool training, Rng& rng);

/// Deterministic per-sample augmentation stream.
inline Rng sample_rng(uint64_t base_seed, int64_t epoch, int64_t index) {
  return Rng(mix_seed(base_seed, static_cast<uint64_t>(epoch),
                      static_cast<uint64_t>(index)));
}

/// Writes n RGB images with one random bright shape (rectangle or ellipse)
/// on a darker textured background, plus exact binary masks. Foreground
/// area is kept within [10%, 60%] of the image. Deterministic per seed.
void make_synthetic(int n, int size, uint64_t seed, const std::filesystem::path& root,
                    const std::string& image_subdir = "image",
                    const std::string& mask_subdir = "mask");

/// Stacks per-sample tensors into batch tensors.
Tensor stack_images(const std::vector<Sample>& samples);
Tensor stack_masks(const std::vector<Sample>& samples);

}  // namespace sam3unet
