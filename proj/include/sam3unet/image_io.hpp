#pragma once

#include <filesystem>

#include "sam3unet/tensor.hpp"

namespace sam3unet {

/// 8-bit image file helpers (PNG/JPEG via OpenCV imgcodecs). Values are
/// mapped to [0,1] doubles on load and round(255*v) on save.

Tensor load_image_rgb(const std::filesystem::path& path);   // (3,H,W)
Tensor load_image_gray(const std::filesystem::path& path);  // (H,W)

void save_image_gray(const std::filesystem::path& path, const Tensor& img);  // (H,W)
void save_image_rgb(const std::filesystem::path& path, const Tensor& img);   // (3,H,W)

}  // namespace sam3unet
