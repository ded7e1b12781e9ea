#pragma once

#include <vector>

#include "sam3unet/decoder.hpp"
#include "sam3unet/tensor.hpp"

namespace sam3unet {

struct LossConfig {
  int pool_kernel = 31;
  double weight_gain = 5.0;  // lambda in the boundary weight
  double epsilon = 1.0;      // union smoothing
  std::vector<double> head_weights{1.0, 1.0, 1.0};
  bool strict_binary = false;

  void validate() const {
    if (pool_kernel < 1 || pool_kernel % 2 == 0)
      throw ConfigError("loss.pool_kernel must be odd and >= 1");
    if (weight_gain < 0) throw ConfigError("loss.weight_gain must be >= 0");
    if (epsilon <= 0) throw ConfigError("loss.epsilon must be > 0");
    for (double w : head_weights)
      if (w < 0) throw ConfigError("loss.head_weights must be >= 0");
  }
};

/// Boundary-emphasis map 1 + lambda * |avgpool_k(gt) - gt| (>= 1
/// everywhere); constant on constant masks. Not part of the autodiff
/// graph.
Tensor weight_map(const Tensor& gt, const LossConfig& cfg = {});

/// Per-image sum(w * bce) / sum(w), averaged over the batch. Stable for
/// logits of any magnitude.
Tensor weighted_bce(const Tensor& logits, const Tensor& gt, const Tensor& w);

/// 1 - (sum(w*p*g)+eps)/(sum(w*(p+g-p*g))+eps) per image with
/// p = sigmoid(logits), averaged over the batch.
Tensor weighted_iou(const Tensor& logits, const Tensor& gt, const Tensor& w,
                    double epsilon = 1.0);

/// weighted_bce + weighted_iou under the shared boundary weight.
Tensor structure_loss(const Tensor& logits, const Tensor& gt, const LossConfig& cfg = {});

/// Deep-supervision aggregate: sum_i head_weights[i] * structure_loss(head_i).
Tensor total_loss(const DecoderOutput& outputs, const Tensor& gt,
                  const LossConfig& cfg = {});

}  // namespace sam3unet
