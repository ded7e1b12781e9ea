#include "sam3unet/losses.hpp"

#include <cmath>

#include "sam3unet/ops.hpp"

namespace sam3unet {

namespace {

void check_mask_pair(const Tensor& logits, const Tensor& gt, const char* op) {
  if (logits.ndim() != 4 || gt.ndim() != 4 || logits.shape() != gt.shape())
    throw ShapeError(std::string(op) + ": logits " + shape_str(logits.shape()) +
                     " vs gt " + shape_str(gt.shape()));
}

}  // namespace

Tensor weight_map(const Tensor& gt, const LossConfig& cfg) {
  cfg.validate();
  if (gt.ndim() != 4)
    throw ShapeError("weight_map: expected (B,1,H,W), got " + shape_str(gt.shape()));
  if (cfg.strict_binary) {
    for (int64_t i = 0, n = gt.numel(); i < n; ++i) {
      double v = gt.data()[i];
      if (v != 0.0 && v != 1.0)
        throw ConfigError("weight_map: ground truth is not binary (value " +
                          std::to_string(v) + ")");
    }
  }
  Tensor pooled = avg_pool_same(gt.detach(), cfg.pool_kernel);
  Tensor w(gt.shape());
  for (int64_t i = 0, n = gt.numel(); i < n; ++i)
    w.data()[i] = 1.0 + cfg.weight_gain * std::abs(pooled.data()[i] - gt.data()[i]);
  return w;
}

Tensor weighted_bce(const Tensor& logits, const Tensor& gt, const Tensor& w) {
  check_mask_pair(logits, gt, "weighted_bce");
  if (w.shape() != gt.shape())
    throw ShapeError("weighted_bce: weight map shape " + shape_str(w.shape()));
  Tensor ell = bce_with_logits(logits, gt);
  Tensor num = sum_per_image(mul(ell, w));
  Tensor den = sum_per_image(w);
  return mean_all(div(num, den));
}

Tensor weighted_iou(const Tensor& logits, const Tensor& gt, const Tensor& w,
                    double epsilon) {
  check_mask_pair(logits, gt, "weighted_iou");
  if (w.shape() != gt.shape())
    throw ShapeError("weighted_iou: weight map shape " + shape_str(w.shape()));
  Tensor p = sigmoid(logits);
  Tensor pg = mul(p, gt);
  Tensor inter = sum_per_image(mul(w, pg));
  Tensor uni = sum_per_image(mul(w, sub(add(p, gt), pg)));
  Tensor ratio = div(add_scalar(inter, epsilon), add_scalar(uni, epsilon));
  return mean_all(sub_from_scalar(1.0, ratio));
}

Tensor structure_loss(const Tensor& logits, const Tensor& gt, const LossConfig& cfg) {
  Tensor w = weight_map(gt, cfg);
  return add(weighted_bce(logits, gt, w), weighted_iou(logits, gt, w, cfg.epsilon));
}

Tensor total_loss(const DecoderOutput& outputs, const Tensor& gt, const LossConfig& cfg) {
  cfg.validate();
  if (outputs.logits.size() != cfg.head_weights.size())
    throw ConfigError("total_loss: " + std::to_string(outputs.logits.size()) +
                      " heads but " + std::to_string(cfg.head_weights.size()) +
                      " head weights");
  Tensor acc;
  for (size_t i = 0; i < outputs.logits.size(); ++i) {
    Tensor term = mul_scalar(structure_loss(outputs.logits[i], gt, cfg), cfg.head_weights[i]);
    acc = acc.defined() ? add(acc, term) : term;
  }
  return acc;
}

}  // namespace sam3unet
