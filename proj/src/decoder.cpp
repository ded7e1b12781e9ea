#include "sam3unet/decoder.hpp"

namespace sam3unet {

LightweightBlock::LightweightBlock(LightweightBlockConfig cfg, Rng& rng) : cfg_(cfg) {
  cfg_.validate();
  reduce_ = Conv1x1(cfg_.in_channels, cfg_.reduced(), rng);
  bn_reduce_ = BatchNorm2d(cfg_.reduced());
  dw1_ = DepthwiseConv3x3(cfg_.branch(), rng);
  bn_dw1_ = BatchNorm2d(cfg_.branch());
  dw2_ = DepthwiseConv3x3(cfg_.branch(), rng);
  bn_dw2_ = BatchNorm2d(cfg_.branch());
  expand_ = Conv1x1(cfg_.concat_width(), cfg_.out_channels, rng);
  bn_expand_ = BatchNorm2d(cfg_.out_channels);
}

Tensor LightweightBlock::forward(const Tensor& x, bool training) const {
  if (x.ndim() != 4 || x.dim(1) != cfg_.in_channels)
    throw ShapeError("lightweight block: expected " + std::to_string(cfg_.in_channels) +
                     " channels, got " + shape_str(x.shape()));
  Tensor p = gelu(bn_reduce_.forward(reduce_.forward(x), training));
  Tensor p1 = slice_channels(p, 0, cfg_.branch());
  Tensor p2 = slice_channels(p, cfg_.branch(), cfg_.reduced());
  Tensor p3 = gelu(bn_dw1_.forward(dw1_.forward(p2), training));
  Tensor p4 = gelu(bn_dw2_.forward(dw2_.forward(p3), training));
  Tensor cat = concat_channels({p1, p2, p3, p4});
  return gelu(bn_expand_.forward(expand_.forward(cat), training));
}

void LightweightBlock::collect(const std::string& prefix, Registry& reg) const {
  reduce_.collect(prefix + "reduce.conv", reg);
  bn_reduce_.collect(prefix + "reduce.bn", reg);
  dw1_.collect(prefix + "dw1.conv", reg);
  bn_dw1_.collect(prefix + "dw1.bn", reg);
  dw2_.collect(prefix + "dw2.conv", reg);
  bn_dw2_.collect(prefix + "dw2.bn", reg);
  expand_.collect(prefix + "expand.conv", reg);
  bn_expand_.collect(prefix + "expand.bn", reg);
}

Tensor upsample_to(const Tensor& x, int64_t target_h, int64_t target_w) {
  if (target_h < 1 || target_w < 1) throw ShapeError("upsample_to: bad target size");
  return bilinear_resize(x, target_h, target_w);
}

Decoder::Decoder(Rng& rng) {
  const int64_t c = kPyramidChannels;
  stem_ = LightweightBlock({c, c}, rng);
  fuse3_ = LightweightBlock({2 * c, c}, rng);
  fuse2_ = LightweightBlock({2 * c, c}, rng);
  fuse1_ = LightweightBlock({2 * c, c}, rng);
  head3_ = Conv1x1(c, 1, rng);
  head2_ = Conv1x1(c, 1, rng);
  head1_ = Conv1x1(c, 1, rng);
}

DecoderOutput Decoder::decode(const FeaturePyramid& pyr, bool training) const {
  for (const Tensor* f : {&pyr.f1, &pyr.f2, &pyr.f3, &pyr.f4})
    if (f->ndim() != 4 || f->dim(1) != kPyramidChannels)
      throw ShapeError("decode: pyramid maps must have " +
                       std::to_string(kPyramidChannels) + " channels, got " +
                       shape_str(f->shape()));

  Tensor d4 = stem_.forward(pyr.f4, training);
  Tensor d3 = fuse3_.forward(
      concat_channels({upsample_to(d4, pyr.f3.dim(2), pyr.f3.dim(3)), pyr.f3}), training);
  Tensor d2 = fuse2_.forward(
      concat_channels({upsample_to(d3, pyr.f2.dim(2), pyr.f2.dim(3)), pyr.f2}), training);
  Tensor d1 = fuse1_.forward(
      concat_channels({upsample_to(d2, pyr.f1.dim(2), pyr.f1.dim(3)), pyr.f1}), training);

  DecoderOutput out;
  out.stage_features = {d3, d2, d1};
  out.logits = {
      upsample_to(head3_.forward(d3), pyr.input_h, pyr.input_w),
      upsample_to(head2_.forward(d2), pyr.input_h, pyr.input_w),
      upsample_to(head1_.forward(d1), pyr.input_h, pyr.input_w),
  };
  return out;
}

void Decoder::collect(const std::string& prefix, Registry& reg) const {
  stem_.collect(prefix + "stem.", reg);
  fuse3_.collect(prefix + "fuse3.", reg);
  fuse2_.collect(prefix + "fuse2.", reg);
  fuse1_.collect(prefix + "fuse1.", reg);
  head3_.collect(prefix + "head3", reg);
  head2_.collect(prefix + "head2", reg);
  head1_.collect(prefix + "head1", reg);
}

}  // namespace sam3unet
