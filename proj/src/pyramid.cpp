#include "sam3unet/pyramid.hpp"

namespace sam3unet {

PyramidProjector::PyramidProjector(int64_t embed_dim, Rng& rng) : embed_dim_(embed_dim) {
  for (auto& p : proj_) p = Conv1x1(embed_dim, kPyramidChannels, rng);
}

FeaturePyramid PyramidProjector::project(const Tensor& embedding, int64_t input_h,
                                         int64_t input_w) const {
  if (embedding.ndim() != 4 || embedding.dim(1) != embed_dim_)
    throw ShapeError("project: expected (B," + std::to_string(embed_dim_) +
                     ",h,w), got " + shape_str(embedding.shape()));
  if (input_h < 32 || input_w < 32)
    throw ShapeError("project: input size must be at least 32 pixels");

  FeaturePyramid pyr;
  pyr.input_h = input_h;
  pyr.input_w = input_w;
  const int64_t strides[4] = {4, 8, 16, 32};
  Tensor* outs[4] = {&pyr.f1, &pyr.f2, &pyr.f3, &pyr.f4};
  for (int k = 0; k < 4; ++k)
    *outs[k] = bilinear_resize(proj_[k].forward(embedding), input_h / strides[k],
                               input_w / strides[k]);
  return pyr;
}

void PyramidProjector::collect(const std::string& prefix, Registry& reg) const {
  for (int k = 0; k < 4; ++k)
    proj_[k].collect(prefix + "proj" + std::to_string(k + 1), reg);
}

}  // namespace sam3unet
