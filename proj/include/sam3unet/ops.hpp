#pragma once

#include <vector>

#include "sam3unet/tensor.hpp"

namespace sam3unet {

// Elementwise (same shape unless noted).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor add_scalar(const Tensor& a, double s);
Tensor mul_scalar(const Tensor& a, double s);
Tensor sub_from_scalar(double s, const Tensor& a);  // s - a

Tensor gelu(const Tensor& x);
Tensor sigmoid(const Tensor& x);
Tensor softmax_lastdim(const Tensor& x);

/// Per-element binary cross entropy from logits, numerically stable for
/// large |logit|. Targets must be constant.
Tensor bce_with_logits(const Tensor& logits, const Tensor& targets);

// Linear algebra.
Tensor matmul(const Tensor& a, const Tensor& b);          // (M,K)x(K,N)
Tensor bmm(const Tensor& a, const Tensor& b);             // (G,M,K)x(G,K,N)
/// x: (..., in); w: (out, in); optional bias (out). Applies rows * w^T + b.
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b = Tensor());

// Layout.
Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<int>& perm);
Tensor slice_lastdim(const Tensor& x, int64_t from, int64_t to);
Tensor slice_channels(const Tensor& x, int64_t from, int64_t to);  // NCHW dim 1
Tensor concat_channels(const std::vector<Tensor>& xs);
/// x: (B,N,D) + p: (1,N,D), broadcast over the batch dimension.
Tensor add_batch_broadcast(const Tensor& x, const Tensor& p);

// Normalization.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                  double eps = 1e-6);
/// NCHW batch norm. In training mode normalizes with batch statistics and
/// updates running_mean / running_var in place; otherwise uses the stored
/// statistics (also the mode for finite-difference checks).
Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor running_mean, Tensor running_var, bool training,
                    double momentum = 0.1, double eps = 1e-5);

// Convolution.
Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b = Tensor());
/// 3x3 depthwise, stride 1, zero padding 1; w: (C,3,3), b: (C) optional.
Tensor depthwise_conv3x3(const Tensor& x, const Tensor& w,
                         const Tensor& b = Tensor());
/// Non-overlapping patch extraction: (B,C,H,W) -> (B*nh*nw, C*p*p),
/// rows ordered (b, ph, pw), columns (c, dy, dx).
Tensor unfold_patches(const Tensor& x, int64_t patch);

// Resampling (half-pixel centers, no corner alignment).
Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w);

// Reductions.
Tensor sum_per_image(const Tensor& x);  // (B,...) -> (B)
Tensor sum_all(const Tensor& x);        // -> (1)
Tensor mean_all(const Tensor& x);       // -> (1)

// Graph-free utilities (constants in, constants out).
/// Stride-1 box filter of size k (odd); the window is clipped at the image
/// border and the mean taken over the in-bounds samples only, so a constant
/// map is reproduced exactly everywhere.
Tensor avg_pool_same(const Tensor& x, int k);
Tensor nearest_resize(const Tensor& x, int64_t out_h, int64_t out_w);
/// Cubic-convolution resize of one (h,w) plane; used for positional grids.
std::vector<double> bicubic_resize_plane(const std::vector<double>& src,
                                         int64_t h, int64_t w, int64_t oh,
                                         int64_t ow);

}  // namespace sam3unet
