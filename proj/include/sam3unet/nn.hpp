#pragma once

#include <string>
#include <vector>

#include "sam3unet/ops.hpp"
#include "sam3unet/tensor.hpp"

namespace sam3unet {

/// One named tensor of a model. Parameters may be trainable (trainable ==
/// tensor.requires_grad()); buffers (BN running statistics) are state that
/// is checkpointed but never optimized.
struct NamedTensor {
  std::string name;
  Tensor tensor;
  bool is_param = true;
};

class Registry {
 public:
  void add(const std::string& name, const Tensor& t, bool is_param = true) {
    items_.push_back({name, t, is_param});
  }
  const std::vector<NamedTensor>& items() const { return items_; }

  std::vector<NamedTensor> trainable() const {
    std::vector<NamedTensor> out;
    for (const auto& it : items_)
      if (it.is_param && it.tensor.requires_grad()) out.push_back(it);
    return out;
  }
  std::vector<NamedTensor> frozen_params() const {
    std::vector<NamedTensor> out;
    for (const auto& it : items_)
      if (it.is_param && !it.tensor.requires_grad()) out.push_back(it);
    return out;
  }
  const NamedTensor* find(const std::string& name) const {
    for (const auto& it : items_)
      if (it.name == name) return &it;
    return nullptr;
  }
  int64_t count_values(bool trainable_only = false) const {
    int64_t n = 0;
    for (const auto& it : items_)
      if (it.is_param && (!trainable_only || it.tensor.requires_grad()))
        n += it.tensor.numel();
    return n;
  }

 private:
  std::vector<NamedTensor> items_;
};

/// y = x W^T + b with the usual fan-in uniform init.
struct Linear {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

  Linear() = default;
  Linear(int64_t in, int64_t out, Rng& rng, bool zero_init = false) {
    if (zero_init) {
      weight = Tensor(Shape{out, in});
      bias = Tensor(Shape{out});
    } else {
      double bound = 1.0 / std::sqrt(static_cast<double>(in));
      weight = Tensor::uniform(Shape{out, in}, rng, -bound, bound);
      bias = Tensor::uniform(Shape{out}, rng, -bound, bound);
    }
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }

  Tensor forward(const Tensor& x) const { return linear(x, weight, bias); }

  void collect(const std::string& p, Registry& reg) const {
    reg.add(p + ".weight", weight);
    reg.add(p + ".bias", bias);
  }
};

struct LayerNorm {
  Tensor weight, bias;
  double eps = 1e-6;

  LayerNorm() = default;
  explicit LayerNorm(int64_t dim) {
    weight = Tensor(Shape{dim}, 1.0);
    bias = Tensor(Shape{dim}, 0.0);
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
  Tensor forward(const Tensor& x) const { return layer_norm(x, weight, bias, eps); }
  void collect(const std::string& p, Registry& reg) const {
    reg.add(p + ".weight", weight);
    reg.add(p + ".bias", bias);
  }
};

struct Conv1x1 {
  Tensor weight;  // (out, in)
  Tensor bias;    // (out)

  Conv1x1() = default;
  Conv1x1(int64_t in, int64_t out, Rng& rng) {
    double bound = 1.0 / std::sqrt(static_cast<double>(in));
    weight = Tensor::uniform(Shape{out, in}, rng, -bound, bound);
    bias = Tensor::uniform(Shape{out}, rng, -bound, bound);
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
  Tensor forward(const Tensor& x) const { return conv1x1(x, weight, bias); }
  void collect(const std::string& p, Registry& reg) const {
    reg.add(p + ".weight", weight);
    reg.add(p + ".bias", bias);
  }
};

struct DepthwiseConv3x3 {
  Tensor weight;  // (C,3,3)
  Tensor bias;    // (C)

  DepthwiseConv3x3() = default;
  DepthwiseConv3x3(int64_t channels, Rng& rng) {
    double bound = 1.0 / 3.0;  // fan_in = 9
    weight = Tensor::uniform(Shape{channels, 3, 3}, rng, -bound, bound);
    bias = Tensor::uniform(Shape{channels}, rng, -bound, bound);
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
  Tensor forward(const Tensor& x) const { return depthwise_conv3x3(x, weight, bias); }
  void collect(const std::string& p, Registry& reg) const {
    reg.add(p + ".weight", weight);
    reg.add(p + ".bias", bias);
  }
};

struct BatchNorm2d {
  Tensor weight, bias;                // affine
  Tensor running_mean, running_var;   // buffers
  double momentum = 0.1;
  double eps = 1e-5;

  BatchNorm2d() = default;
  explicit BatchNorm2d(int64_t channels) {
    weight = Tensor(Shape{channels}, 1.0);
    bias = Tensor(Shape{channels}, 0.0);
    running_mean = Tensor(Shape{channels}, 0.0);
    running_var = Tensor(Shape{channels}, 1.0);
    weight.set_requires_grad(true);
    bias.set_requires_grad(true);
  }
  Tensor forward(const Tensor& x, bool training) const {
    return batch_norm2d(x, weight, bias, running_mean, running_var, training, momentum,
                        eps);
  }
  void collect(const std::string& p, Registry& reg) const {
    reg.add(p + ".weight", weight);
    reg.add(p + ".bias", bias);
    reg.add(p + ".running_mean", running_mean, /*is_param=*/false);
    reg.add(p + ".running_var", running_var, /*is_param=*/false);
  }
};

}  // namespace sam3unet
