#include "sam3unet/tensor.hpp"

#include <unordered_set>

namespace sam3unet {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

Tensor::Tensor(Shape shape, double fill) {
  impl_ = std::make_shared<TensorImpl>();
  impl_->shape = std::move(shape);
  impl_->value.assign(static_cast<size_t>(shape_numel(impl_->shape)), fill);
}

Tensor Tensor::from_data(Shape shape, DVec values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("from_data: " + shape_str(shape) + " does not hold " +
                     std::to_string(values.size()) + " values");
  Tensor t;
  t.impl_ = std::make_shared<TensorImpl>();
  t.impl_->shape = std::move(shape);
  t.impl_->value = std::move(values);
  return t;
}

Tensor Tensor::from_data(Shape shape, const std::vector<double>& values) {
  DVec v(values.begin(), values.end());
  return from_data(std::move(shape), std::move(v));
}

Tensor Tensor::from_data(Shape shape, std::initializer_list<double> values) {
  DVec v(values.begin(), values.end());
  return from_data(std::move(shape), std::move(v));
}

Tensor Tensor::randn(Shape shape, Rng& rng, double stddev) {
  Tensor t(std::move(shape));
  for (double& v : t.impl_->value) v = rng.normal() * stddev;
  return t;
}

Tensor Tensor::uniform(Shape shape, Rng& rng, double lo, double hi) {
  Tensor t(std::move(shape));
  for (double& v : t.impl_->value) v = rng.uniform(lo, hi);
  return t;
}

double Tensor::item() const {
  if (numel() != 1)
    throw ShapeError("item() on tensor of shape " + shape_str(shape()));
  return impl_->value[0];
}

Tensor Tensor::detach() const {
  return Tensor::from_data(impl_->shape, impl_->value);
}

void Tensor::backward() {
  if (numel() != 1)
    throw ShapeError("backward() requires a scalar, got " + shape_str(shape()));

  // Post-order DFS, then reverse for the backward sweep.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, size_t>> stack;
  stack.emplace_back(impl_.get(), 0);
  visited.insert(impl_.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      TensorImpl* p = node->parents[idx++].get();
      if (!visited.count(p)) {
        visited.insert(p);
        stack.emplace_back(p, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  impl_->ensure_grad();
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* node = *it;
    if (node->backward_fn && !node->grad.empty()) node->backward_fn(*node);
  }
}

}  // namespace sam3unet
