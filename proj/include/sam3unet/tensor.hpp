#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "sam3unet/common.hpp"
#include "sam3unet/rng.hpp"

namespace sam3unet {

/// Allocator pinning every buffer to one cache-line alignment so SIMD
/// kernels take identical code paths regardless of heap layout; keeps
/// repeated runs bitwise reproducible.
template <class T, std::size_t Align = 64>
struct AlignedAlloc {
  using value_type = T;
  AlignedAlloc() = default;
  template <class U>
  AlignedAlloc(const AlignedAlloc<U, Align>&) {}
  T* allocate(std::size_t n) {
    return static_cast<T*>(::operator new(n * sizeof(T), std::align_val_t(Align)));
  }
  void deallocate(T* p, std::size_t n) {
    ::operator delete(p, n * sizeof(T), std::align_val_t(Align));
  }
  template <class U>
  struct rebind {
    using other = AlignedAlloc<U, Align>;
  };
  bool operator==(const AlignedAlloc&) const { return true; }
  bool operator!=(const AlignedAlloc&) const { return false; }
};

using DVec = std::vector<double, AlignedAlloc<double>>;

struct TensorImpl;
using TensorImplPtr = std::shared_ptr<TensorImpl>;

/// Dense double tensor with reverse-mode autodiff. Values are contiguous
/// row-major. Ops (see ops.hpp) record a backward closure on the output
/// node; Tensor::backward() runs the recorded graph in reverse topological
/// order. Copying a Tensor is shallow (shared node).
struct TensorImpl {
  Shape shape;
  DVec value;
  DVec grad;  // allocated lazily, same length as value
  bool requires_grad = false;
  std::vector<TensorImplPtr> parents;
  std::function<void(TensorImpl&)> backward_fn;

  bool is_leaf() const { return parents.empty(); }
  bool needs_grad() const { return requires_grad || !parents.empty(); }
  void ensure_grad() {
    if (grad.size() != value.size()) grad.assign(value.size(), 0.0);
  }
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);

  static Tensor from_data(Shape shape, DVec values);
  static Tensor from_data(Shape shape, const std::vector<double>& values);
  static Tensor from_data(Shape shape, std::initializer_list<double> values);
  static Tensor scalar(double v) { return from_data({1}, {v}); }
  static Tensor randn(Shape shape, Rng& rng, double stddev = 1.0);
  static Tensor uniform(Shape shape, Rng& rng, double lo, double hi);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  int ndim() const { return static_cast<int>(impl_->shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(impl_->value.size()); }
  int64_t dim(int i) const {
    if (i < 0) i += ndim();
    return impl_->shape[static_cast<size_t>(i)];
  }

  double* data() { return impl_->value.data(); }
  const double* data() const { return impl_->value.data(); }
  DVec& values() { return impl_->value; }
  const DVec& values() const { return impl_->value; }

  /// Value of a 1-element tensor.
  double item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    impl_->requires_grad = v;
    return *this;
  }
  bool needs_grad() const { return impl_ && impl_->needs_grad(); }

  void ensure_grad() { impl_->ensure_grad(); }
  void zero_grad() {
    impl_->grad.assign(impl_->value.size(), 0.0);
  }
  DVec& grad() { return impl_->grad; }
  const DVec& grad() const { return impl_->grad; }

  /// Deep copy of the values as a fresh constant leaf.
  Tensor detach() const;

  /// Reverse-mode sweep from a scalar node; seeds d(self)/d(self) = 1 and
  /// accumulates into .grad of every reachable node that needs it.
  void backward();

  TensorImplPtr impl() const { return impl_; }

 private:
  TensorImplPtr impl_;
};

/// Global autodiff switch; ops built while disabled are constants.
bool grad_enabled();

struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

}  // namespace sam3unet
