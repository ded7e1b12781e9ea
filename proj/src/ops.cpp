#include "sam3unet/ops.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>

namespace sam3unet {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapM = Eigen::Map<RowMat>;
using CMapM = Eigen::Map<const RowMat>;

bool track(std::initializer_list<const Tensor*> ins) {
  if (!grad_enabled()) return false;
  for (const Tensor* t : ins)
    if (t->defined() && t->needs_grad()) return true;
  return false;
}

void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape())
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a.shape()) +
                     " vs " + shape_str(b.shape()));
}

void check_4d(const Tensor& x, const char* op) {
  if (x.ndim() != 4)
    throw ShapeError(std::string(op) + ": expected NCHW tensor, got " +
                     shape_str(x.shape()));
}

inline double norm_cdf(double x) { return 0.5 * (1.0 + std::erf(x * 0.7071067811865475)); }
inline double norm_pdf(double x) { return std::exp(-0.5 * x * x) * 0.3989422804014327; }
inline double sigmoid_val(double x) {
  return x >= 0 ? 1.0 / (1.0 + std::exp(-x)) : std::exp(x) / (1.0 + std::exp(x));
}

}  // namespace

// ---------------------------------------------------------------------------
// Elementwise

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out(a.shape());
  const double* pa = a.data();
  const double* pb = b.data();
  double* po = out.data();
  for (int64_t i = 0, n = a.numel(); i < n; ++i) po[i] = pa[i] + pb[i];
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib](TensorImpl& self) {
      if (ia->needs_grad()) {
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] += self.grad[i];
      }
      if (ib->needs_grad()) {
        ib->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ib->grad[i] += self.grad[i];
      }
    };
  }
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib](TensorImpl& self) {
      if (ia->needs_grad()) {
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] += self.grad[i];
      }
      if (ib->needs_grad()) {
        ib->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ib->grad[i] -= self.grad[i];
      }
    };
  }
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib](TensorImpl& self) {
      if (ia->needs_grad()) {
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          ia->grad[i] += self.grad[i] * ib->value[i];
      }
      if (ib->needs_grad()) {
        ib->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          ib->grad[i] += self.grad[i] * ia->value[i];
      }
    };
  }
  return out;
}

Tensor div(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div");
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = a.data()[i] / b.data()[i];
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib](TensorImpl& self) {
      if (ia->needs_grad()) {
        ia->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          ia->grad[i] += self.grad[i] / ib->value[i];
      }
      if (ib->needs_grad()) {
        ib->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i)
          ib->grad[i] -= self.grad[i] * ia->value[i] / (ib->value[i] * ib->value[i]);
      }
    };
  }
  return out;
}

Tensor add_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = a.data()[i] + s;
  if (track({&a})) {
    auto ia = a.impl();
    out.impl()->parents = {ia};
    out.impl()->backward_fn = [ia](TensorImpl& self) {
      ia->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] += self.grad[i];
    };
  }
  return out;
}

Tensor mul_scalar(const Tensor& a, double s) {
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = a.data()[i] * s;
  if (track({&a})) {
    auto ia = a.impl();
    out.impl()->parents = {ia};
    out.impl()->backward_fn = [ia, s](TensorImpl& self) {
      ia->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] += self.grad[i] * s;
    };
  }
  return out;
}

Tensor sub_from_scalar(double s, const Tensor& a) {
  Tensor out(a.shape());
  for (int64_t i = 0, n = a.numel(); i < n; ++i) out.data()[i] = s - a.data()[i];
  if (track({&a})) {
    auto ia = a.impl();
    out.impl()->parents = {ia};
    out.impl()->backward_fn = [ia](TensorImpl& self) {
      ia->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ia->grad[i] -= self.grad[i];
    };
  }
  return out;
}

Tensor gelu(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0, n = x.numel(); i < n; ++i) {
    double v = x.data()[i];
    out.data()[i] = v * norm_cdf(v);
  }
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix](TensorImpl& self) {
      if (!ix->needs_grad()) return;
      ix->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double v = ix->value[i];
        ix->grad[i] += self.grad[i] * (norm_cdf(v) + v * norm_pdf(v));
      }
    };
  }
  return out;
}

Tensor sigmoid(const Tensor& x) {
  Tensor out(x.shape());
  for (int64_t i = 0, n = x.numel(); i < n; ++i) out.data()[i] = sigmoid_val(x.data()[i]);
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix](TensorImpl& self) {
      if (!ix->needs_grad()) return;
      ix->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) {
        double s = self.value[i];
        ix->grad[i] += self.grad[i] * s * (1.0 - s);
      }
    };
  }
  return out;
}

Tensor softmax_lastdim(const Tensor& x) {
  int64_t d = x.dim(-1);
  int64_t rows = x.numel() / d;
  Tensor out(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double* o = out.data() + r * d;
    double mx = in[0];
    for (int64_t j = 1; j < d; ++j) mx = std::max(mx, in[j]);
    double sum = 0.0;
    for (int64_t j = 0; j < d; ++j) {
      o[j] = std::exp(in[j] - mx);
      sum += o[j];
    }
    for (int64_t j = 0; j < d; ++j) o[j] /= sum;
  }
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, d, rows](TensorImpl& self) {
      if (!ix->needs_grad()) return;
      ix->ensure_grad();
      for (int64_t r = 0; r < rows; ++r) {
        const double* s = self.value.data() + r * d;
        const double* g = self.grad.data() + r * d;
        double* gx = ix->grad.data() + r * d;
        double dot = 0.0;
        for (int64_t j = 0; j < d; ++j) dot += g[j] * s[j];
        for (int64_t j = 0; j < d; ++j) gx[j] += s[j] * (g[j] - dot);
      }
    };
  }
  return out;
}

Tensor bce_with_logits(const Tensor& logits, const Tensor& targets) {
  check_same_shape(logits, targets, "bce_with_logits");
  if (targets.needs_grad())
    throw ShapeError("bce_with_logits: targets must be constant");
  Tensor out(logits.shape());
  for (int64_t i = 0, n = logits.numel(); i < n; ++i) {
    double z = logits.data()[i];
    double y = targets.data()[i];
    out.data()[i] = std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
  }
  if (track({&logits})) {
    auto iz = logits.impl();
    auto it = targets.impl();
    out.impl()->parents = {iz};
    out.impl()->backward_fn = [iz, it](TensorImpl& self) {
      if (!iz->needs_grad()) return;
      iz->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        iz->grad[i] += self.grad[i] * (sigmoid_val(iz->value[i]) - it->value[i]);
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 2 || b.ndim() != 2 || a.dim(1) != b.dim(0))
    throw ShapeError("matmul: incompatible " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor out(Shape{m, n});
  CMapM A(a.data(), m, k), B(b.data(), k, n);
  MapM O(out.data(), m, n);
  O.noalias() = A * B;
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib, m, k, n](TensorImpl& self) {
      CMapM G(self.grad.data(), m, n);
      if (ia->needs_grad()) {
        ia->ensure_grad();
        MapM GA(ia->grad.data(), m, k);
        CMapM B2(ib->value.data(), k, n);
        GA.noalias() += G * B2.transpose();
      }
      if (ib->needs_grad()) {
        ib->ensure_grad();
        MapM GB(ib->grad.data(), k, n);
        CMapM A2(ia->value.data(), m, k);
        GB.noalias() += A2.transpose() * G;
      }
    };
  }
  return out;
}

Tensor bmm(const Tensor& a, const Tensor& b) {
  if (a.ndim() != 3 || b.ndim() != 3 || a.dim(0) != b.dim(0) || a.dim(2) != b.dim(1))
    throw ShapeError("bmm: incompatible " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  int64_t g = a.dim(0), m = a.dim(1), k = a.dim(2), n = b.dim(2);
  Tensor out(Shape{g, m, n});
  for (int64_t i = 0; i < g; ++i) {
    CMapM A(a.data() + i * m * k, m, k), B(b.data() + i * k * n, k, n);
    MapM O(out.data() + i * m * n, m, n);
    O.noalias() = A * B;
  }
  if (track({&a, &b})) {
    auto ia = a.impl(), ib = b.impl();
    out.impl()->parents = {ia, ib};
    out.impl()->backward_fn = [ia, ib, g, m, k, n](TensorImpl& self) {
      for (int64_t i = 0; i < g; ++i) {
        CMapM G(self.grad.data() + i * m * n, m, n);
        if (ia->needs_grad()) {
          ia->ensure_grad();
          MapM GA(ia->grad.data() + i * m * k, m, k);
          CMapM B2(ib->value.data() + i * k * n, k, n);
          GA.noalias() += G * B2.transpose();
        }
        if (ib->needs_grad()) {
          ib->ensure_grad();
          MapM GB(ib->grad.data() + i * k * n, k, n);
          CMapM A2(ia->value.data() + i * m * k, m, k);
          GB.noalias() += A2.transpose() * G;
        }
      }
    };
  }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  int64_t in = x.dim(-1);
  if (w.ndim() != 2 || w.dim(1) != in)
    throw ShapeError("linear: input width " + std::to_string(in) +
                     " vs weight " + shape_str(w.shape()));
  int64_t out_f = w.dim(0);
  if (b.defined() && b.numel() != out_f)
    throw ShapeError("linear: bias size mismatch");
  int64_t rows = x.numel() / in;
  Shape out_shape = x.shape();
  out_shape.back() = out_f;
  Tensor out(out_shape);
  {
    CMapM X(x.data(), rows, in), W(w.data(), out_f, in);
    MapM O(out.data(), rows, out_f);
    O.noalias() = X * W.transpose();
    if (b.defined()) {
      Eigen::Map<const Eigen::RowVectorXd> bv(b.data(), out_f);
      O.rowwise() += bv;
    }
  }
  if (track({&x, &w, &b})) {
    auto ix = x.impl(), iw = w.impl();
    auto ib = b.defined() ? b.impl() : nullptr;
    out.impl()->parents = {ix, iw};
    if (ib) out.impl()->parents.push_back(b.impl());
    out.impl()->backward_fn = [ix, iw, ib, rows, in, out_f](TensorImpl& self) {
      CMapM G(self.grad.data(), rows, out_f);
      if (ix->needs_grad()) {
        ix->ensure_grad();
        MapM GX(ix->grad.data(), rows, in);
        CMapM W2(iw->value.data(), out_f, in);
        GX.noalias() += G * W2;
      }
      if (iw->needs_grad()) {
        iw->ensure_grad();
        MapM GW(iw->grad.data(), out_f, in);
        CMapM X2(ix->value.data(), rows, in);
        GW.noalias() += G.transpose() * X2;
      }
      if (ib && ib->needs_grad()) {
        ib->ensure_grad();
        Eigen::Map<Eigen::RowVectorXd> GB(ib->grad.data(), out_f);
        GB += G.colwise().sum();
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Layout

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel())
    throw ShapeError("reshape: " + shape_str(x.shape()) + " -> " + shape_str(shape));
  Tensor out = Tensor::from_data(std::move(shape), x.values());
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix](TensorImpl& self) {
      ix->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) ix->grad[i] += self.grad[i];
    };
  }
  return out;
}

namespace {

// dst[coords under out_shape] (+)= src[coords mapped through perm];
// out_shape[i] = in_shape[perm[i]].
void permute_walk(const double* src, const Shape& in_shape,
                  const std::vector<int>& perm, double* dst, bool accumulate_src) {
  int nd = static_cast<int>(in_shape.size());
  Shape out_shape(nd);
  for (int i = 0; i < nd; ++i) out_shape[i] = in_shape[static_cast<size_t>(perm[i])];
  std::vector<int64_t> in_strides(nd, 1);
  for (int i = nd - 2; i >= 0; --i) in_strides[i] = in_strides[i + 1] * in_shape[i + 1];
  // stride of output axis i in the source layout
  std::vector<int64_t> src_stride(nd);
  for (int i = 0; i < nd; ++i) src_stride[i] = in_strides[static_cast<size_t>(perm[i])];

  std::vector<int64_t> coord(nd, 0);
  int64_t total = shape_numel(in_shape);
  int64_t src_idx = 0;
  for (int64_t o = 0; o < total; ++o) {
    if (accumulate_src)
      dst[src_idx] += src[o];  // scatter: src is out-ordered grad
    else
      dst[o] = src[src_idx];
    // advance out coordinate, maintaining src_idx
    for (int i = nd - 1; i >= 0; --i) {
      coord[i]++;
      src_idx += src_stride[i];
      if (coord[i] < out_shape[i]) break;
      src_idx -= src_stride[i] * coord[i];
      coord[i] = 0;
    }
  }
}

}  // namespace

Tensor permute(const Tensor& x, const std::vector<int>& perm) {
  if (static_cast<int>(perm.size()) != x.ndim())
    throw ShapeError("permute: rank mismatch");
  Shape out_shape(perm.size());
  for (size_t i = 0; i < perm.size(); ++i)
    out_shape[i] = x.dim(perm[i]);
  Tensor out(out_shape);
  permute_walk(x.data(), x.shape(), perm, out.data(), false);
  if (track({&x})) {
    auto ix = x.impl();
    auto p = perm;
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, p](TensorImpl& self) {
      ix->ensure_grad();
      permute_walk(self.grad.data(), ix->shape, p, ix->grad.data(), true);
    };
  }
  return out;
}

Tensor slice_lastdim(const Tensor& x, int64_t from, int64_t to) {
  int64_t d = x.dim(-1);
  if (from < 0 || to > d || from >= to)
    throw ShapeError("slice_lastdim: bad range");
  int64_t rows = x.numel() / d, width = to - from;
  Shape out_shape = x.shape();
  out_shape.back() = width;
  Tensor out(out_shape);
  for (int64_t r = 0; r < rows; ++r)
    std::copy_n(x.data() + r * d + from, width, out.data() + r * width);
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, rows, d, from, width](TensorImpl& self) {
      ix->ensure_grad();
      for (int64_t r = 0; r < rows; ++r)
        for (int64_t j = 0; j < width; ++j)
          ix->grad[r * d + from + j] += self.grad[r * width + j];
    };
  }
  return out;
}

Tensor slice_channels(const Tensor& x, int64_t from, int64_t to) {
  check_4d(x, "slice_channels");
  int64_t bsz = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (from < 0 || to > c || from >= to)
    throw ShapeError("slice_channels: bad range");
  int64_t width = to - from;
  Tensor out(Shape{bsz, width, x.dim(2), x.dim(3)});
  for (int64_t b = 0; b < bsz; ++b)
    std::copy_n(x.data() + (b * c + from) * hw, width * hw, out.data() + b * width * hw);
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, bsz, c, hw, from, width](TensorImpl& self) {
      ix->ensure_grad();
      for (int64_t b = 0; b < bsz; ++b) {
        const double* g = self.grad.data() + b * width * hw;
        double* gx = ix->grad.data() + (b * c + from) * hw;
        for (int64_t i = 0; i < width * hw; ++i) gx[i] += g[i];
      }
    };
  }
  return out;
}

Tensor concat_channels(const std::vector<Tensor>& xs) {
  if (xs.empty()) throw ShapeError("concat_channels: empty input");
  check_4d(xs[0], "concat_channels");
  int64_t bsz = xs[0].dim(0), h = xs[0].dim(2), w = xs[0].dim(3), hw = h * w;
  int64_t total_c = 0;
  for (const Tensor& t : xs) {
    check_4d(t, "concat_channels");
    if (t.dim(0) != bsz || t.dim(2) != h || t.dim(3) != w)
      throw ShapeError("concat_channels: mismatched shapes");
    total_c += t.dim(1);
  }
  Tensor out(Shape{bsz, total_c, h, w});
  int64_t off = 0;
  for (const Tensor& t : xs) {
    int64_t c = t.dim(1);
    for (int64_t b = 0; b < bsz; ++b)
      std::copy_n(t.data() + b * c * hw, c * hw, out.data() + (b * total_c + off) * hw);
    off += c;
  }
  bool any = false;
  for (const Tensor& t : xs) any = any || t.needs_grad();
  if (grad_enabled() && any) {
    std::vector<TensorImplPtr> parents;
    std::vector<int64_t> widths;
    for (const Tensor& t : xs) {
      parents.push_back(t.impl());
      widths.push_back(t.dim(1));
    }
    out.impl()->parents = parents;
    out.impl()->backward_fn = [parents, widths, bsz, hw, total_c](TensorImpl& self) {
      int64_t off2 = 0;
      for (size_t k = 0; k < parents.size(); ++k) {
        int64_t c = widths[k];
        if (parents[k]->needs_grad()) {
          parents[k]->ensure_grad();
          for (int64_t b = 0; b < bsz; ++b) {
            const double* g = self.grad.data() + (b * total_c + off2) * hw;
            double* gx = parents[k]->grad.data() + b * c * hw;
            for (int64_t i = 0; i < c * hw; ++i) gx[i] += g[i];
          }
        }
        off2 += c;
      }
    };
  }
  return out;
}

Tensor add_batch_broadcast(const Tensor& x, const Tensor& p) {
  if (x.ndim() < 2 || p.numel() * x.dim(0) != x.numel())
    throw ShapeError("add_batch_broadcast: " + shape_str(x.shape()) + " + " +
                     shape_str(p.shape()));
  int64_t bsz = x.dim(0), per = p.numel();
  Tensor out(x.shape());
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t i = 0; i < per; ++i)
      out.data()[b * per + i] = x.data()[b * per + i] + p.data()[i];
  if (track({&x, &p})) {
    auto ix = x.impl(), ip = p.impl();
    out.impl()->parents = {ix, ip};
    out.impl()->backward_fn = [ix, ip, bsz, per](TensorImpl& self) {
      if (ix->needs_grad()) {
        ix->ensure_grad();
        for (size_t i = 0; i < self.grad.size(); ++i) ix->grad[i] += self.grad[i];
      }
      if (ip->needs_grad()) {
        ip->ensure_grad();
        for (int64_t b = 0; b < bsz; ++b)
          for (int64_t i = 0; i < per; ++i) ip->grad[i] += self.grad[b * per + i];
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Normalization

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, double eps) {
  int64_t d = x.dim(-1);
  if (gamma.numel() != d || beta.numel() != d)
    throw ShapeError("layer_norm: affine size mismatch");
  int64_t rows = x.numel() / d;
  Tensor out(x.shape());
  for (int64_t r = 0; r < rows; ++r) {
    const double* in = x.data() + r * d;
    double* o = out.data() + r * d;
    double mean = 0.0;
    for (int64_t j = 0; j < d; ++j) mean += in[j];
    mean /= static_cast<double>(d);
    double var = 0.0;
    for (int64_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
    var /= static_cast<double>(d);
    double inv = 1.0 / std::sqrt(var + eps);
    for (int64_t j = 0; j < d; ++j)
      o[j] = gamma.data()[j] * ((in[j] - mean) * inv) + beta.data()[j];
  }
  if (track({&x, &gamma, &beta})) {
    auto ix = x.impl(), ig = gamma.impl(), ib = beta.impl();
    out.impl()->parents = {ix, ig, ib};
    out.impl()->backward_fn = [ix, ig, ib, rows, d, eps](TensorImpl& self) {
      std::vector<double> xhat(static_cast<size_t>(d));
      for (int64_t r = 0; r < rows; ++r) {
        const double* in = ix->value.data() + r * d;
        const double* g = self.grad.data() + r * d;
        double mean = 0.0;
        for (int64_t j = 0; j < d; ++j) mean += in[j];
        mean /= static_cast<double>(d);
        double var = 0.0;
        for (int64_t j = 0; j < d; ++j) var += (in[j] - mean) * (in[j] - mean);
        var /= static_cast<double>(d);
        double inv = 1.0 / std::sqrt(var + eps);
        for (int64_t j = 0; j < d; ++j) xhat[static_cast<size_t>(j)] = (in[j] - mean) * inv;

        if (ig->needs_grad()) {
          ig->ensure_grad();
          for (int64_t j = 0; j < d; ++j)
            ig->grad[j] += g[j] * xhat[static_cast<size_t>(j)];
        }
        if (ib->needs_grad()) {
          ib->ensure_grad();
          for (int64_t j = 0; j < d; ++j) ib->grad[j] += g[j];
        }
        if (ix->needs_grad()) {
          ix->ensure_grad();
          double m1 = 0.0, m2 = 0.0;
          for (int64_t j = 0; j < d; ++j) {
            double h = g[j] * ig->value[j];
            m1 += h;
            m2 += h * xhat[static_cast<size_t>(j)];
          }
          m1 /= static_cast<double>(d);
          m2 /= static_cast<double>(d);
          double* gx = ix->grad.data() + r * d;
          for (int64_t j = 0; j < d; ++j) {
            double h = g[j] * ig->value[j];
            gx[j] += (h - m1 - xhat[static_cast<size_t>(j)] * m2) * inv;
          }
        }
      }
    };
  }
  return out;
}

Tensor batch_norm2d(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                    Tensor running_mean, Tensor running_var, bool training,
                    double momentum, double eps) {
  check_4d(x, "batch_norm2d");
  int64_t bsz = x.dim(0), c = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (gamma.numel() != c || beta.numel() != c || running_mean.numel() != c ||
      running_var.numel() != c)
    throw ShapeError("batch_norm2d: channel mismatch");
  int64_t n = bsz * hw;

  std::vector<double> mean(static_cast<size_t>(c)), var(static_cast<size_t>(c));
  if (training) {
    for (int64_t ch = 0; ch < c; ++ch) {
      double m = 0.0;
      for (int64_t b = 0; b < bsz; ++b) {
        const double* p = x.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) m += p[i];
      }
      m /= static_cast<double>(n);
      double v = 0.0;
      for (int64_t b = 0; b < bsz; ++b) {
        const double* p = x.data() + (b * c + ch) * hw;
        for (int64_t i = 0; i < hw; ++i) v += (p[i] - m) * (p[i] - m);
      }
      v /= static_cast<double>(n);
      mean[static_cast<size_t>(ch)] = m;
      var[static_cast<size_t>(ch)] = v;
      double unbiased = n > 1 ? v * static_cast<double>(n) / static_cast<double>(n - 1) : v;
      running_mean.data()[ch] = (1.0 - momentum) * running_mean.data()[ch] + momentum * m;
      running_var.data()[ch] = (1.0 - momentum) * running_var.data()[ch] + momentum * unbiased;
    }
  } else {
    for (int64_t ch = 0; ch < c; ++ch) {
      mean[static_cast<size_t>(ch)] = running_mean.data()[ch];
      var[static_cast<size_t>(ch)] = running_var.data()[ch];
    }
  }

  Tensor out(x.shape());
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* p = x.data() + (b * c + ch) * hw;
      double* o = out.data() + (b * c + ch) * hw;
      double inv = 1.0 / std::sqrt(var[static_cast<size_t>(ch)] + eps);
      double ga = gamma.data()[ch], be = beta.data()[ch];
      double m = mean[static_cast<size_t>(ch)];
      for (int64_t i = 0; i < hw; ++i) o[i] = ga * ((p[i] - m) * inv) + be;
    }

  if (track({&x, &gamma, &beta})) {
    auto ix = x.impl(), ig = gamma.impl(), ib = beta.impl();
    out.impl()->parents = {ix, ig, ib};
    auto mean_c = mean;
    auto var_c = var;
    out.impl()->backward_fn = [ix, ig, ib, bsz, c, hw, n, eps, training, mean_c,
                               var_c](TensorImpl& self) {
      for (int64_t ch = 0; ch < c; ++ch) {
        double m = mean_c[static_cast<size_t>(ch)];
        double inv = 1.0 / std::sqrt(var_c[static_cast<size_t>(ch)] + eps);
        double ga = ig->value[static_cast<size_t>(ch)];
        double sum_g = 0.0, sum_gx = 0.0;
        for (int64_t b = 0; b < bsz; ++b) {
          const double* g = self.grad.data() + (b * c + ch) * hw;
          const double* p = ix->value.data() + (b * c + ch) * hw;
          for (int64_t i = 0; i < hw; ++i) {
            sum_g += g[i];
            sum_gx += g[i] * ((p[i] - m) * inv);
          }
        }
        if (ig->needs_grad()) {
          ig->ensure_grad();
          ig->grad[static_cast<size_t>(ch)] += sum_gx;
        }
        if (ib->needs_grad()) {
          ib->ensure_grad();
          ib->grad[static_cast<size_t>(ch)] += sum_g;
        }
        if (ix->needs_grad()) {
          ix->ensure_grad();
          double m1 = sum_g / static_cast<double>(n);
          double m2 = sum_gx / static_cast<double>(n);
          for (int64_t b = 0; b < bsz; ++b) {
            const double* g = self.grad.data() + (b * c + ch) * hw;
            const double* p = ix->value.data() + (b * c + ch) * hw;
            double* gx = ix->grad.data() + (b * c + ch) * hw;
            if (training) {
              for (int64_t i = 0; i < hw; ++i) {
                double xh = (p[i] - m) * inv;
                gx[i] += ga * inv * (g[i] - m1 - xh * m2);
              }
            } else {
              for (int64_t i = 0; i < hw; ++i) gx[i] += ga * inv * g[i];
            }
          }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution

Tensor conv1x1(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_4d(x, "conv1x1");
  int64_t bsz = x.dim(0), ci = x.dim(1), hw = x.dim(2) * x.dim(3);
  if (w.ndim() != 2 || w.dim(1) != ci)
    throw ShapeError("conv1x1: weight " + shape_str(w.shape()) + " vs input channels " +
                     std::to_string(ci));
  int64_t co = w.dim(0);
  if (b.defined() && b.numel() != co) throw ShapeError("conv1x1: bias size mismatch");
  Tensor out(Shape{bsz, co, x.dim(2), x.dim(3)});
  for (int64_t bi = 0; bi < bsz; ++bi) {
    CMapM X(x.data() + bi * ci * hw, ci, hw), W(w.data(), co, ci);
    MapM O(out.data() + bi * co * hw, co, hw);
    O.noalias() = W * X;
    if (b.defined()) O.colwise() += Eigen::Map<const Eigen::VectorXd>(b.data(), co);
  }
  if (track({&x, &w, &b})) {
    auto ix = x.impl(), iw = w.impl();
    auto ib = b.defined() ? b.impl() : nullptr;
    out.impl()->parents = {ix, iw};
    if (ib) out.impl()->parents.push_back(b.impl());
    out.impl()->backward_fn = [ix, iw, ib, bsz, ci, co, hw](TensorImpl& self) {
      for (int64_t bi = 0; bi < bsz; ++bi) {
        CMapM G(self.grad.data() + bi * co * hw, co, hw);
        if (ix->needs_grad()) {
          ix->ensure_grad();
          MapM GX(ix->grad.data() + bi * ci * hw, ci, hw);
          CMapM W2(iw->value.data(), co, ci);
          GX.noalias() += W2.transpose() * G;
        }
        if (iw->needs_grad()) {
          iw->ensure_grad();
          MapM GW(iw->grad.data(), co, ci);
          CMapM X2(ix->value.data() + bi * ci * hw, ci, hw);
          GW.noalias() += G * X2.transpose();
        }
        if (ib && ib->needs_grad()) {
          ib->ensure_grad();
          Eigen::Map<Eigen::VectorXd> GB(ib->grad.data(), co);
          GB += G.rowwise().sum();
        }
      }
    };
  }
  return out;
}

Tensor depthwise_conv3x3(const Tensor& x, const Tensor& w, const Tensor& b) {
  check_4d(x, "depthwise_conv3x3");
  int64_t bsz = x.dim(0), c = x.dim(1), h = x.dim(2), wd = x.dim(3);
  if (w.ndim() != 3 || w.dim(0) != c || w.dim(1) != 3 || w.dim(2) != 3)
    throw ShapeError("depthwise_conv3x3: weight " + shape_str(w.shape()) +
                     " vs channels " + std::to_string(c));
  if (b.defined() && b.numel() != c)
    throw ShapeError("depthwise_conv3x3: bias size mismatch");
  Tensor out(x.shape());
  for (int64_t bi = 0; bi < bsz; ++bi)
    for (int64_t ch = 0; ch < c; ++ch) {
      const double* in = x.data() + (bi * c + ch) * h * wd;
      const double* k = w.data() + ch * 9;
      double bias = b.defined() ? b.data()[ch] : 0.0;
      double* o = out.data() + (bi * c + ch) * h * wd;
      for (int64_t y = 0; y < h; ++y)
        for (int64_t xx = 0; xx < wd; ++xx) {
          double acc = bias;
          for (int dy = -1; dy <= 1; ++dy) {
            int64_t sy = y + dy;
            if (sy < 0 || sy >= h) continue;
            for (int dx = -1; dx <= 1; ++dx) {
              int64_t sx = xx + dx;
              if (sx < 0 || sx >= wd) continue;
              acc += in[sy * wd + sx] * k[(dy + 1) * 3 + (dx + 1)];
            }
          }
          o[y * wd + xx] = acc;
        }
    }
  if (track({&x, &w, &b})) {
    auto ix = x.impl(), iw = w.impl();
    auto ib = b.defined() ? b.impl() : nullptr;
    out.impl()->parents = {ix, iw};
    if (ib) out.impl()->parents.push_back(b.impl());
    out.impl()->backward_fn = [ix, iw, ib, bsz, c, h, wd](TensorImpl& self) {
      if (ix->needs_grad()) ix->ensure_grad();
      if (iw->needs_grad()) iw->ensure_grad();
      if (ib && ib->needs_grad()) ib->ensure_grad();
      for (int64_t bi = 0; bi < bsz; ++bi)
        for (int64_t ch = 0; ch < c; ++ch) {
          const double* g = self.grad.data() + (bi * c + ch) * h * wd;
          const double* in = ix->value.data() + (bi * c + ch) * h * wd;
          const double* k = iw->value.data() + ch * 9;
          for (int64_t y = 0; y < h; ++y)
            for (int64_t xx = 0; xx < wd; ++xx) {
              double gv = g[y * wd + xx];
              if (gv == 0.0) continue;
              for (int dy = -1; dy <= 1; ++dy) {
                int64_t sy = y + dy;
                if (sy < 0 || sy >= h) continue;
                for (int dx = -1; dx <= 1; ++dx) {
                  int64_t sx = xx + dx;
                  if (sx < 0 || sx >= wd) continue;
                  if (ix->needs_grad())
                    ix->grad[(bi * c + ch) * h * wd + sy * wd + sx] +=
                        gv * k[(dy + 1) * 3 + (dx + 1)];
                  if (iw->needs_grad())
                    iw->grad[ch * 9 + (dy + 1) * 3 + (dx + 1)] += gv * in[sy * wd + sx];
                }
              }
              if (ib && ib->needs_grad()) ib->grad[ch] += gv;
            }
        }
    };
  }
  return out;
}

Tensor unfold_patches(const Tensor& x, int64_t patch) {
  check_4d(x, "unfold_patches");
  int64_t bsz = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (patch <= 0 || h % patch != 0 || w % patch != 0)
    throw ShapeError("unfold_patches: spatial size " + shape_str({h, w}) +
                     " not a multiple of patch " + std::to_string(patch));
  int64_t nh = h / patch, nw = w / patch;
  int64_t cols = c * patch * patch;
  Tensor out(Shape{bsz * nh * nw, cols});
  for (int64_t b = 0; b < bsz; ++b)
    for (int64_t ph = 0; ph < nh; ++ph)
      for (int64_t pw = 0; pw < nw; ++pw) {
        double* row = out.data() + ((b * nh + ph) * nw + pw) * cols;
        for (int64_t ch = 0; ch < c; ++ch)
          for (int64_t dy = 0; dy < patch; ++dy)
            for (int64_t dx = 0; dx < patch; ++dx)
              row[(ch * patch + dy) * patch + dx] =
                  x.data()[((b * c + ch) * h + ph * patch + dy) * w + pw * patch + dx];
      }
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, bsz, c, h, w, patch, nh, nw, cols](TensorImpl& self) {
      ix->ensure_grad();
      for (int64_t b = 0; b < bsz; ++b)
        for (int64_t ph = 0; ph < nh; ++ph)
          for (int64_t pw = 0; pw < nw; ++pw) {
            const double* row = self.grad.data() + ((b * nh + ph) * nw + pw) * cols;
            for (int64_t ch = 0; ch < c; ++ch)
              for (int64_t dy = 0; dy < patch; ++dy)
                for (int64_t dx = 0; dx < patch; ++dx)
                  ix->grad[((b * c + ch) * h + ph * patch + dy) * w + pw * patch + dx] +=
                      row[(ch * patch + dy) * patch + dx];
          }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Resampling

namespace {

struct LinCoef {
  int64_t i0, i1;
  double w1;  // weight of i1; i0 gets (1 - w1)
};

std::vector<LinCoef> linear_coefs(int64_t in, int64_t out) {
  std::vector<LinCoef> cs(static_cast<size_t>(out));
  double scale = static_cast<double>(in) / static_cast<double>(out);
  for (int64_t o = 0; o < out; ++o) {
    double s = (static_cast<double>(o) + 0.5) * scale - 0.5;
    double fl = std::floor(s);
    double w = s - fl;
    int64_t i0 = static_cast<int64_t>(fl);
    int64_t i1 = i0 + 1;
    cs[static_cast<size_t>(o)] = {std::clamp<int64_t>(i0, 0, in - 1),
                                  std::clamp<int64_t>(i1, 0, in - 1), w};
  }
  return cs;
}

}  // namespace

Tensor bilinear_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  check_4d(x, "bilinear_resize");
  if (out_h <= 0 || out_w <= 0) throw ShapeError("bilinear_resize: bad target size");
  int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  auto ys = linear_coefs(h, out_h);
  auto xs = linear_coefs(w, out_w);
  Tensor out(Shape{x.dim(0), x.dim(1), out_h, out_w});
  for (int64_t pl = 0; pl < planes; ++pl) {
    const double* in = x.data() + pl * h * w;
    double* o = out.data() + pl * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy) {
      const LinCoef& cy = ys[static_cast<size_t>(oy)];
      for (int64_t ox = 0; ox < out_w; ++ox) {
        const LinCoef& cx = xs[static_cast<size_t>(ox)];
        double top = in[cy.i0 * w + cx.i0] * (1.0 - cx.w1) + in[cy.i0 * w + cx.i1] * cx.w1;
        double bot = in[cy.i1 * w + cx.i0] * (1.0 - cx.w1) + in[cy.i1 * w + cx.i1] * cx.w1;
        o[oy * out_w + ox] = top * (1.0 - cy.w1) + bot * cy.w1;
      }
    }
  }
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, planes, h, w, out_h, out_w, ys, xs](TensorImpl& self) {
      ix->ensure_grad();
      for (int64_t pl = 0; pl < planes; ++pl) {
        const double* g = self.grad.data() + pl * out_h * out_w;
        double* gx = ix->grad.data() + pl * h * w;
        for (int64_t oy = 0; oy < out_h; ++oy) {
          const LinCoef& cy = ys[static_cast<size_t>(oy)];
          for (int64_t ox = 0; ox < out_w; ++ox) {
            const LinCoef& cx = xs[static_cast<size_t>(ox)];
            double gv = g[oy * out_w + ox];
            gx[cy.i0 * w + cx.i0] += gv * (1.0 - cy.w1) * (1.0 - cx.w1);
            gx[cy.i0 * w + cx.i1] += gv * (1.0 - cy.w1) * cx.w1;
            gx[cy.i1 * w + cx.i0] += gv * cy.w1 * (1.0 - cx.w1);
            gx[cy.i1 * w + cx.i1] += gv * cy.w1 * cx.w1;
          }
        }
      }
    };
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions

Tensor sum_per_image(const Tensor& x) {
  int64_t bsz = x.dim(0);
  int64_t per = x.numel() / bsz;
  Tensor out(Shape{bsz});
  for (int64_t b = 0; b < bsz; ++b) {
    double acc = 0.0;
    const double* p = x.data() + b * per;
    for (int64_t i = 0; i < per; ++i) acc += p[i];
    out.data()[b] = acc;
  }
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix, bsz, per](TensorImpl& self) {
      ix->ensure_grad();
      for (int64_t b = 0; b < bsz; ++b) {
        double gv = self.grad[static_cast<size_t>(b)];
        double* gx = ix->grad.data() + b * per;
        for (int64_t i = 0; i < per; ++i) gx[i] += gv;
      }
    };
  }
  return out;
}

Tensor sum_all(const Tensor& x) {
  Tensor out(Shape{1});
  double acc = 0.0;
  for (int64_t i = 0, n = x.numel(); i < n; ++i) acc += x.data()[i];
  out.data()[0] = acc;
  if (track({&x})) {
    auto ix = x.impl();
    out.impl()->parents = {ix};
    out.impl()->backward_fn = [ix](TensorImpl& self) {
      ix->ensure_grad();
      double gv = self.grad[0];
      for (size_t i = 0; i < ix->grad.size(); ++i) ix->grad[i] += gv;
    };
  }
  return out;
}

Tensor mean_all(const Tensor& x) {
  return mul_scalar(sum_all(x), 1.0 / static_cast<double>(x.numel()));
}

// ---------------------------------------------------------------------------
// Graph-free utilities

Tensor avg_pool_same(const Tensor& x, int k) {
  check_4d(x, "avg_pool_same");
  if (k < 1 || k % 2 == 0) throw ConfigError("avg_pool_same: kernel must be odd and >= 1");
  int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  int64_t half = k / 2;
  Tensor out(x.shape());
  std::vector<double> sat(static_cast<size_t>((h + 1) * (w + 1)));
  for (int64_t pl = 0; pl < planes; ++pl) {
    const double* in = x.data() + pl * h * w;
    double* o = out.data() + pl * h * w;
    for (int64_t j = 0; j <= w; ++j) sat[static_cast<size_t>(j)] = 0.0;
    for (int64_t i = 0; i < h; ++i) {
      sat[static_cast<size_t>((i + 1) * (w + 1))] = 0.0;
      for (int64_t j = 0; j < w; ++j)
        sat[static_cast<size_t>((i + 1) * (w + 1) + j + 1)] =
            in[i * w + j] + sat[static_cast<size_t>(i * (w + 1) + j + 1)] +
            sat[static_cast<size_t>((i + 1) * (w + 1) + j)] -
            sat[static_cast<size_t>(i * (w + 1) + j)];
    }
    for (int64_t y = 0; y < h; ++y) {
      int64_t y0 = std::max<int64_t>(0, y - half), y1 = std::min<int64_t>(h - 1, y + half);
      for (int64_t xx = 0; xx < w; ++xx) {
        int64_t x0 = std::max<int64_t>(0, xx - half), x1 = std::min<int64_t>(w - 1, xx + half);
        double sum = sat[static_cast<size_t>((y1 + 1) * (w + 1) + x1 + 1)] -
                     sat[static_cast<size_t>(y0 * (w + 1) + x1 + 1)] -
                     sat[static_cast<size_t>((y1 + 1) * (w + 1) + x0)] +
                     sat[static_cast<size_t>(y0 * (w + 1) + x0)];
        o[y * w + xx] = sum / static_cast<double>((y1 - y0 + 1) * (x1 - x0 + 1));
      }
    }
  }
  return out;
}

Tensor nearest_resize(const Tensor& x, int64_t out_h, int64_t out_w) {
  check_4d(x, "nearest_resize");
  int64_t planes = x.dim(0) * x.dim(1), h = x.dim(2), w = x.dim(3);
  double sy = static_cast<double>(h) / static_cast<double>(out_h);
  double sx = static_cast<double>(w) / static_cast<double>(out_w);
  Tensor out(Shape{x.dim(0), x.dim(1), out_h, out_w});
  std::vector<int64_t> ys(static_cast<size_t>(out_h)), xs(static_cast<size_t>(out_w));
  for (int64_t o = 0; o < out_h; ++o)
    ys[static_cast<size_t>(o)] = std::min<int64_t>(
        h - 1, static_cast<int64_t>(std::floor((static_cast<double>(o) + 0.5) * sy)));
  for (int64_t o = 0; o < out_w; ++o)
    xs[static_cast<size_t>(o)] = std::min<int64_t>(
        w - 1, static_cast<int64_t>(std::floor((static_cast<double>(o) + 0.5) * sx)));
  for (int64_t pl = 0; pl < planes; ++pl) {
    const double* in = x.data() + pl * h * w;
    double* o = out.data() + pl * out_h * out_w;
    for (int64_t oy = 0; oy < out_h; ++oy)
      for (int64_t ox = 0; ox < out_w; ++ox)
        o[oy * out_w + ox] = in[ys[static_cast<size_t>(oy)] * w + xs[static_cast<size_t>(ox)]];
  }
  return out;
}

namespace {

inline double cubic_weight(double t) {
  constexpr double a = -0.75;
  double at = std::abs(t);
  if (at <= 1.0) return ((a + 2.0) * at - (a + 3.0)) * at * at + 1.0;
  if (at < 2.0) return (((at - 5.0) * at + 8.0) * at - 4.0) * a;
  return 0.0;
}

}  // namespace

std::vector<double> bicubic_resize_plane(const std::vector<double>& src, int64_t h,
                                         int64_t w, int64_t oh, int64_t ow) {
  std::vector<double> dst(static_cast<size_t>(oh * ow));
  double sy = static_cast<double>(h) / static_cast<double>(oh);
  double sx = static_cast<double>(w) / static_cast<double>(ow);
  auto clampi = [](int64_t v, int64_t hi) { return std::clamp<int64_t>(v, 0, hi); };
  for (int64_t oy = 0; oy < oh; ++oy) {
    double fy = (static_cast<double>(oy) + 0.5) * sy - 0.5;
    int64_t y0 = static_cast<int64_t>(std::floor(fy));
    double ty = fy - static_cast<double>(y0);
    double wy[4] = {cubic_weight(ty + 1.0), cubic_weight(ty), cubic_weight(1.0 - ty),
                    cubic_weight(2.0 - ty)};
    for (int64_t ox = 0; ox < ow; ++ox) {
      double fx = (static_cast<double>(ox) + 0.5) * sx - 0.5;
      int64_t x0 = static_cast<int64_t>(std::floor(fx));
      double tx = fx - static_cast<double>(x0);
      double wx[4] = {cubic_weight(tx + 1.0), cubic_weight(tx), cubic_weight(1.0 - tx),
                      cubic_weight(2.0 - tx)};
      double acc = 0.0;
      for (int i = 0; i < 4; ++i) {
        int64_t yy = clampi(y0 - 1 + i, h - 1);
        double row = 0.0;
        for (int j = 0; j < 4; ++j) {
          int64_t xxn = clampi(x0 - 1 + j, w - 1);
          row += src[static_cast<size_t>(yy * w + xxn)] * wx[j];
        }
        acc += row * wy[i];
      }
      dst[static_cast<size_t>(oy * ow + ox)] = acc;
    }
  }
  return dst;
}

}  // namespace sam3unet
