#pragma once

// Dense row-major f64 tensor with tape-free reverse-mode autodiff: every
// result produced while gradients are enabled keeps its parents and a
// closure that pushes its gradient back into them.

#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "sainet/common.hpp"

namespace sainet {

using Shape = std::vector<std::size_t>;

inline std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

inline std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

class Tensor;

namespace detail {

struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;  // empty until something accumulates into it
  bool requires_grad = false;
  std::vector<Tensor> parents;
  std::function<void(TensorImpl&)> backward;  // empty for leaves
};

inline bool& grad_enabled() {
  thread_local bool enabled = true;
  return enabled;
}

}  // namespace detail

/// Disables graph construction in the current thread for its lifetime.
class NoGradGuard {
 public:
  NoGradGuard() : previous_(detail::grad_enabled()) { detail::grad_enabled() = false; }
  ~NoGradGuard() { detail::grad_enabled() = previous_; }
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

  static Tensor from_data(Shape shape, std::vector<double> data, bool requires_grad = false) {
    require(shape_numel(shape) == data.size(),
            "tensor data length " + std::to_string(data.size()) + " does not match shape " +
                shape_str(shape));
    auto impl = std::make_shared<detail::TensorImpl>();
    impl->shape = std::move(shape);
    impl->data = std::move(data);
    impl->requires_grad = requires_grad;
    return Tensor(std::move(impl));
  }

  static Tensor full(Shape shape, double value, bool requires_grad = false) {
    const std::size_t n = shape_numel(shape);
    return from_data(std::move(shape), std::vector<double>(n, value), requires_grad);
  }

  static Tensor zeros(Shape shape, bool requires_grad = false) {
    return full(std::move(shape), 0.0, requires_grad);
  }

  static Tensor scalar(double value, bool requires_grad = false) {
    return from_data({}, {value}, requires_grad);
  }

  bool defined() const { return static_cast<bool>(impl_); }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t i) const {
    require(i < rank(), "dimension index out of range for shape " + shape_str(shape()));
    return impl_->shape[i];
  }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const double> data() const { return impl_->data; }
  /// Direct write access; intended for leaves (parameters, inputs).
  std::span<double> mutable_data() { return impl_->data; }
  const std::vector<double>& vec() const { return impl_->data; }

  double operator[](std::size_t i) const { return impl_->data[i]; }
  double item() const {
    require(numel() == 1, "item() on tensor of shape " + shape_str(shape()));
    return impl_->data[0];
  }

  bool requires_grad() const { return impl_->requires_grad; }
  Tensor& set_requires_grad(bool value) {
    require(is_leaf(), "requires_grad can only be toggled on leaf tensors");
    impl_->requires_grad = value;
    return *this;
  }
  bool is_leaf() const { return !impl_->backward; }

  bool has_grad() const { return !impl_->grad.empty(); }
  std::span<const double> grad() const {
    require(has_grad(), "tensor has no gradient");
    return impl_->grad;
  }
  std::span<double> mutable_grad() { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  /// Same values, cut from the graph.
  Tensor detach() const { return from_data(shape(), impl_->data, false); }

  /// Copy of the values as a fresh leaf.
  Tensor clone(bool requires_grad = false) const {
    return from_data(shape(), impl_->data, requires_grad);
  }

  detail::TensorImpl* impl() const { return impl_.get(); }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

namespace detail {

/// Builds an op result. The graph edge is only recorded when some parent
/// needs a gradient and grad mode is on.
inline Tensor make_result(Shape shape, std::vector<double> data, std::vector<Tensor> parents,
                          std::function<void(TensorImpl&)> backward) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  bool needs = false;
  if (grad_enabled())
    for (const auto& p : parents) needs = needs || p.requires_grad();
  if (needs) {
    impl->requires_grad = true;
    impl->parents = std::move(parents);
    impl->backward = std::move(backward);
  }
  return Tensor(std::move(impl));
}

/// Gradient buffer of t, allocated on first use. nullptr if t needs none.
inline double* grad_of(const Tensor& t) {
  TensorImpl* impl = t.impl();
  if (!impl->requires_grad) return nullptr;
  if (impl->grad.empty()) impl->grad.assign(impl->data.size(), 0.0);
  return impl->grad.data();
}

}  // namespace detail

inline void check_finite(const Tensor& t, const std::string& what) {
  for (double v : t.data())
    if (!std::isfinite(v)) throw NumericError("non-finite value in " + what);
}

/// Accumulates d(loss)/d(leaf) into every leaf that requires a gradient.
/// Leaf gradients accumulate across calls; call zero_grad() to reset them.
inline void backward(const Tensor& loss) {
  require(loss.defined() && loss.numel() == 1,
          "backward() needs a scalar loss, got shape " +
              (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  require(loss.requires_grad(), "backward() on a tensor that does not require grad");
  if (!std::isfinite(loss.item())) throw NumericError("non-finite loss in backward()");

  using detail::TensorImpl;
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  std::vector<std::pair<TensorImpl*, std::size_t>> stack;
  stack.emplace_back(loss.impl(), 0);
  visited.insert(loss.impl());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      TensorImpl* parent = node->parents[next++].impl();
      if (parent->requires_grad && visited.insert(parent).second) stack.emplace_back(parent, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (TensorImpl* node : order)
    if (node->backward) node->grad.assign(node->data.size(), 0.0);
  if (loss.impl()->grad.empty()) loss.impl()->grad.assign(1, 0.0);
  loss.impl()->grad[0] += 1.0;

  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward) (*it)->backward(**it);
  for (TensorImpl* node : order)
    if (node->backward) std::vector<double>().swap(node->grad);
}

// ---------------------------------------------------------------------------
// Elementwise and reduction ops
// ---------------------------------------------------------------------------

namespace detail {

/// Strides of `shape` viewed inside `out` (same rank), 0 on broadcast dims.
inline std::vector<std::size_t> broadcast_strides(const Shape& shape, const Shape& out) {
  std::vector<std::size_t> strides(out.size(), 0);
  std::size_t s = 1;
  for (std::size_t d = out.size(); d-- > 0;) {
    strides[d] = shape[d] == 1 && out[d] != 1 ? 0 : s;
    s *= shape[d];
  }
  return strides;
}

inline Shape broadcast_shape(const Shape& a, const Shape& b) {
  require(a.size() == b.size(),
          "broadcast needs equal ranks, got " + shape_str(a) + " and " + shape_str(b));
  Shape out(a.size());
  for (std::size_t d = 0; d < a.size(); ++d) {
    require(a[d] == b[d] || a[d] == 1 || b[d] == 1,
            "shape mismatch " + shape_str(a) + " vs " + shape_str(b));
    out[d] = std::max(a[d], b[d]);
  }
  return out;
}

/// Calls fn(out_index, a_index, b_index) over the broadcast iteration space.
template <typename Fn>
void for_each_broadcast(const Shape& out, const std::vector<std::size_t>& sa,
                        const std::vector<std::size_t>& sb, Fn&& fn) {
  const std::size_t n = shape_numel(out);
  const std::size_t rank = out.size();
  std::vector<std::size_t> idx(rank, 0);
  std::size_t ia = 0, ib = 0;
  for (std::size_t o = 0; o < n; ++o) {
    fn(o, ia, ib);
    for (std::size_t d = rank; d-- > 0;) {
      if (++idx[d] < out[d]) {
        ia += sa[d];
        ib += sb[d];
        break;
      }
      ia -= sa[d] * (out[d] - 1);
      ib -= sb[d] * (out[d] - 1);
      idx[d] = 0;
    }
  }
}

/// Binary op with broadcasting. fwd(x, y) -> z; dfa/dfb(x, y, z) -> partials.
template <typename Fwd, typename DA, typename DB>
Tensor binary_op(const Tensor& a, const Tensor& b, Fwd fwd, DA dfa, DB dfb) {
  if (a.shape() == b.shape()) {
    const std::size_t n = a.numel();
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a[i], b[i]);
    return make_result(a.shape(), std::move(out), {a, b}, [a, b, dfa, dfb](TensorImpl& self) {
      double* ga = grad_of(a);
      double* gb = grad_of(b);
      for (std::size_t i = 0; i < self.data.size(); ++i) {
        const double g = self.grad[i];
        if (ga) ga[i] += g * dfa(a[i], b[i], self.data[i]);
        if (gb) gb[i] += g * dfb(a[i], b[i], self.data[i]);
      }
    });
  }
  Shape out_shape = broadcast_shape(a.shape(), b.shape());
  auto sa = broadcast_strides(a.shape(), out_shape);
  auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<double> out(shape_numel(out_shape));
  for_each_broadcast(out_shape, sa, sb,
                     [&](std::size_t o, std::size_t ia, std::size_t ib) { out[o] = fwd(a[ia], b[ib]); });
  return make_result(out_shape, std::move(out), {a, b},
                     [a, b, dfa, dfb, out_shape, sa, sb](TensorImpl& self) {
                       double* ga = grad_of(a);
                       double* gb = grad_of(b);
                       for_each_broadcast(out_shape, sa, sb,
                                          [&](std::size_t o, std::size_t ia, std::size_t ib) {
                                            const double g = self.grad[o];
                                            const double z = self.data[o];
                                            if (ga) ga[ia] += g * dfa(a[ia], b[ib], z);
                                            if (gb) gb[ib] += g * dfb(a[ia], b[ib], z);
                                          });
                     });
}

/// Unary op; dfx(x, y) -> dy/dx.
template <typename Fwd, typename DX>
Tensor unary_op(const Tensor& a, Fwd fwd, DX dfx) {
  const std::size_t n = a.numel();
  std::vector<double> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = fwd(a[i]);
  return make_result(a.shape(), std::move(out), {a}, [a, dfx](TensorImpl& self) {
    double* ga = grad_of(a);
    if (!ga) return;
    for (std::size_t i = 0; i < self.data.size(); ++i) ga[i] += self.grad[i] * dfx(a[i], self.data[i]);
  });
}

inline double sign(double x) { return x > 0.0 ? 1.0 : (x < 0.0 ? -1.0 : 0.0); }

}  // namespace detail

inline Tensor add(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, [](double x, double y) { return x + y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return 1.0; });
}

inline Tensor sub(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, [](double x, double y) { return x - y; }, [](double, double, double) { return 1.0; },
      [](double, double, double) { return -1.0; });
}

/// Hadamard product (with same-rank broadcasting, e.g. [N,1,H,W] masks).
inline Tensor mul(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, [](double x, double y) { return x * y; }, [](double, double y, double) { return y; },
      [](double x, double, double) { return x; });
}

inline Tensor div(const Tensor& a, const Tensor& b) {
  return detail::binary_op(
      a, b, [](double x, double y) { return x / y; },
      [](double, double y, double) { return 1.0 / y; },
      [](double x, double y, double) { return -x / (y * y); });
}

inline Tensor scale(const Tensor& a, double s) {
  return detail::unary_op(a, [s](double x) { return x * s; }, [s](double, double) { return s; });
}

inline Tensor add_scalar(const Tensor& a, double s) {
  return detail::unary_op(a, [s](double x) { return x + s; }, [](double, double) { return 1.0; });
}

/// 1 - a, used for mask complements.
inline Tensor one_minus(const Tensor& a) {
  return detail::unary_op(a, [](double x) { return 1.0 - x; }, [](double, double) { return -1.0; });
}

inline Tensor abs(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return std::abs(x); }, [](double x, double) { return detail::sign(x); });
}

inline Tensor relu(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return x > 0.0 ? x : 0.0; },
      [](double x, double) { return x > 0.0 ? 1.0 : 0.0; });
}

inline Tensor leaky_relu(const Tensor& a, double slope) {
  return detail::unary_op(
      a, [slope](double x) { return x > 0.0 ? x : slope * x; },
      [slope](double x, double) { return x > 0.0 ? 1.0 : slope; });
}

inline Tensor sigmoid(const Tensor& a) {
  return detail::unary_op(
      a, [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
      [](double, double y) { return y * (1.0 - y); });
}

/// max(a, floor) elementwise; gradient passes only where a > floor.
inline Tensor clamp_min(const Tensor& a, double floor) {
  return detail::unary_op(
      a, [floor](double x) { return x > floor ? x : floor; },
      [floor](double x, double) { return x > floor ? 1.0 : 0.0; });
}

inline Tensor sum(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += v;
  return detail::make_result({}, {total}, {a}, [a](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    if (!ga) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g;
  });
}

inline Tensor mean(const Tensor& a) {
  require(a.numel() > 0, "mean of empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.numel()));
}

/// Entrywise 1-norm: sum of absolute values.
inline Tensor l1_norm(const Tensor& a) {
  double total = 0.0;
  for (double v : a.data()) total += std::abs(v);
  return detail::make_result({}, {total}, {a}, [a](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    if (!ga) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g * detail::sign(a[i]);
  });
}

inline Tensor frobenius_norm(const Tensor& a) {
  double ss = 0.0;
  for (double v : a.data()) ss += v * v;
  const double norm = std::sqrt(ss);
  return detail::make_result({}, {norm}, {a}, [a, norm](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    if (!ga || norm == 0.0) return;
    const double g = self.grad[0] / norm;
    for (std::size_t i = 0; i < a.numel(); ++i) ga[i] += g * a[i];
  });
}

/// Same data, new shape.
inline Tensor reshape(const Tensor& a, Shape shape) {
  require(shape_numel(shape) == a.numel(),
          "cannot reshape " + shape_str(a.shape()) + " to " + shape_str(shape));
  return detail::make_result(std::move(shape), a.vec(), {a}, [a](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    if (!ga) return;
    for (std::size_t i = 0; i < self.data.size(); ++i) ga[i] += self.grad[i];
  });
}

/// [M,K] x [K,N] -> [M,N].
inline Tensor matmul(const Tensor& a, const Tensor& b) {
  require(a.rank() == 2 && b.rank() == 2 && a.dim(1) == b.dim(0),
          "matmul shape mismatch " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<double> out(m * n, 0.0);
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t p = 0; p < k; ++p) {
      const double av = a[i * k + p];
      for (std::size_t j = 0; j < n; ++j) out[i * n + j] += av * b[p * n + j];
    }
  return detail::make_result({m, n}, std::move(out), {a, b}, [a, b, m, k, n](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    double* gb = detail::grad_of(b);
    const auto& g = self.grad;
    if (ga)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          double acc = 0.0;
          for (std::size_t j = 0; j < n; ++j) acc += g[i * n + j] * b[p * n + j];
          ga[i * k + p] += acc;
        }
    if (gb)
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t p = 0; p < k; ++p) {
          const double av = a[i * k + p];
          for (std::size_t j = 0; j < n; ++j) gb[p * n + j] += av * g[i * n + j];
        }
  });
}

inline Tensor transpose2d(const Tensor& a) {
  require(a.rank() == 2, "transpose2d needs a matrix, got " + shape_str(a.shape()));
  const std::size_t r = a.dim(0), c = a.dim(1);
  std::vector<double> out(r * c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) out[j * r + i] = a[i * c + j];
  return detail::make_result({c, r}, std::move(out), {a}, [a, r, c](detail::TensorImpl& self) {
    double* ga = detail::grad_of(a);
    if (!ga) return;
    for (std::size_t i = 0; i < r; ++i)
      for (std::size_t j = 0; j < c; ++j) ga[i * c + j] += self.grad[j * r + i];
  });
}

/// Nearest-neighbour 2x upsampling of an [N,C,H,W] tensor.
inline Tensor upsample_nearest_2x(const Tensor& a) {
  require(a.rank() == 4, "upsample_nearest_2x expects [N,C,H,W], got " + shape_str(a.shape()));
  const std::size_t planes = a.dim(0) * a.dim(1), h = a.dim(2), w = a.dim(3);
  const std::size_t oh = 2 * h, ow = 2 * w;
  std::vector<double> out(planes * oh * ow);
  for (std::size_t p = 0; p < planes; ++p)
    for (std::size_t y = 0; y < oh; ++y)
      for (std::size_t x = 0; x < ow; ++x)
        out[(p * oh + y) * ow + x] = a[(p * h + y / 2) * w + x / 2];
  return detail::make_result({a.dim(0), a.dim(1), oh, ow}, std::move(out), {a},
                             [a, planes, h, w, oh, ow](detail::TensorImpl& self) {
                               double* ga = detail::grad_of(a);
                               if (!ga) return;
                               for (std::size_t p = 0; p < planes; ++p)
                                 for (std::size_t y = 0; y < oh; ++y)
                                   for (std::size_t x = 0; x < ow; ++x)
                                     ga[(p * h + y / 2) * w + x / 2] += self.grad[(p * oh + y) * ow + x];
                             });
}

/// Concatenation of [N,Ci,H,W] tensors along the channel axis.
inline Tensor concat_channels(const std::vector<Tensor>& parts) {
  require(!parts.empty(), "concat_channels of nothing");
  const Tensor& first = parts.front();
  require(first.rank() == 4, "concat_channels expects [N,C,H,W] tensors");
  const std::size_t n = first.dim(0), h = first.dim(2), w = first.dim(3);
  std::size_t channels = 0;
  for (const auto& p : parts) {
    require(p.rank() == 4 && p.dim(0) == n && p.dim(2) == h && p.dim(3) == w,
            "concat_channels shape mismatch: " + shape_str(first.shape()) + " vs " +
                shape_str(p.shape()));
    channels += p.dim(1);
  }
  const std::size_t plane = h * w;
  std::vector<double> out(n * channels * plane);
  std::size_t offset = 0;
  for (const auto& p : parts) {
    const std::size_t c = p.dim(1);
    for (std::size_t b = 0; b < n; ++b)
      std::copy_n(p.data().begin() + static_cast<std::ptrdiff_t>(b * c * plane), c * plane,
                  out.begin() + static_cast<std::ptrdiff_t>((b * channels + offset) * plane));
    offset += c;
  }
  return detail::make_result({n, channels, h, w}, std::move(out), parts,
                             [parts, n, channels, plane](detail::TensorImpl& self) {
                               std::size_t off = 0;
                               for (const auto& p : parts) {
                                 const std::size_t c = p.dim(1);
                                 if (double* gp = detail::grad_of(p))
                                   for (std::size_t b = 0; b < n; ++b)
                                     for (std::size_t i = 0; i < c * plane; ++i)
                                       gp[b * c * plane + i] += self.grad[(b * channels + off) * plane + i];
                                 off += c;
                               }
                             });
}

/// Channel slice [begin, end) of an [N,C,H,W] tensor.
inline Tensor slice_channels(const Tensor& a, std::size_t begin, std::size_t end) {
  require(a.rank() == 4 && begin < end && end <= a.dim(1), "slice_channels out of range");
  const std::size_t n = a.dim(0), c = a.dim(1), plane = a.dim(2) * a.dim(3), k = end - begin;
  std::vector<double> out(n * k * plane);
  for (std::size_t b = 0; b < n; ++b)
    std::copy_n(a.data().begin() + static_cast<std::ptrdiff_t>((b * c + begin) * plane), k * plane,
                out.begin() + static_cast<std::ptrdiff_t>(b * k * plane));
  return detail::make_result({n, k, a.dim(2), a.dim(3)}, std::move(out), {a},
                             [a, n, c, plane, begin, k](detail::TensorImpl& self) {
                               double* ga = detail::grad_of(a);
                               if (!ga) return;
                               for (std::size_t b = 0; b < n; ++b)
                                 for (std::size_t i = 0; i < k * plane; ++i)
                                   ga[(b * c + begin) * plane + i] += self.grad[b * k * plane + i];
                             });
}

/// Weighted sum of scalar tensors.
inline Tensor weighted_sum(const std::vector<Tensor>& terms, const std::vector<double>& weights) {
  require(terms.size() == weights.size() && !terms.empty(), "weighted_sum arity mismatch");
  double total = 0.0;
  for (std::size_t i = 0; i < terms.size(); ++i) {
    require(terms[i].numel() == 1, "weighted_sum expects scalar terms");
    total += weights[i] * terms[i].item();
  }
  return detail::make_result({}, {total}, terms, [terms, weights](detail::TensorImpl& self) {
    for (std::size_t i = 0; i < terms.size(); ++i)
      if (double* g = detail::grad_of(terms[i])) g[0] += self.grad[0] * weights[i];
  });
}

}  // namespace sainet
