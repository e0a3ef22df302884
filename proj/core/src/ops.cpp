#include "irisnet/ops.hpp"

#include "irisnet/error.hpp"
#include "irisnet/gemm.hpp"

namespace irisnet {

namespace {

enum class BinaryKind { kAdd, kSub, kMul };

template <std::floating_point T>
Shape broadcast_shape(const BasicTensor<T>& a, const BasicTensor<T>& b, const char* op) {
  if (a.shape() == b.shape()) return a.shape();
  if (b.numel() == 1) return a.shape();
  if (a.numel() == 1) return b.shape();
  raise(ErrorCode::kShapeMismatch,
        std::string(op) + ": incompatible shapes " + shape_str(a.shape()) + " and " + shape_str(b.shape()));
}

template <std::floating_point T>
BasicTensor<T> binary(const BasicTensor<T>& a, const BasicTensor<T>& b, BinaryKind kind, const char* name) {
  Shape shape = broadcast_shape(a, b, name);
  const std::size_t n = shape_numel(shape);
  const bool a_scalar = a.numel() != n;
  const bool b_scalar = b.numel() != n;
  const auto ad = a.data();
  const auto bd = b.data();
  std::vector<T> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const T x = ad[a_scalar ? 0 : i];
    const T y = bd[b_scalar ? 0 : i];
    switch (kind) {
      case BinaryKind::kAdd: out[i] = x + y; break;
      case BinaryKind::kSub: out[i] = x - y; break;
      case BinaryKind::kMul: out[i] = x * y; break;
    }
  }
  return BasicTensor<T>::from_op(
      std::move(shape), std::move(out), {a, b},
      [kind, a_scalar, b_scalar](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        const auto& g = o.grad;
        const auto& x = *in[0];
        const auto& y = *in[1];
        const std::size_t count = g.size();
        if (x.requires_grad) {
          auto gx = in[0]->grad_buffer();
          for (std::size_t i = 0; i < count; ++i) {
            T d = g[i];
            if (kind == BinaryKind::kMul) d *= y.data[b_scalar ? 0 : i];
            gx[a_scalar ? 0 : i] += d;
          }
        }
        if (y.requires_grad) {
          auto gy = in[1]->grad_buffer();
          for (std::size_t i = 0; i < count; ++i) {
            T d = g[i];
            if (kind == BinaryKind::kSub) d = -d;
            if (kind == BinaryKind::kMul) d *= x.data[a_scalar ? 0 : i];
            gy[b_scalar ? 0 : i] += d;
          }
        }
      });
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinaryKind::kAdd, "add");
}

template <std::floating_point T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinaryKind::kSub, "sub");
}

template <std::floating_point T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return binary(a, b, BinaryKind::kMul, "mul");
}

template <std::floating_point T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return BasicTensor<T>::from_op(x.shape(), std::move(out), {x},
                                 [factor](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += factor * o.grad[i];
                                 });
}

template <std::floating_point T>
BasicTensor<T> sum(const BasicTensor<T>& x) {
  double acc = 0.0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  return BasicTensor<T>::from_op(Shape{1}, std::vector<T>{static_cast<T>(acc)}, {x},
                                 [](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   const T g = o.grad[0];
                                   for (auto& v : gx) v += g;
                                 });
}

template <std::floating_point T>
BasicTensor<T> mean(const BasicTensor<T>& x) {
  const double n = static_cast<double>(x.numel());
  double acc = 0.0;
  for (const T v : x.data()) acc += static_cast<double>(v);
  return BasicTensor<T>::from_op(Shape{1}, std::vector<T>{static_cast<T>(acc / n)}, {x},
                                 [n](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   const T g = static_cast<T>(o.grad[0] / n);
                                   for (auto& v : gx) v += g;
                                 });
}

template <std::floating_point T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.dim(1) != b.dim(0)) {
    raise(ErrorCode::kShapeMismatch, "matmul: " + shape_str(a.shape()) + " x " + shape_str(b.shape()));
  }
  const std::size_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  std::vector<T> out(m * n);
  detail::gemm(false, false, m, n, k, a.data().data(), b.data().data(), out.data(), false);
  return BasicTensor<T>::from_op(
      Shape{m, n}, std::move(out), {a, b},
      [m, n, k](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        if (in[0]->requires_grad) {
          detail::gemm(false, true, m, k, n, o.grad.data(), in[1]->data.data(), in[0]->grad_buffer().data(), true);
        }
        if (in[1]->requires_grad) {
          detail::gemm(true, false, k, n, m, in[0]->data.data(), o.grad.data(), in[1]->grad_buffer().data(), true);
        }
      });
}

template <std::floating_point T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) {
    raise(ErrorCode::kShapeMismatch, "reshape " + shape_str(x.shape()) + " -> " + shape_str(shape));
  }
  return BasicTensor<T>::from_op(std::move(shape), x.to_vector(), {x},
                                 [](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
                                   auto gx = in[0]->grad_buffer();
                                   for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
                                 });
}

#define IRISNET_INSTANTIATE_OPS(T)                                           \
  template BasicTensor<T> add(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> sub(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> mul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> scale(const BasicTensor<T>&, T);                   \
  template BasicTensor<T> sum(const BasicTensor<T>&);                        \
  template BasicTensor<T> mean(const BasicTensor<T>&);                       \
  template BasicTensor<T> matmul(const BasicTensor<T>&, const BasicTensor<T>&); \
  template BasicTensor<T> reshape(const BasicTensor<T>&, Shape);

IRISNET_INSTANTIATE_OPS(float)
IRISNET_INSTANTIATE_OPS(double)

}  // namespace irisnet
