#pragma once

#include <concepts>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace irisnet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape) noexcept;
std::string shape_str(const Shape& shape);

template <std::floating_point T>
class BasicTensor;

namespace detail {

template <std::floating_point T>
struct TensorImpl;

template <std::floating_point T>
using ImplPtr = std::shared_ptr<TensorImpl<T>>;

// One recorded operation. `apply` reads the output gradient from `out.grad`
// and accumulates into the gradient buffers of those inputs that require it.
template <std::floating_point T>
struct GradNode {
  using BackwardFn = std::function<void(const TensorImpl<T>& out, const std::vector<ImplPtr<T>>& inputs)>;

  std::uint64_t seq = 0;
  std::vector<ImplPtr<T>> inputs;
  BackwardFn apply;
};

template <std::floating_point T>
struct TensorImpl {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::shared_ptr<GradNode<T>> node;

  // Zero-filled on first use.
  std::span<T> grad_buffer() {
    if (grad.empty()) grad.assign(data.size(), T(0));
    return grad;
  }
};

// Monotonic creation counter; a node's inputs always carry smaller values,
// which gives a topological order by construction.
std::uint64_t next_node_seq() noexcept;

}  // namespace detail

// Disables graph recording on the current thread for the guard's lifetime.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_mode_enabled() noexcept;

// Dense row-major n-dimensional array with reverse-mode autodiff support.
// Copies are shallow handles onto the same storage; use detach() for a copy.
template <std::floating_point T>
class BasicTensor {
 public:
  using value_type = T;
  using BackwardFn = typename detail::GradNode<T>::BackwardFn;

  BasicTensor() = default;
  // Throws ShapeMismatch if product(shape) != data.size() or any extent is 0.
  BasicTensor(Shape shape, std::vector<T> data, bool requires_grad = false);

  static BasicTensor zeros(Shape shape, bool requires_grad = false);
  static BasicTensor full(Shape shape, T value, bool requires_grad = false);
  static BasicTensor scalar(T value, bool requires_grad = false);

  // Records an op result. The node is only attached when grad mode is on and
  // at least one input requires a gradient.
  static BasicTensor from_op(Shape shape, std::vector<T> data, std::initializer_list<BasicTensor> inputs,
                             BackwardFn backward);

  bool defined() const noexcept { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // In-place writes bypass the graph; intended for leaves (optimizer updates,
  // running statistics, initialization).
  std::span<T> mutable_data() { return impl_->data; }
  std::vector<T> to_vector() const { return impl_->data; }
  T item() const;

  bool requires_grad() const { return impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool value);
  bool is_leaf() const { return impl_->node == nullptr; }

  bool has_grad() const { return !impl_->grad.empty(); }
  // Empty span when no gradient has been accumulated yet.
  std::span<const T> grad() const { return impl_->grad; }
  void zero_grad() { impl_->grad.clear(); }

  // Accumulates d(this)/d(leaf) into every reachable leaf that requires a
  // gradient. Throws NotScalar unless numel() == 1.
  void backward() const;

  BasicTensor detach() const;

  template <std::floating_point U>
  BasicTensor<U> cast() const {
    std::vector<U> out(impl_->data.begin(), impl_->data.end());
    return BasicTensor<U>(impl_->shape, std::move(out), impl_->requires_grad && is_leaf());
  }

  detail::TensorImpl<T>& impl() const { return *impl_; }
  const detail::ImplPtr<T>& impl_ptr() const { return impl_; }

 private:
  explicit BasicTensor(detail::ImplPtr<T> impl) : impl_(std::move(impl)) {}

  detail::ImplPtr<T> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

extern template class BasicTensor<float>;
extern template class BasicTensor<double>;

}  // namespace irisnet
