#include "irisnet/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <sstream>
#include <unordered_set>

#include "irisnet/error.hpp"

namespace irisnet {

namespace {
thread_local bool t_grad_enabled = true;
std::atomic<std::uint64_t> g_node_seq{0};
}  // namespace

std::size_t shape_numel(const Shape& shape) noexcept {
  std::size_t n = 1;
  for (const auto d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

namespace detail {
std::uint64_t next_node_seq() noexcept { return g_node_seq.fetch_add(1, std::memory_order_relaxed) + 1; }
}  // namespace detail

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }
bool grad_mode_enabled() noexcept { return t_grad_enabled; }

template <std::floating_point T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> data, bool requires_grad) {
  if (shape.empty()) raise(ErrorCode::kShapeMismatch, "tensor shape must have at least one axis");
  for (const auto d : shape) {
    if (d == 0) raise(ErrorCode::kShapeMismatch, "tensor extents must be >= 1, got " + shape_str(shape));
  }
  if (shape_numel(shape) != data.size()) {
    raise(ErrorCode::kShapeMismatch,
          "shape " + shape_str(shape) + " needs " + std::to_string(shape_numel(shape)) + " values, got " +
              std::to_string(data.size()));
  }
  impl_ = std::make_shared<detail::TensorImpl<T>>();
  impl_->shape = std::move(shape);
  impl_->data = std::move(data);
  impl_->requires_grad = requires_grad;
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::zeros(Shape shape, bool requires_grad) {
  return full(std::move(shape), T(0), requires_grad);
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::full(Shape shape, T value, bool requires_grad) {
  const auto n = shape_numel(shape);
  return BasicTensor(std::move(shape), std::vector<T>(n, value), requires_grad);
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::scalar(T value, bool requires_grad) {
  return BasicTensor(Shape{1}, std::vector<T>{value}, requires_grad);
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::from_op(Shape shape, std::vector<T> data, std::initializer_list<BasicTensor> inputs,
                                       BackwardFn backward) {
  BasicTensor out(std::move(shape), std::move(data));
  if (!t_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const BasicTensor& t) { return t.defined() && t.requires_grad(); });
  if (!any) return out;
  auto node = std::make_shared<detail::GradNode<T>>();
  node->seq = detail::next_node_seq();
  node->inputs.reserve(inputs.size());
  for (const auto& t : inputs) node->inputs.push_back(t.impl_);
  node->apply = std::move(backward);
  out.impl_->node = std::move(node);
  out.impl_->requires_grad = true;
  return out;
}

template <std::floating_point T>
T BasicTensor<T>::item() const {
  if (numel() != 1) raise(ErrorCode::kNotScalar, "item() on tensor of shape " + shape_str(shape()));
  return impl_->data[0];
}

template <std::floating_point T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool value) {
  impl_->requires_grad = value;
  return *this;
}

template <std::floating_point T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(impl_->shape, impl_->data, false);
}

template <std::floating_point T>
void BasicTensor<T>::backward() const {
  if (numel() != 1) raise(ErrorCode::kNotScalar, "backward() needs a one-element loss, got " + shape_str(shape()));
  if (!impl_->requires_grad) return;

  // Gather every recorded node reachable from the loss.
  std::vector<detail::TensorImpl<T>*> order;
  std::unordered_set<const detail::TensorImpl<T>*> seen;
  std::vector<detail::TensorImpl<T>*> stack{impl_.get()};
  while (!stack.empty()) {
    auto* cur = stack.back();
    stack.pop_back();
    if (!cur->node || !seen.insert(cur).second) continue;
    order.push_back(cur);
    for (const auto& in : cur->node->inputs) {
      if (in->requires_grad && in->node) stack.push_back(in.get());
    }
  }
  std::sort(order.begin(), order.end(), [](const auto* a, const auto* b) { return a->node->seq > b->node->seq; });

  impl_->grad_buffer()[0] += T(1);
  for (auto* cur : order) {
    cur->grad_buffer();
    cur->node->apply(*cur, cur->node->inputs);
    if (cur != impl_.get()) {
      cur->grad.clear();
      cur->grad.shrink_to_fit();
    }
  }
}

template class BasicTensor<float>;
template class BasicTensor<double>;

}  // namespace irisnet
