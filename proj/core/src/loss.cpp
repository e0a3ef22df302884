#include "irisnet/loss.hpp"

#include <algorithm>
#include <cmath>

#include "irisnet/error.hpp"
#include "irisnet/ops.hpp"

namespace irisnet {

template <std::floating_point T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    raise(ErrorCode::kShapeMismatch, "cross_entropy: logits " + shape_str(logits.shape()) + " vs " +
                                         std::to_string(labels.size()) + " labels");
  }
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  for (const auto label : labels) {
    if (label >= n) {
      raise(ErrorCode::kLabelOutOfRange, "label " + std::to_string(label) + " not in [0," + std::to_string(n) + ")");
    }
  }
  const auto z = logits.data();
  std::vector<T> probs(b * n);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    const T* row = z.data() + i * n;
    const double mx = static_cast<double>(*std::max_element(row, row + n));
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += std::exp(static_cast<double>(row[j]) - mx);
    const double lse = mx + std::log(s);
    total += lse - static_cast<double>(row[labels[i]]);
    for (std::size_t j = 0; j < n; ++j) probs[i * n + j] = static_cast<T>(std::exp(static_cast<double>(row[j]) - lse));
  }
  std::vector<std::size_t> saved(labels.begin(), labels.end());
  return BasicTensor<T>::from_op(
      Shape{1}, std::vector<T>{static_cast<T>(total / static_cast<double>(b))}, {logits},
      [b, n, probs = std::move(probs), saved = std::move(saved)](const detail::TensorImpl<T>& o,
                                                                 const std::vector<detail::ImplPtr<T>>& in) {
        auto gx = in[0]->grad_buffer();
        const double scale = static_cast<double>(o.grad[0]) / static_cast<double>(b);
        for (std::size_t i = 0; i < b; ++i) {
          for (std::size_t j = 0; j < n; ++j) {
            const double onehot = j == saved[i] ? 1.0 : 0.0;
            gx[i * n + j] += static_cast<T>(scale * (static_cast<double>(probs[i * n + j]) - onehot));
          }
        }
      });
}

template <std::floating_point T>
BasicTensor<T> final_loss(const BasicTensor<T>& logits, std::span<const std::size_t> labels,
                          const BasicTensor<T>& head_weight, T lambda1) {
  BasicTensor<T> ce = cross_entropy(logits, labels);
  if (lambda1 == T(0)) return ce;
  return add(ce, scale(sum(mul(head_weight, head_weight)), lambda1));
}

template BasicTensor<float> cross_entropy(const BasicTensor<float>&, std::span<const std::size_t>);
template BasicTensor<double> cross_entropy(const BasicTensor<double>&, std::span<const std::size_t>);
template BasicTensor<float> final_loss(const BasicTensor<float>&, std::span<const std::size_t>,
                                       const BasicTensor<float>&, float);
template BasicTensor<double> final_loss(const BasicTensor<double>&, std::span<const std::size_t>,
                                        const BasicTensor<double>&, double);

}  // namespace irisnet
