#pragma once

#include <cstddef>
#include <span>

#include "irisnet/tensor.hpp"

namespace irisnet {

// Mean over the batch of -log softmax(logits)[label], via log-sum-exp.
// Throws LabelOutOfRange for labels outside [0, n).
template <std::floating_point T>
BasicTensor<T> cross_entropy(const BasicTensor<T>& logits, std::span<const std::size_t> labels);

// cross_entropy + lambda1 * ||head_weight||_F^2. Only the classifier head
// weight is penalized.
template <std::floating_point T>
BasicTensor<T> final_loss(const BasicTensor<T>& logits, std::span<const std::size_t> labels,
                          const BasicTensor<T>& head_weight, T lambda1);

}  // namespace irisnet
