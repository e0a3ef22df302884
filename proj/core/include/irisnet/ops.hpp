#pragma once

#include "irisnet/tensor.hpp"

namespace irisnet {

// Elementwise arithmetic. Operands must have equal shapes, or one of them must
// hold a single element (scalar broadcast); anything else is ShapeMismatch.
template <std::floating_point T>
BasicTensor<T> add(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <std::floating_point T>
BasicTensor<T> sub(const BasicTensor<T>& a, const BasicTensor<T>& b);
template <std::floating_point T>
BasicTensor<T> mul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <std::floating_point T>
BasicTensor<T> scale(const BasicTensor<T>& x, T factor);

// Sum / mean of all elements, shape [1].
template <std::floating_point T>
BasicTensor<T> sum(const BasicTensor<T>& x);
template <std::floating_point T>
BasicTensor<T> mean(const BasicTensor<T>& x);

// 2-D matrix product; dA = dC * B^T, dB = A^T * dC.
template <std::floating_point T>
BasicTensor<T> matmul(const BasicTensor<T>& a, const BasicTensor<T>& b);

template <std::floating_point T>
BasicTensor<T> reshape(const BasicTensor<T>& x, Shape shape);

template <std::floating_point T>
BasicTensor<T> operator+(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return add(a, b);
}
template <std::floating_point T>
BasicTensor<T> operator-(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return sub(a, b);
}
template <std::floating_point T>
BasicTensor<T> operator*(const BasicTensor<T>& a, const BasicTensor<T>& b) {
  return mul(a, b);
}

}  // namespace irisnet
