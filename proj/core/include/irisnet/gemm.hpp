#pragma once

#include <concepts>
#include <cstddef>

namespace irisnet::detail {

// C[m x n] = op(A) * op(B)   (or += when accumulate is set), all row-major.
// op(A) is m x k: A is stored m x k, or k x m when trans_a.
// op(B) is k x n: B is stored k x n, or n x k when trans_b.
// Each output element sums its k products in increasing k order regardless of
// matrix sizes, so results do not depend on how rows are batched together.
template <std::floating_point T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
          bool accumulate);

// out[cols x rows] = in[rows x cols]^T
template <std::floating_point T>
void transpose(const T* in, std::size_t rows, std::size_t cols, T* out);

}  // namespace irisnet::detail
