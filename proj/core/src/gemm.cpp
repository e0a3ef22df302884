#include "irisnet/gemm.hpp"

#include <algorithm>
#include <vector>

namespace irisnet::detail {

namespace {

constexpr std::size_t kColBlock = 512;

// C += A * B with A m x k, B k x n, all contiguous row-major.
template <std::floating_point T>
void gemm_nn_accumulate(std::size_t m, std::size_t n, std::size_t k, const T* __restrict a, const T* __restrict b,
                        T* __restrict c) {
  for (std::size_t j0 = 0; j0 < n; j0 += kColBlock) {
    const std::size_t width = std::min(kColBlock, n - j0);
    std::size_t i = 0;
    for (; i + 4 <= m; i += 4) {
      T* __restrict c0 = c + (i + 0) * n + j0;
      T* __restrict c1 = c + (i + 1) * n + j0;
      T* __restrict c2 = c + (i + 2) * n + j0;
      T* __restrict c3 = c + (i + 3) * n + j0;
      const T* a0 = a + (i + 0) * k;
      const T* a1 = a + (i + 1) * k;
      const T* a2 = a + (i + 2) * k;
      const T* a3 = a + (i + 3) * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T* __restrict bp = b + p * n + j0;
        const T v0 = a0[p], v1 = a1[p], v2 = a2[p], v3 = a3[p];
        for (std::size_t j = 0; j < width; ++j) {
          const T bv = bp[j];
          c0[j] += v0 * bv;
          c1[j] += v1 * bv;
          c2[j] += v2 * bv;
          c3[j] += v3 * bv;
        }
      }
    }
    for (; i < m; ++i) {
      T* __restrict ci = c + i * n + j0;
      const T* ai = a + i * k;
      for (std::size_t p = 0; p < k; ++p) {
        const T* __restrict bp = b + p * n + j0;
        const T v = ai[p];
        for (std::size_t j = 0; j < width; ++j) ci[j] += v * bp[j];
      }
    }
  }
}

}  // namespace

template <std::floating_point T>
void transpose(const T* in, std::size_t rows, std::size_t cols, T* out) {
  constexpr std::size_t kTile = 32;
  for (std::size_t r0 = 0; r0 < rows; r0 += kTile) {
    const std::size_t r1 = std::min(rows, r0 + kTile);
    for (std::size_t c0 = 0; c0 < cols; c0 += kTile) {
      const std::size_t c1 = std::min(cols, c0 + kTile);
      for (std::size_t r = r0; r < r1; ++r) {
        for (std::size_t col = c0; col < c1; ++col) out[col * rows + r] = in[r * cols + col];
      }
    }
  }
}

template <std::floating_point T>
void gemm(bool trans_a, bool trans_b, std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c,
          bool accumulate) {
  if (!accumulate) std::fill(c, c + m * n, T(0));
  if (m == 0 || n == 0 || k == 0) return;
  std::vector<T> a_packed;
  std::vector<T> b_packed;
  if (trans_a) {
    a_packed.resize(m * k);
    transpose(a, k, m, a_packed.data());
    a = a_packed.data();
  }
  if (trans_b) {
    b_packed.resize(k * n);
    transpose(b, n, k, b_packed.data());
    b = b_packed.data();
  }
  gemm_nn_accumulate(m, n, k, a, b, c);
}

template void gemm<float>(bool, bool, std::size_t, std::size_t, std::size_t, const float*, const float*, float*, bool);
template void gemm<double>(bool, bool, std::size_t, std::size_t, std::size_t, const double*, const double*, double*,
                           bool);
template void transpose<float>(const float*, std::size_t, std::size_t, float*);
template void transpose<double>(const double*, std::size_t, std::size_t, double*);

}  // namespace irisnet::detail
