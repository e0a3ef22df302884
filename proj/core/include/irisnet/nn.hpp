#pragma once

#include <cstddef>
#include <vector>

#include "irisnet/tensor.hpp"

namespace irisnet {

template <std::floating_point T>
struct BasicConv2dParams {
  BasicTensor<T> weight;  // [out_ch, in_ch, kh, kw]
  BasicTensor<T> bias;    // [out_ch], or undefined for no bias
  std::size_t stride = 1;
  std::size_t padding = 0;
};

template <std::floating_point T>
struct BasicBatchNormParams {
  BasicTensor<T> gamma;  // [ch]
  BasicTensor<T> beta;   // [ch]
  BasicTensor<T> running_mean;
  BasicTensor<T> running_var;
  T eps = T(1e-5);
  // running = (1 - momentum) * running + momentum * batch
  T momentum = T(0.1);
  bool training_mode = false;
};

using Conv2dParams = BasicConv2dParams<float>;
using BatchNormParams = BasicBatchNormParams<float>;

// Output extent of a sliding window; throws InvalidGeometry when the window
// does not fit in the padded input.
std::size_t window_output_extent(std::size_t in, std::size_t kernel, std::size_t stride, std::size_t padding);

// Direct cross-correlation (no kernel flip) with symmetric zero padding.
// x: [b, c, h, w] -> [b, out_ch, h', w'].
template <std::floating_point T>
BasicTensor<T> conv2d(const BasicTensor<T>& x, const BasicConv2dParams<T>& p);

// Per-channel batch normalization over (b, h, w). In training mode the batch
// statistics normalize the input and the running statistics are updated in
// place (the running variance uses the unbiased batch estimate). In inference
// mode the running statistics are used.
template <std::floating_point T>
BasicTensor<T> batchnorm(const BasicTensor<T>& x, BasicBatchNormParams<T>& p);

struct ChannelMoments {
  std::vector<double> mean;
  std::vector<double> variance;  // biased, divides by b*h*w
};

template <std::floating_point T>
ChannelMoments batch_moments(const BasicTensor<T>& x);

// relu'(0) == 0.
template <std::floating_point T>
BasicTensor<T> relu(const BasicTensor<T>& x);

// Padding positions never win the max. Equal maxima route the gradient to the
// lowest flat input index.
template <std::floating_point T>
BasicTensor<T> maxpool2d(const BasicTensor<T>& x, std::size_t kernel, std::size_t stride, std::size_t padding = 0);

// [b, c, h, w] -> [b, c]
template <std::floating_point T>
BasicTensor<T> global_avgpool(const BasicTensor<T>& x);

// x[b, d] * weight[d, n] + bias[n]
template <std::floating_point T>
BasicTensor<T> dense(const BasicTensor<T>& x, const BasicTensor<T>& weight, const BasicTensor<T>& bias);

// Row-wise softmax of [b, n] logits with max subtraction.
template <std::floating_point T>
BasicTensor<T> softmax(const BasicTensor<T>& logits);

}  // namespace irisnet
