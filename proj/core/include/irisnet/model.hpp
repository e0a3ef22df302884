#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <vector>

#include "irisnet/model_spec.hpp"
#include "irisnet/nn.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet {

template <std::floating_point T>
struct ConvBn {
  BasicConv2dParams<T> conv;
  BasicBatchNormParams<T> bn;
};

// A residual block bound to concrete tensors. Batchnorm modes are taken from
// the `training_mode` flags of the contained params.
template <std::floating_point T>
struct ResidualBlock {
  BlockKind kind = BlockKind::kBasic;
  ResidualBlockSpec spec;
  std::vector<ConvBn<T>> branch;  // 2 stages (basic) or 3 (bottleneck)
  std::optional<ConvBn<T>> shortcut;
};

// relu(F(x) + shortcut(x)); F = conv-bn-relu-conv-bn (basic) or
// conv1x1-bn-relu-conv3x3-bn-relu-conv1x1-bn (bottleneck).
template <std::floating_point T>
BasicTensor<T> residual_forward(const BasicTensor<T>& x, ResidualBlock<T>& block);

// A residual CNN classifier. Holds every tensor declared by its spec, keyed by
// name: trainable parameters plus batchnorm running statistics and the input
// standardization buffers ("input.mean", "input.std").
//
// Copying a model deep-copies its tensors.
template <std::floating_point T>
class BasicModel {
 public:
  using TensorMap = std::map<std::string, BasicTensor<T>>;

  BasicModel() = default;
  // Throws SpecMismatch unless `tensors` holds exactly the declared names with
  // the declared shapes.
  BasicModel(ModelSpec spec, TensorMap tensors);

  BasicModel(const BasicModel& other);
  BasicModel& operator=(const BasicModel& other);
  BasicModel(BasicModel&&) noexcept = default;
  BasicModel& operator=(BasicModel&&) noexcept = default;

  const ModelSpec& spec() const { return spec_; }
  const TensorMap& tensors() const { return tensors_; }
  const BasicTensor<T>& tensor(const std::string& name) const;
  BasicTensor<T>& tensor(const std::string& name);
  const BasicTensor<T>& head_weight() const { return tensor("head.weight"); }

  // Trainable parameter names in lexicographic order.
  std::vector<std::string> parameter_names() const;
  bool is_parameter(const std::string& name) const;
  std::size_t parameter_count() const;

  // Adds prefixes to the frozen set; each must match at least one trainable
  // parameter, else UnknownPrefix. "" matches everything.
  void freeze(const std::vector<std::string>& prefixes);
  void unfreeze_all();
  const std::set<std::string>& frozen_prefixes() const { return frozen_; }
  bool is_frozen(std::string_view name) const;

  // Logits [b, classes]. images: [b, in_ch, s, s] raw pixels, s = input_size.
  // In training mode batchnorm uses batch statistics and updates running
  // statistics, except for batchnorm layers whose affine parameters are frozen.
  BasicTensor<T> forward(const BasicTensor<T>& images, bool training);
  // Inference-mode forward; never records a graph.
  BasicTensor<T> infer(const BasicTensor<T>& images) const;

  ResidualBlock<T> block(std::size_t stage, std::size_t index, bool training) const;

  template <std::floating_point U>
  BasicModel<U> cast() const {
    typename BasicModel<U>::TensorMap out;
    for (const auto& [name, t] : tensors_) out.emplace(name, t.template cast<U>());
    BasicModel<U> m(spec_, std::move(out));
    if (!frozen_.empty()) m.freeze(std::vector<std::string>(frozen_.begin(), frozen_.end()));
    return m;
  }

 private:
  BasicTensor<T> run(const BasicTensor<T>& images, bool training) const;
  ConvBn<T> conv_bn(const std::string& prefix, const std::string& conv, const std::string& bn, std::size_t stride,
                    std::size_t padding, bool training) const;
  void refresh_grad_flags();

  ModelSpec spec_;
  TensorMap tensors_;
  std::set<std::string> trainable_;
  std::set<std::string> frozen_;
};

using Model = BasicModel<float>;

extern template class BasicModel<float>;
extern template class BasicModel<double>;

// Conv and dense weights from U(-1/sqrt(fan_in), 1/sqrt(fan_in)), zero biases
// and betas, unit gammas, running stats at (0, 1), input standardization at
// identity. Deterministic per seed.
Model build(const ModelSpec& spec, std::uint64_t seed);

// Swaps the classifier head for a freshly initialized one with `new_classes`
// outputs. All other tensors are copied bit-exactly and the head is removed
// from the frozen set.
Model replace_head(const Model& model, std::size_t new_classes, std::uint64_t seed);

// Row-wise argmax; ties go to the lowest class index.
std::vector<std::size_t> argmax_rows(const Tensor& logits);
std::vector<std::size_t> predict(const Model& model, const Tensor& images);

}  // namespace irisnet
