#pragma once

#include <cstddef>
#include <string>
#include <string_view>
#include <vector>

#include "irisnet/tensor.hpp"

namespace irisnet {

enum class BlockKind {
  kBasic,       // 3x3 -> 3x3 residual branch
  kBottleneck,  // 1x1 -> 3x3 -> 1x1 residual branch
};

std::string_view block_kind_name(BlockKind kind) noexcept;

// One residual block computing relu(F(x) + shortcut(x)). The shortcut is a
// strided 1x1 convolution + batchnorm when `projection` is set, else identity.
struct ResidualBlockSpec {
  std::size_t in_ch = 0;
  std::size_t mid_ch = 0;
  std::size_t out_ch = 0;
  std::size_t stride = 1;
  bool projection = false;

  bool operator==(const ResidualBlockSpec&) const = default;
};

// `first` describes the opening block; the remaining block_count - 1 blocks
// map out_ch -> out_ch at stride 1 with an identity shortcut.
struct StageSpec {
  std::size_t block_count = 1;
  ResidualBlockSpec first;

  bool operator==(const StageSpec&) const = default;
};

struct StemSpec {
  std::size_t in_ch = 3;
  std::size_t out_ch = 0;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t padding = 1;
  std::size_t pool_kernel = 0;  // 0 disables the max-pool
  std::size_t pool_stride = 0;
  std::size_t pool_padding = 0;

  bool operator==(const StemSpec&) const = default;
};

struct ModelSpec {
  std::string variant_name;
  std::size_t input_size = 0;  // square input, in pixels
  StemSpec stem;
  BlockKind block_kind = BlockKind::kBasic;
  std::vector<StageSpec> stages;
  std::size_t head_classes = 0;

  std::size_t feature_dim() const;
  std::size_t total_blocks() const;

  bool operator==(const ModelSpec&) const = default;
};

// Throws InvalidSpec on any chaining, projection or geometry violation.
void validate(const ModelSpec& spec);

// Blocks of a stage in forward order.
std::vector<ResidualBlockSpec> expand_stage(const StageSpec& stage);

// key = value text, one entry per line; `stage` repeats in order.
std::string to_config_text(const ModelSpec& spec);
ModelSpec parse_model_spec(std::string_view text);

// Desk-scale classifier: 32x32 input, 3 stages of 3 basic blocks (8/16/32 ch).
ModelSpec resnet_micro_spec(std::size_t classes);
// The 50-layer bottleneck topology at 224x224.
ModelSpec resnet50_spec(std::size_t classes);
// "resnet_micro" or "resnet50"; InvalidSpec otherwise.
ModelSpec variant_spec(std::string_view name, std::size_t classes);

enum class TensorRole { kConvWeight, kDenseWeight, kBias, kGamma, kBeta, kRunningMean, kRunningVar, kInputMean, kInputStd };

struct TensorDecl {
  std::string name;
  Shape shape;
  TensorRole role;
  std::size_t fan_in = 0;

  bool trainable() const noexcept;
};

// Every tensor a model built from `spec` owns, in forward order.
std::vector<TensorDecl> declare_tensors(const ModelSpec& spec);

// Number of trainable scalars.
std::size_t parameter_count(const ModelSpec& spec);

std::string stage_block_prefix(std::size_t stage, std::size_t block);

}  // namespace irisnet
