#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "irisnet/model.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet {

using NamedTensors = std::vector<std::pair<std::string, Tensor>>;

// Parameters the optimizer may update: trainable and not frozen.
NamedTensors trainable_parameters(const Model& model);

struct AdamConfig {
  double learning_rate = 0.0002;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

struct AdamSlot {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

using AdamState = std::map<std::string, AdamSlot>;

// Bias-corrected Adam: theta -= lr * m_hat / (sqrt(v_hat) + eps). Tensors
// without an accumulated gradient are skipped.
void adam_step(const NamedTensors& params, AdamState& state, const AdamConfig& config);

// theta -= lr * g
void sgd_step(const NamedTensors& params, double learning_rate);

void zero_grads(const NamedTensors& params);

}  // namespace irisnet
