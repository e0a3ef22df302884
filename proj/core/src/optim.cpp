#include "irisnet/optim.hpp"

#include <cmath>

namespace irisnet {

NamedTensors trainable_parameters(const Model& model) {
  NamedTensors out;
  for (const auto& name : model.parameter_names()) {
    if (!model.is_frozen(name)) out.emplace_back(name, model.tensor(name));
  }
  return out;
}

void adam_step(const NamedTensors& params, AdamState& state, const AdamConfig& config) {
  for (const auto& [name, tensor] : params) {
    if (!tensor.has_grad()) continue;
    Tensor t = tensor;
    auto& slot = state[name];
    if (slot.m.empty()) {
      slot.m.assign(t.numel(), 0.0);
      slot.v.assign(t.numel(), 0.0);
    }
    ++slot.step;
    const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(slot.step));
    const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(slot.step));
    const auto g = t.grad();
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      slot.m[i] = config.beta1 * slot.m[i] + (1.0 - config.beta1) * gi;
      slot.v[i] = config.beta2 * slot.v[i] + (1.0 - config.beta2) * gi * gi;
      const double m_hat = slot.m[i] / bc1;
      const double v_hat = slot.v[i] / bc2;
      w[i] = static_cast<float>(static_cast<double>(w[i]) -
                                config.learning_rate * m_hat / (std::sqrt(v_hat) + config.eps));
    }
  }
}

void sgd_step(const NamedTensors& params, double learning_rate) {
  for (const auto& [name, tensor] : params) {
    if (!tensor.has_grad()) continue;
    Tensor t = tensor;
    const auto g = t.grad();
    auto w = t.mutable_data();
    for (std::size_t i = 0; i < w.size(); ++i) {
      w[i] = static_cast<float>(static_cast<double>(w[i]) - learning_rate * static_cast<double>(g[i]));
    }
  }
}

void zero_grads(const NamedTensors& params) {
  for (const auto& [name, tensor] : params) {
    Tensor t = tensor;
    t.zero_grad();
  }
}

}  // namespace irisnet
