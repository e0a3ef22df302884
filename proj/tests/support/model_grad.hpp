#pragma once

#include <span>
#include <string>
#include <vector>

#include "irisnet/grad_check.hpp"
#include "irisnet/loss.hpp"
#include "irisnet/model.hpp"

namespace irisnet::testing {

// Finite-difference check of the training-mode Eq. 1 loss of `model` with
// respect to every trainable parameter. Non-trainable buffers are held fixed.
// h_min > 0 selects the adaptive step ladder from h down to h_min.
inline GradCheckResult model_grad_check(const Model& model, const Tensor& images, std::vector<std::size_t> labels,
                                        double lambda1, double h, std::size_t max_coords = 0,
                                        std::uint64_t sample_seed = 0, double h_min = 0.0) {
  const auto names = model.parameter_names();
  std::vector<Tensor> params;
  for (const auto& n : names) params.push_back(model.tensor(n).detach());
  const auto f = [&](auto& v) {
    using V = typename std::decay_t<decltype(v[0])>::value_type;
    typename BasicModel<V>::TensorMap map;
    for (const auto& [name, t] : model.tensors()) {
      if (!model.is_parameter(name)) map.emplace(name, t.template cast<V>());
    }
    for (std::size_t i = 0; i < names.size(); ++i) map.emplace(names[i], v[i]);
    BasicModel<V> m(model.spec(), std::move(map));
    const auto logits = m.forward(images.template cast<V>(), true);
    return final_loss(logits, std::span<const std::size_t>(labels), m.head_weight(), V(lambda1));
  };
  if (h_min > 0.0) return grad_check_adaptive(f, params, h, h_min, max_coords, sample_seed);
  return grad_check_many(f, params, h, max_coords, sample_seed);
}

}  // namespace irisnet::testing
