#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "irisnet/random.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet {

struct GradCheckResult {
  // max over coordinates of |g_a - g_n| / max(1e-8, |g_a| + |g_n|)
  double max_rel_error = 0.0;
  std::size_t worst_input = 0;
  std::size_t worst_index = 0;
  // Coordinates whose one-sided differences disagree, i.e. the probe straddles
  // a kink (relu at 0, maxpool ties). Reported, not excluded.
  std::vector<std::pair<std::size_t, std::size_t>> unreliable;
};

namespace detail {

// One-sided differences agree when |fwd - bwd| <= rel * (|fwd| + |bwd|)
// + abs_floor + roundoff * max(1, |f0|) / h.
struct Agreement {
  double rel;
  double abs_floor;
  double roundoff;
};

template <typename F>
GradCheckResult grad_check_steps(F&& f, const std::vector<Tensor>& inputs, const std::vector<double>& steps,
                                 const Agreement& agree, std::size_t max_coords, std::uint64_t sample_seed) {
  std::vector<Tensor64> leaves;
  leaves.reserve(inputs.size());
  for (const auto& x : inputs) leaves.push_back(x.detach().cast<double>().set_requires_grad(true));
  {
    Tensor64 loss = f(leaves);
    loss.backward();
  }

  std::vector<Tensor64> shadow;
  shadow.reserve(inputs.size());
  for (const auto& x : inputs) shadow.push_back(x.cast<double>());
  const auto eval = [&]() {
    NoGradGuard no_grad;
    return static_cast<double>(f(shadow).item());
  };
  const double f0 = eval();

  GradCheckResult result;
  for (std::size_t t = 0; t < inputs.size(); ++t) {
    const auto analytic = leaves[t].grad();
    auto values = shadow[t].mutable_data();
    std::vector<std::size_t> coords(values.size());
    for (std::size_t i = 0; i < coords.size(); ++i) coords[i] = i;
    if (max_coords > 0 && coords.size() > max_coords) {
      Rng rng(derive_seed(sample_seed, "grad_check", t));
      rng.shuffle(coords);
      coords.resize(max_coords);
      std::sort(coords.begin(), coords.end());
    }
    for (const std::size_t i : coords) {
      const double original = values[i];
      struct Probe {
        double central;
        bool agrees;
      };
      const auto probe = [&](double h) {
        values[i] = original + h;
        const double fp = eval();
        values[i] = original - h;
        const double fm = eval();
        values[i] = original;
        const double forward = (fp - f0) / h;
        const double backward = (f0 - fm) / h;
        const double slack = agree.rel * (std::abs(forward) + std::abs(backward)) + agree.abs_floor +
                             agree.roundoff * std::max(1.0, std::abs(f0)) / h;
        return Probe{(fp - fm) / (2.0 * h), std::abs(forward - backward) <= slack};
      };
      // A single step is judged by its one-sided differences. On a ladder,
      // step k is accepted once it and step k+1 both agree one-sidedly and
      // give the same central estimate; symmetric kinks fool the first test
      // but not the second.
      Probe prev = probe(steps[0]);
      double numeric = prev.central;
      bool reliable = steps.size() == 1 && prev.agrees;
      for (std::size_t k = 1; k < steps.size() && !reliable; ++k) {
        const Probe cur = probe(steps[k]);
        const double slack = agree.rel * (std::abs(prev.central) + std::abs(cur.central)) +
                             agree.roundoff * std::max(1.0, std::abs(f0)) / steps[k];
        if (prev.agrees && cur.agrees && std::abs(prev.central - cur.central) <= slack) {
          numeric = prev.central;
          reliable = true;
        } else {
          numeric = cur.central;
          prev = cur;
        }
      }
      if (!reliable) result.unreliable.emplace_back(t, i);
      const double ga = analytic.empty() ? 0.0 : analytic[i];
      const double err = std::abs(ga - numeric) / std::max(1e-8, std::abs(ga) + std::abs(numeric));
      if (err > result.max_rel_error) {
        result.max_rel_error = err;
        result.worst_input = t;
        result.worst_index = i;
      }
    }
  }
  return result;
}

}  // namespace detail

// Compares the analytic gradient of `f` against central differences, both
// evaluated in 64-bit so float rounding does not mask or mimic formula errors.
//
// `f` is invoked both as f(std::vector<Tensor>&) and f(std::vector<Tensor64>&)
// and must return a one-element tensor; a generic lambda is the usual form.
//
// With max_coords > 0, inputs larger than that are probed at max_coords
// coordinates drawn from `sample_seed` instead of exhaustively.
template <typename F>
GradCheckResult grad_check_many(F&& f, const std::vector<Tensor>& inputs, double h, std::size_t max_coords = 0,
                                std::uint64_t sample_seed = 0) {
  return detail::grad_check_steps(f, inputs, {h}, {0.1, 1e-6, 0.0}, max_coords, sample_seed);
}

// As grad_check_many, but each coordinate starts at step h_max and divides it
// by 10 down to h_min until consecutive steps agree to 1e-3 (plus a 64-bit
// roundoff allowance), so probes in networks dense with relu kinks settle on a
// step that straddles none. Coordinates where no step settles are reported
// unreliable.
template <typename F>
GradCheckResult grad_check_adaptive(F&& f, const std::vector<Tensor>& inputs, double h_max, double h_min,
                                    std::size_t max_coords = 0, std::uint64_t sample_seed = 0) {
  std::vector<double> steps;
  for (double h = h_max; h >= h_min * (1.0 - 1e-9); h /= 10.0) steps.push_back(h);
  return detail::grad_check_steps(f, inputs, steps, {1e-3, 0.0, 1e-14}, max_coords, sample_seed);
}

// Single-input form; `f` receives a Tensor or a Tensor64.
template <typename F>
GradCheckResult grad_check(F&& f, const Tensor& x, double h) {
  return grad_check_many([&](auto& xs) { return f(xs[0]); }, std::vector<Tensor>{x}, h);
}

}  // namespace irisnet
