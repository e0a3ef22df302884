#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "error_check.hpp"
#include "irisnet/grad_check.hpp"
#include "irisnet/loss.hpp"
#include "irisnet/ops.hpp"
#include "irisnet/optim.hpp"
#include "test_support.hpp"

using namespace irisnet;
using irisnet::testing::bit_equal;
using irisnet::testing::random_tensor;

namespace {

using Labels = std::vector<std::size_t>;

double ce_oracle(const Tensor& logits, const Labels& labels) {
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  double total = 0.0;
  for (std::size_t i = 0; i < b; ++i) {
    double z = 0.0;
    for (std::size_t j = 0; j < n; ++j) z += std::exp(double(logits.data()[i * n + j]));
    total += -std::log(std::exp(double(logits.data()[i * n + labels[i]])) / z);
  }
  return total / double(b);
}

NamedTensors one(const std::string& name, const Tensor& t) { return {{name, t}}; }

void set_grad(Tensor& t, float value) {
  t.zero_grad();
  auto g = t.impl().grad_buffer();
  std::fill(g.begin(), g.end(), value);
}

}  // namespace

TEST_CASE("cross_entropy examples") {
  const Labels l{2};
  CHECK(cross_entropy(Tensor({1, 4}, {0.3f, 0.3f, 0.3f, 0.3f}), std::span(l)).item() ==
        doctest::Approx(std::log(4.0)).epsilon(1e-6));

  const Labels l0{0};
  const float big = cross_entropy(Tensor({1, 3}, {1000, 0, 0}), std::span(l0)).item();
  CHECK(big >= 0.0f);
  CHECK(big < 1e-6f);
  const float huge = cross_entropy(Tensor({1, 3}, {0, 1000, 0}), std::span(l0)).item();
  CHECK(huge == doctest::Approx(1000.0));

  Rng rng(1);
  const Tensor logits = random_tensor({5, 7}, rng, -4, 4);
  const Labels labels{0, 6, 3, 3, 1};
  CHECK(std::abs(cross_entropy(logits, std::span(labels)).item() - ce_oracle(logits, labels)) < 1e-5);

  const Labels bad{7, 0, 0, 0, 0};
  CHECK_ERROR(cross_entropy(logits, std::span(bad)), ErrorCode::kLabelOutOfRange);
  const Labels short_labels{0};
  CHECK_ERROR(cross_entropy(logits, std::span(short_labels)), ErrorCode::kShapeMismatch);
}

TEST_CASE("cross_entropy passes grad_check") {
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(3, "ce", seed));
    const std::size_t b = 1 + rng.uniform_index(5), n = 2 + rng.uniform_index(6);
    Labels labels(b);
    for (auto& l : labels) l = rng.uniform_index(n);
    worst = std::max(worst, grad_check([&](const auto& x) { return cross_entropy(x, std::span<const std::size_t>(labels)); },
                                       random_tensor({b, n}, rng, -3, 3), 1e-3)
                                .max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("final_loss with lambda1 = 0 is bit-identical to cross_entropy") {
  Rng rng(2);
  for (int i = 0; i < 20; ++i) {
    const Tensor logits = random_tensor({4, 6}, rng, -5, 5);
    const Tensor w = random_tensor({8, 6}, rng);
    const Labels labels{0, 5, 2, 2};
    CHECK(bit_equal(final_loss(logits, std::span(labels), w, 0.0f).data(),
                    cross_entropy(logits, std::span(labels)).data()));
  }
}

TEST_CASE("final_loss adds the squared Frobenius norm of the head") {
  const Tensor logits({1, 2}, {0.2f, -0.4f});
  const Labels labels{1};
  const float ce = cross_entropy(logits, std::span(labels)).item();
  const float fl = final_loss(logits, std::span(labels), Tensor({1, 2}, {3, 4}), 0.01f).item();
  CHECK(fl == doctest::Approx(ce + 0.25).epsilon(1e-6));

  Tensor w({2, 2}, {1, 2, 2, 1}, true);
  // penalty gradient alone: logits do not depend on w here
  final_loss(Tensor({1, 2}, {0.0f, 0.0f}), std::span(labels), w, 0.1f).backward();
  const std::vector<float> g(w.grad().begin(), w.grad().end());
  const std::vector<float> expected{0.2f, 0.4f, 0.4f, 0.2f};
  for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(expected[i]).epsilon(1e-6));
}

TEST_CASE("penalty gradient matches finite differences") {
  double worst = 0.0;
  for (int seed = 0; seed < 100; ++seed) {
    Rng rng(derive_seed(3, "penalty", seed));
    const Tensor x = random_tensor({3, 4}, rng), w = random_tensor({4, 3}, rng);
    const Labels labels{0, 2, 1};
    const auto f = [&](auto& v) {
      using V = typename std::decay_t<decltype(v[0])>::value_type;
      return final_loss(matmul(v[0], v[1]), std::span<const std::size_t>(labels), v[1], V(0.1));
    };
    worst = std::max(worst, grad_check_many(f, {x, w}, 1e-3).max_rel_error);
  }
  CHECK(worst < 1e-4);
}

TEST_CASE("adam first step moves each coordinate by the learning rate") {
  Tensor t = Tensor::full({5}, 0.5f, true);
  set_grad(t, 1.0f);
  AdamState state;
  adam_step(one("w", t), state, AdamConfig{});
  for (float v : t.data()) CHECK(v == doctest::Approx(0.5 - 0.0002 / (1 + 1e-8)).epsilon(1e-7));
  CHECK(state["w"].step == 1);

  Tensor u = Tensor::full({5}, 0.5f, true);
  set_grad(u, -3.0f);
  AdamState fresh;
  adam_step(one("u", u), fresh, AdamConfig{0.01});
  for (float v : u.data()) CHECK(v == doctest::Approx(0.51).epsilon(1e-6));
}

TEST_CASE("adam matches a hand-rolled reference over several steps") {
  Rng rng(4);
  Tensor t = random_tensor({6}, rng, -1, 1, true);
  std::vector<double> theta(t.data().begin(), t.data().end()), m(6, 0), v(6, 0);
  AdamState state;
  const AdamConfig cfg{0.05, 0.8, 0.95, 1e-6};
  for (int step = 1; step <= 5; ++step) {
    std::vector<float> g(6);
    for (auto& x : g) x = float(rng.uniform(-2, 2));
    t.zero_grad();
    auto buf = t.impl().grad_buffer();
    std::copy(g.begin(), g.end(), buf.begin());
    adam_step(one("t", t), state, cfg);
    for (int i = 0; i < 6; ++i) {
      m[i] = 0.8 * m[i] + 0.2 * g[i];
      v[i] = 0.95 * v[i] + 0.05 * double(g[i]) * g[i];
      const double mh = m[i] / (1 - std::pow(0.8, step)), vh = v[i] / (1 - std::pow(0.95, step));
      theta[i] -= 0.05 * mh / (std::sqrt(vh) + 1e-6);
      CHECK(t.data()[i] == doctest::Approx(theta[i]).epsilon(1e-5));
    }
  }
}

TEST_CASE("adam with zero gradient leaves parameters unchanged") {
  Tensor t({3}, {1.0f, -2.0f, 3.5f}, true);
  set_grad(t, 0.0f);
  AdamState state;
  adam_step(one("t", t), state, AdamConfig{});
  CHECK(t.to_vector() == std::vector<float>{1.0f, -2.0f, 3.5f});

  Tensor n({2}, {1.0f, 2.0f}, true);
  adam_step(one("n", n), state, AdamConfig{});
  CHECK(n.to_vector() == std::vector<float>{1.0f, 2.0f});
  CHECK_FALSE(state.contains("n"));
}

TEST_CASE("frozen parameters are excluded from optimizer updates") {
  Model m = build(resnet_micro_spec(3), 1);
  m.freeze({"stem."});
  const Model before = m;
  const auto params = trainable_parameters(m);
  for (const auto& [name, t] : params) CHECK_FALSE(name.starts_with("stem."));
  Rng rng(5);
  const Tensor x = random_tensor({4, 3, 32, 32}, rng, 0, 1);
  const Labels labels{0, 1, 2, 0};
  AdamState state;
  for (int step = 0; step < 10; ++step) {
    final_loss(m.forward(x, true), std::span(labels), m.head_weight(), 1e-4f).backward();
    adam_step(params, state, AdamConfig{});
    zero_grads(params);
  }
  for (const auto& name : m.parameter_names()) {
    const bool same = bit_equal(m.tensor(name).data(), before.tensor(name).data());
    CHECK_MESSAGE(same == name.starts_with("stem."), name);
  }
}

TEST_CASE("sgd examples") {
  Tensor t({1}, {1.0f}, true);
  set_grad(t, 2.0f);
  sgd_step(one("t", t), 0.1);
  CHECK(t.item() == doctest::Approx(0.8));

  set_grad(t, 0.0f);
  sgd_step(one("t", t), 0.1);
  CHECK(t.item() == doctest::Approx(0.8));

  Tensor q({1}, {1.0f}, true);
  const float before = sum(mul(q, q)).item();
  sum(mul(q, q)).backward();
  sgd_step(one("q", q), 0.4);
  CHECK(q.item() == doctest::Approx(0.2));
  CHECK(sum(mul(q, q)).item() < before);
}

TEST_CASE("zero_grads clears accumulated gradients") {
  Tensor t({2}, {1, 2}, true);
  sum(t).backward();
  CHECK(t.has_grad());
  zero_grads(one("t", t));
  CHECK_FALSE(t.has_grad());
}
