#include <doctest.h>

#include <cmath>

#include "error_check.hpp"
#include "irisnet/image.hpp"
#include "irisnet/nn.hpp"
#include "irisnet/ops.hpp"
#include "irisnet/saliency.hpp"
#include "test_support.hpp"

using namespace irisnet;
using irisnet::testing::bit_equal;
using irisnet::testing::random_tensor;
using irisnet::testing::read_text;
using irisnet::testing::TempDir;

namespace {

ModelSpec tiny_spec(std::size_t input, std::size_t classes) {
  ModelSpec s;
  s.variant_name = "tiny";
  s.input_size = input;
  s.stem = {3, 4, 3, 1, 1, 0, 0, 0};
  s.stages = {{1, {4, 4, 4, 1, false}}};
  s.head_classes = classes;
  return s;
}

// Independent per-pixel overlay: mean over every cell whose window covers it.
std::vector<std::uint8_t> overlay_oracle(const SaliencyMap& m, std::size_t h, std::size_t w) {
  std::vector<std::uint8_t> out(h * w);
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      double sum = 0;
      int n = 0;
      for (std::size_t r = 0; r < m.grid_h; ++r) {
        for (std::size_t c = 0; c < m.grid_w; ++c) {
          const bool in = y >= r * m.stride && y < r * m.stride + m.window && x >= c * m.stride &&
                          x < c * m.stride + m.window;
          if (in) {
            sum += m.drop(r, c);
            ++n;
          }
        }
      }
      if (n == 0) {
        out[y * w + x] = 255;
      } else {
        const double mean = std::min(1.0, std::max(0.0, sum / n));
        out[y * w + x] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - mean)));
      }
    }
  }
  return out;
}

std::vector<double> softmax_oracle(std::span<const float> logits) {
  double mx = logits[0];
  for (float v : logits) mx = std::max(mx, static_cast<double>(v));
  std::vector<double> p(logits.size());
  double z = 0;
  for (std::size_t i = 0; i < p.size(); ++i) z += p[i] = std::exp(static_cast<double>(logits[i]) - mx);
  for (auto& v : p) v /= z;
  return p;
}

}  // namespace

TEST_CASE("grid extent") {
  CHECK(grid_extent(224, 32, 16) == 13);
  CHECK(grid_extent(32, 8, 4) == 7);
  CHECK(grid_extent(32, 32, 16) == 1);
  CHECK(grid_extent(33, 8, 4) == 7);
  CHECK_ERROR(grid_extent(16, 17, 4), ErrorCode::kWindowOutOfBounds);
  CHECK_ERROR(grid_extent(16, 0, 4), ErrorCode::kInvalidArgument);
  CHECK_ERROR(grid_extent(16, 4, 0), ErrorCode::kInvalidArgument);

  Rng rng(11);
  for (int t = 0; t < 200; ++t) {
    const std::size_t dim = 1 + rng.uniform_index(300);
    const std::size_t n = 1 + rng.uniform_index(dim);
    const std::size_t s = 1 + rng.uniform_index(64);
    // count start offsets 0, s, 2s, ... whose window still fits
    std::size_t count = 0;
    for (std::size_t off = 0; off + n <= dim; off += s) ++count;
    CHECK(grid_extent(dim, n, s) == count);
  }
}

TEST_CASE("occlude fills exactly the window on every channel") {
  Rng rng(2);
  const Tensor img = random_tensor({3, 10, 12}, rng, 0.1, 1.0);
  const OcclusionConfig cfg{4, 2, 0.0f};
  const Tensor occ = occlude(img, 3, 5, cfg);
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t y = 0; y < 10; ++y) {
      for (std::size_t x = 0; x < 12; ++x) {
        const std::size_t i = (c * 10 + y) * 12 + x;
        const bool in = y >= 3 && y < 7 && x >= 5 && x < 9;
        CHECK(occ.data()[i] == (in ? 0.0f : img.data()[i]));
      }
    }
  }
  CHECK(occlude(img, 0, 0, {2, 1, 0.5f}).data()[0] == 0.5f);
  CHECK_ERROR(occlude(img, 7, 0, cfg), ErrorCode::kWindowOutOfBounds);
  CHECK_ERROR(occlude(img, 0, 9, cfg), ErrorCode::kWindowOutOfBounds);
  CHECK_ERROR(occlude(Tensor::zeros({10, 12}), 0, 0, cfg), ErrorCode::kShapeMismatch);
}

TEST_CASE("sweep matches per-window inference") {
  const Model m = build(tiny_spec(16, 4), 3);
  Rng rng(4);
  const Tensor img = random_tensor({3, 16, 16}, rng, 0, 1);
  const Tensor before = img.detach();
  const OcclusionConfig cfg{6, 5, 0.0f};
  const SaliencyMap map = sweep(m, img, 2, cfg);
  CHECK(bit_equal(img.data(), before.data()));
  REQUIRE(map.grid_h == 3);
  REQUIRE(map.grid_w == 3);

  const auto base = softmax_oracle(m.infer(reshape(img, {1, 3, 16, 16})).data());
  CHECK(map.base_true_probability == doctest::Approx(base[2]).epsilon(1e-5));
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 3; ++c) {
      const Tensor occ = occlude(img, r * 5, c * 5, cfg);
      const auto p = softmax_oracle(m.infer(reshape(occ, {1, 3, 16, 16})).data());
      std::size_t best = 0;
      for (std::size_t k = 1; k < p.size(); ++k) if (p[k] > p[best]) best = k;
      CHECK(map.drop(r, c) == doctest::Approx(base[2] - p[2]).epsilon(1e-4).scale(1e-6));
      CHECK(map.flipped(r, c) == (best != 2));
    }
  }
  // repeated sweeps agree bit-exactly
  const SaliencyMap again = sweep(m, img, 2, cfg);
  CHECK(again.confidence_drop == map.confidence_drop);
  CHECK(again.flip == map.flip);
  CHECK_ERROR(sweep(m, img, 4, cfg), ErrorCode::kLabelOutOfRange);
  CHECK_ERROR(sweep(m, img, 0, {17, 4, 0.0f}), ErrorCode::kWindowOutOfBounds);
}

TEST_CASE("occluding a constant image with its own value changes nothing") {
  const Model m = build(tiny_spec(16, 3), 5);
  const Tensor img = Tensor::full({3, 16, 16}, 0.4f);
  const SaliencyMap map = sweep(m, img, 1, {4, 4, 0.4f});
  for (float d : map.confidence_drop) CHECK(d == 0.0f);
  for (auto f : map.flip) CHECK(f == (map.base_prediction != 1 ? 1 : 0));
}

TEST_CASE("224 input with 32/16 gives a 13x13 grid") {
  ModelSpec spec = tiny_spec(224, 2);
  spec.stem = {3, 2, 3, 4, 1, 0, 0, 0};
  spec.stages = {{1, {2, 2, 2, 2, true}}};
  const Model m = build(spec, 1);
  Rng rng(6);
  const SaliencyMap map = sweep(m, random_tensor({3, 224, 224}, rng, 0, 1), 0, {32, 16, 0.0f});
  CHECK(map.grid_h == 13);
  CHECK(map.grid_w == 13);
  CHECK(map.flip.size() == 169);
}

TEST_CASE("overlay matches the per-pixel oracle") {
  Rng rng(7);
  for (int t = 0; t < 30; ++t) {
    SaliencyMap map;
    const std::size_t h = 8 + rng.uniform_index(24), w = 8 + rng.uniform_index(24);
    map.window = 1 + rng.uniform_index(std::min(h, w));
    map.stride = 1 + rng.uniform_index(8);
    map.grid_h = grid_extent(h, map.window, map.stride);
    map.grid_w = grid_extent(w, map.window, map.stride);
    for (std::size_t i = 0; i < map.grid_h * map.grid_w; ++i) {
      map.confidence_drop.push_back(static_cast<float>(rng.uniform(-0.3, 1.3)));
      map.flip.push_back(rng.bernoulli(0.5) ? 1 : 0);
    }
    CHECK(overlay(map, h, w) == overlay_oracle(map, h, w));
  }
}

TEST_CASE("overlay of a map without drops is uniformly white where covered") {
  SaliencyMap map;
  map.window = 4;
  map.stride = 4;
  map.grid_h = map.grid_w = 2;
  map.confidence_drop.assign(4, 0.0f);
  map.flip.assign(4, 0);
  for (auto g : overlay(map, 9, 9)) CHECK(g == 255);
  map.confidence_drop = {1.0f, 0.5f, 0.0f, 2.0f};
  const auto g = overlay(map, 8, 8);
  CHECK(g[0] == 0);
  CHECK(g[4] == 128);
  CHECK(g[4 * 8] == 255);
  CHECK(g[63] == 0);
}

TEST_CASE("csv and export") {
  SaliencyMap map;
  map.window = 4;
  map.stride = 2;
  map.grid_h = 2;
  map.grid_w = 3;
  map.confidence_drop = {0.5f, -0.25f, 0.0f, 1.0f, 0.125f, 0.75f};
  map.flip = {0, 1, 0, 1, 1, 0};
  CHECK(drop_csv(map) == "0.5,-0.25,0\n1,0.125,0.75\n");
  CHECK(flip_csv(map) == "0,1,0\n1,1,0\n");

  TempDir dir;
  const Tensor img = Tensor::zeros({3, 6, 8});
  const auto paths = export_map(map, img, (dir / "s_").string());
  REQUIRE(paths.size() == 3);
  CHECK(read_text(paths[0]) == drop_csv(map));
  CHECK(read_text(paths[1]) == flip_csv(map));
  const Tensor gray = read_pnm(paths[2]);
  CHECK(gray.shape() == Shape{1, 6, 8});
  CHECK_ERROR(export_map(map, Tensor::zeros({3, 10, 10}), (dir / "t_").string()), ErrorCode::kShapeMismatch);
}
