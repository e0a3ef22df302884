#include "irisnet/saliency.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "irisnet/error.hpp"
#include "irisnet/image.hpp"
#include "irisnet/nn.hpp"
#include "irisnet/train.hpp"

namespace irisnet {

namespace {

constexpr std::size_t kSweepBatch = 32;

void check_image(const Tensor& img) {
  if (img.rank() != 3) raise(ErrorCode::kShapeMismatch, "expected a [c,h,w] image, got " + shape_str(img.shape()));
}

std::string format_cell(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

template <typename F>
std::string grid_csv(const SaliencyMap& map, F cell) {
  std::string out;
  for (std::size_t r = 0; r < map.grid_h; ++r) {
    for (std::size_t c = 0; c < map.grid_w; ++c) {
      if (c) out += ',';
      out += cell(r, c);
    }
    out += '\n';
  }
  return out;
}

}  // namespace

std::size_t grid_extent(std::size_t dim, std::size_t window, std::size_t stride) {
  if (window == 0 || stride == 0) raise(ErrorCode::kInvalidArgument, "window and stride must be >= 1");
  if (window > dim) {
    raise(ErrorCode::kWindowOutOfBounds,
          "window " + std::to_string(window) + " exceeds image extent " + std::to_string(dim));
  }
  return (dim - window) / stride + 1;
}

Tensor occlude(const Tensor& img, std::size_t top, std::size_t left, const OcclusionConfig& cfg) {
  check_image(img);
  const std::size_t c = img.dim(0), h = img.dim(1), w = img.dim(2), n = cfg.window;
  if (n == 0 || top + n > h || left + n > w) {
    raise(ErrorCode::kWindowOutOfBounds, "window " + std::to_string(n) + " at (" + std::to_string(top) + "," +
                                             std::to_string(left) + ") does not fit " + shape_str(img.shape()));
  }
  auto data = img.to_vector();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = top; y < top + n; ++y) {
      std::fill_n(data.begin() + static_cast<std::ptrdiff_t>((ch * h + y) * w + left), n, cfg.fill);
    }
  }
  return Tensor(img.shape(), std::move(data));
}

SaliencyMap sweep(const Model& model, const Tensor& img, std::size_t true_class, const OcclusionConfig& cfg) {
  check_image(img);
  const std::size_t classes = model.spec().head_classes;
  if (true_class >= classes) {
    raise(ErrorCode::kLabelOutOfRange, "class " + std::to_string(true_class) + " >= " + std::to_string(classes));
  }
  SaliencyMap map;
  map.window = cfg.window;
  map.stride = cfg.stride;
  map.grid_h = grid_extent(img.dim(1), cfg.window, cfg.stride);
  map.grid_w = grid_extent(img.dim(2), cfg.window, cfg.stride);
  const std::size_t cells = map.grid_h * map.grid_w;
  map.flip.assign(cells, 0);
  map.confidence_drop.assign(cells, 0.0f);

  Shape one = img.shape();
  one.insert(one.begin(), 1);
  const Tensor base_probs = softmax(model.infer(Tensor(one, img.to_vector())));
  const auto bp = base_probs.data();
  map.base_prediction = argmax_rows(base_probs)[0];
  map.base_confidence = bp[map.base_prediction];
  map.base_true_probability = bp[true_class];

  const std::size_t per_image = img.numel();
  for (std::size_t start = 0; start < cells; start += kSweepBatch) {
    const std::size_t count = std::min(kSweepBatch, cells - start);
    std::vector<float> batch;
    batch.reserve(count * per_image);
    for (std::size_t i = 0; i < count; ++i) {
      const std::size_t cell = start + i;
      const Tensor occ = occlude(img, (cell / map.grid_w) * cfg.stride, (cell % map.grid_w) * cfg.stride, cfg);
      const auto d = occ.data();
      batch.insert(batch.end(), d.begin(), d.end());
    }
    Shape shape = img.shape();
    shape.insert(shape.begin(), count);
    const Tensor probs = softmax(model.infer(Tensor(shape, std::move(batch))));
    const auto pred = argmax_rows(probs);
    const auto p = probs.data();
    for (std::size_t i = 0; i < count; ++i) {
      map.flip[start + i] = pred[i] != true_class ? 1 : 0;
      map.confidence_drop[start + i] = map.base_true_probability - p[i * classes + true_class];
    }
  }
  return map;
}

std::vector<std::uint8_t> overlay(const SaliencyMap& map, std::size_t height, std::size_t width) {
  std::vector<double> total(height * width, 0.0);
  std::vector<std::size_t> hits(height * width, 0);
  for (std::size_t r = 0; r < map.grid_h; ++r) {
    for (std::size_t c = 0; c < map.grid_w; ++c) {
      const double d = map.drop(r, c);
      for (std::size_t y = r * map.stride; y < std::min(height, r * map.stride + map.window); ++y) {
        for (std::size_t x = c * map.stride; x < std::min(width, c * map.stride + map.window); ++x) {
          total[y * width + x] += d;
          ++hits[y * width + x];
        }
      }
    }
  }
  std::vector<std::uint8_t> gray(height * width, 255);
  for (std::size_t i = 0; i < gray.size(); ++i) {
    if (hits[i] == 0) continue;
    const double m = std::clamp(total[i] / static_cast<double>(hits[i]), 0.0, 1.0);
    gray[i] = static_cast<std::uint8_t>(std::lround(255.0 * (1.0 - m)));
  }
  return gray;
}

std::string drop_csv(const SaliencyMap& map) {
  return grid_csv(map, [&](std::size_t r, std::size_t c) { return format_cell(map.drop(r, c)); });
}

std::string flip_csv(const SaliencyMap& map) {
  return grid_csv(map, [&](std::size_t r, std::size_t c) { return std::string(map.flipped(r, c) ? "1" : "0"); });
}

std::vector<std::filesystem::path> export_map(const SaliencyMap& map, const Tensor& img, const std::string& prefix) {
  check_image(img);
  const std::size_t h = img.dim(1), w = img.dim(2);
  if (map.grid_h != grid_extent(h, map.window, map.stride) || map.grid_w != grid_extent(w, map.window, map.stride)) {
    raise(ErrorCode::kShapeMismatch, "saliency grid does not match the image");
  }
  std::vector<std::filesystem::path> paths{prefix + "confidence_drop.csv", prefix + "flip.csv",
                                           prefix + "overlay.pgm"};
  write_text_file(paths[0], drop_csv(map));
  write_text_file(paths[1], flip_csv(map));
  write_pgm(paths[2], overlay(map, h, w), h, w);
  return paths;
}

}  // namespace irisnet
