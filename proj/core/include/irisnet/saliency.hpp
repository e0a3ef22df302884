#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "irisnet/model.hpp"

namespace irisnet {

struct OcclusionConfig {
  std::size_t window = 32;
  std::size_t stride = 16;
  float fill = 0.0f;  // raw pixel value, applied before input standardization
};

// floor((dim - window) / stride) + 1. WindowOutOfBounds if window > dim,
// InvalidArgument if window or stride is zero.
std::size_t grid_extent(std::size_t dim, std::size_t window, std::size_t stride);

// Copy of img [c,h,w] with the window x window square at (top, left) set to
// cfg.fill on every channel.
Tensor occlude(const Tensor& img, std::size_t top, std::size_t left, const OcclusionConfig& cfg);

struct SaliencyMap {
  std::size_t grid_h = 0;
  std::size_t grid_w = 0;
  std::size_t window = 0;
  std::size_t stride = 0;
  std::vector<std::uint8_t> flip;        // row-major, 1 = prediction != true class
  std::vector<float> confidence_drop;    // base minus occluded true-class probability
  std::size_t base_prediction = 0;
  float base_confidence = 0.0f;          // probability of base_prediction
  float base_true_probability = 0.0f;

  bool flipped(std::size_t r, std::size_t c) const { return flip[r * grid_w + c] != 0; }
  float drop(std::size_t r, std::size_t c) const { return confidence_drop[r * grid_w + c]; }
};

// Cell (r, c) covers rows [r*S, r*S+N) and columns [c*S, c*S+N).
SaliencyMap sweep(const Model& model, const Tensor& img, std::size_t true_class, const OcclusionConfig& cfg);

// Per-pixel mean confidence drop over the windows covering the pixel, mapped
// to gray = round(255 * (1 - clamp(mean, 0, 1))). Pixels no window covers are
// 255. Row-major h x w.
std::vector<std::uint8_t> overlay(const SaliencyMap& map, std::size_t height, std::size_t width);

std::string drop_csv(const SaliencyMap& map);
std::string flip_csv(const SaliencyMap& map);

// Writes <prefix>confidence_drop.csv, <prefix>flip.csv and <prefix>overlay.pgm
// and returns their paths.
std::vector<std::filesystem::path> export_map(const SaliencyMap& map, const Tensor& img, const std::string& prefix);

}  // namespace irisnet
