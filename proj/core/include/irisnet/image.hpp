#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>

#include "irisnet/random.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet {

// Decodes PBM-family pixmaps: P2/P5 (gray) and P3/P6 (RGB), maxval up to
// 65535. Returns [channels, h, w] scaled to [0, 1]. UnreadableImage on any
// decode failure.
Tensor read_pnm(const std::filesystem::path& path);

// Binary P6 (3 channels) or P5 (1 channel), 8-bit, values clamped to [0, 1]
// and rounded. IoFailure if the file cannot be written.
void write_pnm(const std::filesystem::path& path, const Tensor& image);
void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> gray, std::size_t height,
               std::size_t width);

// [1, h, w] -> [3, h, w] by replication; [3, h, w] passes through.
Tensor to_rgb(const Tensor& image);

// Bilinear resampling with half-pixel centers (edge samples clamp). Results
// stay inside the range of the four contributing pixels. InvalidGeometry for
// inputs smaller than 2x2 or empty outputs.
Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w);

Tensor flip_horizontal(const Tensor& image);
// Zero-pads by `pad` on every side and crops the original size at (top, left)
// of the padded image; top, left in [0, 2 * pad].
Tensor pad_crop(const Tensor& image, std::size_t pad, std::size_t top, std::size_t left);
// Adds `delta` to every pixel and clamps to [0, 1].
Tensor adjust_brightness(const Tensor& image, float delta);

}  // namespace irisnet
