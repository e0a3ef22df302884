#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irisnet/random.hpp"
#include "irisnet/tensor.hpp"

namespace irisnet {

struct LabeledImage {
  Tensor pixels;  // [3, h, w], values in [0, 1]
  std::size_t class_id = 0;
  std::string source_path;
};

struct Corpus {
  std::vector<LabeledImage> images;
  std::vector<std::string> class_names;  // index == class id
};

// Reads root/<class>/<image>.{ppm,pgm,pnm}. Class ids follow the sorted class
// directory names and images are ordered by file name. Gray images are
// replicated to three channels. Files with other raster extensions (png, jpg,
// ...) are reported as UnreadableImage since they need converting first.
// EmptyCorpus if root is missing or holds no images.
Corpus load_corpus(const std::filesystem::path& root, bool skip_unreadable = false);

// Bilinear resize of every image to size x size (no-op for matching images).
std::vector<LabeledImage> resize_all(std::vector<LabeledImage> images, std::size_t size);

enum class Partition { kTrain, kVal, kTest };
std::string_view partition_name(Partition p) noexcept;

struct DatasetSplit {
  std::vector<LabeledImage> train;
  std::vector<LabeledImage> val;
  std::vector<LabeledImage> test;
  std::size_t class_count = 0;
  std::uint64_t seed = 0;
};

// Per class: k_test images drawn uniformly at random go to test, then
// max(1, ceil(val_fraction * remainder)) to val, the rest to train. A class
// that would leave train empty raises InsufficientClassSamples.
DatasetSplit make_split(const std::vector<LabeledImage>& images, std::size_t k_test = 4, double val_fraction = 0.2,
                        std::uint64_t seed = 42);

// CSV with header `source_path,class_id,partition`.
void write_split_manifest(const std::filesystem::path& path, const DatasetSplit& split);
// Rebuilds a split from a manifest; every listed path must be present in
// `images` with the same class id (ManifestMismatch otherwise).
DatasetSplit read_split_manifest(const std::filesystem::path& path, const std::vector<LabeledImage>& images);

struct AugmentPolicy {
  bool flip = false;
  double flip_probability = 0.5;
  bool crop = false;
  std::size_t crop_pad = 8;
  bool brightness = false;
  double brightness_delta = 0.1;

  bool empty() const noexcept { return !flip && !crop && !brightness; }
};

// Comma-separated subset of {flip, crop, brightness}; "" or "none" is empty.
AugmentPolicy parse_augment_policy(std::string_view text);

// Label-preserving random transform; pixels stay in [0, 1].
LabeledImage augment(const LabeledImage& image, const AugmentPolicy& policy, Rng& rng);

// Texture signature of one synthetic identity.
// Ring intensity is 0.6 + radial_amplitude * cos(2 pi radial_cycles t)
// + angular_amplitude * cos(angular_frequency theta), t in [0, 1] across the
// band, then multiplied by the tint per channel.
struct RingSignature {
  std::array<float, 3> tint{1.0f, 1.0f, 1.0f};
  int angular_frequency = 0;  // spokes around the ring
  double angular_amplitude = 0.0;
  double radial_cycles = 0.0;  // intensity cycles across the band
  double radial_amplitude = 0.0;
};

// Signatures are enumerated in a fixed order; distinct indices below
// ring_signature_count() give distinct signatures.
RingSignature ring_signature(std::size_t index);
std::size_t ring_signature_count() noexcept;

struct RingGeometry {
  double center_y = 0.0;
  double center_x = 0.0;
  double inner_radius = 0.0;
  double outer_radius = 0.0;
};

// Per-image variation within a synthetic class.
struct SynthOptions {
  double noise_sigma = 0.02;  // Gaussian pixel noise per channel
  std::int64_t jitter = 0;    // ring center offset drawn from [-jitter, jitter] px
  double dilation = 0.15;     // pupil radius scaled by 1 +- dilation
  double gain_spread = 0.1;   // ring brightness scaled by 1 +- gain_spread
};

// Procedural iris-like corpus: class c is a tinted, patterned annulus with
// signature ring_signature(first_signature + c) around a dark pupil on a dark
// background. Every pattern is mirror symmetric, so horizontal flips preserve
// the class. Deterministic per seed. `geometry`, when given, receives each
// image's ring placement.
std::vector<LabeledImage> synth_corpus(std::size_t classes, std::size_t per_class, std::size_t height,
                                       std::size_t width, std::uint64_t seed, std::size_t first_signature = 0,
                                       const SynthOptions& options = {},
                                       std::vector<RingGeometry>* geometry = nullptr);

std::string synth_class_name(std::size_t signature_index);

// Per-channel mean and standard deviation over a set of images.
struct ChannelStats {
  std::vector<float> mean;
  std::vector<float> stddev;
};
ChannelStats channel_stats(const std::vector<LabeledImage>& images);

struct Batch {
  Tensor images;  // [n, 3, h, w]
  std::vector<std::size_t> labels;
};
Batch make_batch(const std::vector<LabeledImage>& images, std::span<const std::size_t> indices);
Batch make_batch(const std::vector<LabeledImage>& images);

}  // namespace irisnet
