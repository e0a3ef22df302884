#include "irisnet/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numbers>
#include <sstream>

#include "irisnet/error.hpp"
#include "irisnet/image.hpp"

namespace irisnet {

namespace fs = std::filesystem;

namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return s;
}

bool is_pnm_extension(const std::string& ext) { return ext == ".ppm" || ext == ".pgm" || ext == ".pnm"; }

bool is_foreign_raster(const std::string& ext) {
  return ext == ".png" || ext == ".jpg" || ext == ".jpeg" || ext == ".bmp" || ext == ".tif" || ext == ".tiff" ||
         ext == ".gif";
}

std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
  std::string out = "\"";
  for (const char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
        cur += '"';
        ++i;
      } else if (c == '"') {
        quoted = false;
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      fields.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  fields.push_back(std::move(cur));
  return fields;
}

}  // namespace

Corpus load_corpus(const fs::path& root, bool skip_unreadable) {
  std::error_code ec;
  if (!fs::is_directory(root, ec)) raise(ErrorCode::kEmptyCorpus, "data root not found: " + root.string());

  std::vector<fs::path> class_dirs;
  for (const auto& entry : fs::directory_iterator(root)) {
    if (entry.is_directory() && entry.path().filename().string().front() != '.') class_dirs.push_back(entry.path());
  }
  std::sort(class_dirs.begin(), class_dirs.end(),
            [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });

  Corpus corpus;
  for (std::size_t id = 0; id < class_dirs.size(); ++id) {
    corpus.class_names.push_back(class_dirs[id].filename().string());
    std::vector<fs::path> files;
    for (const auto& entry : fs::directory_iterator(class_dirs[id])) {
      if (entry.is_regular_file()) files.push_back(entry.path());
    }
    std::sort(files.begin(), files.end(),
              [](const fs::path& a, const fs::path& b) { return a.filename().string() < b.filename().string(); });
    for (const auto& file : files) {
      const std::string ext = lower(file.extension().string());
      try {
        if (is_foreign_raster(ext)) {
          raise(ErrorCode::kUnreadableImage, file.string() + ": unsupported format, convert to PPM/PGM first");
        }
        if (!is_pnm_extension(ext)) continue;
        corpus.images.push_back({to_rgb(read_pnm(file)), id, file.string()});
      } catch (const Error& e) {
        if (e.code() != ErrorCode::kUnreadableImage || !skip_unreadable) throw;
      }
    }
  }
  if (corpus.images.empty()) raise(ErrorCode::kEmptyCorpus, "no images found under " + root.string());
  return corpus;
}

std::vector<LabeledImage> resize_all(std::vector<LabeledImage> images, std::size_t size) {
  for (auto& img : images) {
    if (img.pixels.dim(1) != size || img.pixels.dim(2) != size) img.pixels = resize_bilinear(img.pixels, size, size);
  }
  return images;
}

std::string_view partition_name(Partition p) noexcept {
  switch (p) {
    case Partition::kTrain: return "train";
    case Partition::kVal: return "val";
    case Partition::kTest: return "test";
  }
  return "train";
}

DatasetSplit make_split(const std::vector<LabeledImage>& images, std::size_t k_test, double val_fraction,
                        std::uint64_t seed) {
  if (images.empty()) raise(ErrorCode::kEmptySplit, "cannot split an empty image list");
  if (val_fraction < 0.0 || val_fraction >= 1.0) raise(ErrorCode::kInvalidArgument, "val_fraction must be in [0,1)");
  std::size_t classes = 0;
  for (const auto& img : images) classes = std::max(classes, img.class_id + 1);
  std::vector<std::vector<std::size_t>> members(classes);
  for (std::size_t i = 0; i < images.size(); ++i) members[images[i].class_id].push_back(i);

  DatasetSplit split;
  split.class_count = classes;
  split.seed = seed;
  for (std::size_t c = 0; c < classes; ++c) {
    auto& idx = members[c];
    const std::size_t remainder = idx.size() > k_test ? idx.size() - k_test : 0;
    const auto val_count = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(val_fraction * static_cast<double>(remainder) - 1e-9)));
    if (idx.size() <= k_test || remainder <= val_count) {
      const std::string name = idx.empty() ? "#" + std::to_string(c) : fs::path(images[idx[0]].source_path).parent_path().filename().string();
      raise(ErrorCode::kInsufficientClassSamples,
            "class " + std::to_string(c) + " (" + name + ") has " + std::to_string(idx.size()) +
                " images; needs at least " + std::to_string(k_test + 2) + " for k_test=" + std::to_string(k_test));
    }
    Rng rng(derive_seed(seed, "split", c));
    rng.shuffle(idx);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const auto& img = images[idx[i]];
      if (i < k_test) {
        split.test.push_back(img);
      } else if (i < k_test + val_count) {
        split.val.push_back(img);
      } else {
        split.train.push_back(img);
      }
    }
  }
  return split;
}

void write_split_manifest(const fs::path& path, const DatasetSplit& split) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) raise(ErrorCode::kIoFailure, "cannot write manifest " + path.string());
  out << "source_path,class_id,partition\n";
  const auto emit = [&](const std::vector<LabeledImage>& part, Partition p) {
    for (const auto& img : part) out << csv_field(img.source_path) << ',' << img.class_id << ',' << partition_name(p) << '\n';
  };
  emit(split.train, Partition::kTrain);
  emit(split.val, Partition::kVal);
  emit(split.test, Partition::kTest);
  if (!out) raise(ErrorCode::kIoFailure, "write failed: " + path.string());
}

DatasetSplit read_split_manifest(const fs::path& path, const std::vector<LabeledImage>& images) {
  std::ifstream in(path);
  if (!in) raise(ErrorCode::kIoFailure, "cannot read manifest " + path.string());
  std::map<std::string, const LabeledImage*> by_path;
  std::size_t classes = 0;
  for (const auto& img : images) {
    by_path.emplace(img.source_path, &img);
    classes = std::max(classes, img.class_id + 1);
  }

  DatasetSplit split;
  split.class_count = classes;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 && line.starts_with("source_path,")) continue;
    if (line.empty() || line == "\r") continue;
    const auto fields = split_csv_line(line);
    if (fields.size() != 3) {
      raise(ErrorCode::kManifestMismatch, path.string() + ":" + std::to_string(line_no) + ": expected 3 fields");
    }
    const auto it = by_path.find(fields[0]);
    if (it == by_path.end()) raise(ErrorCode::kManifestMismatch, "manifest lists unknown image " + fields[0]);
    if (std::to_string(it->second->class_id) != fields[1]) {
      raise(ErrorCode::kManifestMismatch, "class id mismatch for " + fields[0]);
    }
    if (fields[2] == "train") {
      split.train.push_back(*it->second);
    } else if (fields[2] == "val") {
      split.val.push_back(*it->second);
    } else if (fields[2] == "test") {
      split.test.push_back(*it->second);
    } else {
      raise(ErrorCode::kManifestMismatch, "unknown partition '" + fields[2] + "'");
    }
  }
  return split;
}

AugmentPolicy parse_augment_policy(std::string_view text) {
  AugmentPolicy policy;
  if (text.empty() || text == "none") return policy;
  std::string item;
  std::istringstream is{std::string(text)};
  while (std::getline(is, item, ',')) {
    if (item == "flip") {
      policy.flip = true;
    } else if (item == "crop") {
      policy.crop = true;
    } else if (item == "brightness") {
      policy.brightness = true;
    } else {
      raise(ErrorCode::kInvalidArgument, "unknown augmentation '" + item + "'");
    }
  }
  return policy;
}

LabeledImage augment(const LabeledImage& image, const AugmentPolicy& policy, Rng& rng) {
  LabeledImage out = image;
  if (policy.empty()) return out;
  Tensor px = image.pixels;
  if (policy.flip && rng.bernoulli(policy.flip_probability)) px = flip_horizontal(px);
  if (policy.crop) {
    const auto span = static_cast<std::int64_t>(2 * policy.crop_pad);
    const auto top = static_cast<std::size_t>(rng.uniform_int(0, span));
    const auto left = static_cast<std::size_t>(rng.uniform_int(0, span));
    px = pad_crop(px, policy.crop_pad, top, left);
  }
  if (policy.brightness) {
    px = adjust_brightness(px, static_cast<float>(rng.uniform(-policy.brightness_delta, policy.brightness_delta)));
  }
  out.pixels = px;
  return out;
}

namespace {
constexpr std::array<float, 3> kTints[] = {
    {0.85f, 0.55f, 0.30f},  // brown
    {0.35f, 0.55f, 0.95f},  // blue
    {0.40f, 0.85f, 0.45f},  // green
    {0.70f, 0.70f, 0.70f},  // gray
    {0.70f, 0.40f, 0.90f},  // violet
    {0.95f, 0.85f, 0.30f},  // amber
};
constexpr std::size_t kTintCount = std::size(kTints);

struct RingPattern {
  int angular_frequency;
  double angular_amplitude;
  double radial_cycles;
  double radial_amplitude;
};
constexpr RingPattern kPatterns[] = {
    {0, 0.0, 0.0, 0.0},  // flat
    {4, 0.3, 0.0, 0.0},  // 4 spokes
    {0, 0.0, 2.0, 0.3},  // 2 concentric bands
    {8, 0.3, 0.0, 0.0},  // 8 spokes
    {4, 0.2, 2.0, 0.2},  // spokes crossed with bands
    {0, 0.0, 1.0, 0.3},  // one band, light to dark
};
}  // namespace

std::size_t ring_signature_count() noexcept { return kTintCount * std::size(kPatterns); }

RingSignature ring_signature(std::size_t index) {
  if (index >= ring_signature_count()) {
    raise(ErrorCode::kInvalidArgument, "only " + std::to_string(ring_signature_count()) + " ring signatures exist");
  }
  const RingPattern& p = kPatterns[index / kTintCount];
  RingSignature s;
  s.tint = kTints[index % kTintCount];
  s.angular_frequency = p.angular_frequency;
  s.angular_amplitude = p.angular_amplitude;
  s.radial_cycles = p.radial_cycles;
  s.radial_amplitude = p.radial_amplitude;
  return s;
}

std::string synth_class_name(std::size_t signature_index) {
  std::string digits = std::to_string(signature_index);
  while (digits.size() < 3) digits.insert(digits.begin(), '0');
  return "class_" + digits;
}

std::vector<LabeledImage> synth_corpus(std::size_t classes, std::size_t per_class, std::size_t height,
                                       std::size_t width, std::uint64_t seed, std::size_t first_signature,
                                       const SynthOptions& options, std::vector<RingGeometry>* geometry) {
  if (classes < 2) raise(ErrorCode::kInvalidArgument, "synth_corpus needs at least 2 classes");
  if (per_class == 0) raise(ErrorCode::kInvalidArgument, "synth_corpus needs per_class >= 1");
  if (height < 16 || width < 16) raise(ErrorCode::kInvalidGeometry, "synth_corpus images must be at least 16x16");
  if (first_signature + classes > ring_signature_count()) {
    raise(ErrorCode::kInvalidArgument, "not enough distinct ring signatures for " + std::to_string(classes) +
                                           " classes starting at " + std::to_string(first_signature));
  }
  constexpr float kBackground = 0.08f;
  constexpr float kPupil = 0.02f;
  if (options.noise_sigma < 0.0 || options.jitter < 0 || options.dilation < 0.0 || options.dilation >= 1.0 ||
      options.gain_spread < 0.0 || options.gain_spread >= 1.0) {
    raise(ErrorCode::kInvalidArgument, "synth_corpus: variation settings out of range");
  }

  const double side = static_cast<double>(std::min(height, width));
  const double base_inner = 0.15 * side;
  const double outer = 0.36 * side;
  const std::size_t plane = height * width;

  std::vector<LabeledImage> out;
  out.reserve(classes * per_class);
  if (geometry) geometry->clear();
  for (std::size_t c = 0; c < classes; ++c) {
    const RingSignature sig = ring_signature(first_signature + c);
    const std::string name = synth_class_name(first_signature + c);
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, "synth", (first_signature + c) * per_class + i));
      const double cy = static_cast<double>(height - 1) / 2.0 +
                        static_cast<double>(rng.uniform_int(-options.jitter, options.jitter));
      const double cx = static_cast<double>(width - 1) / 2.0 +
                        static_cast<double>(rng.uniform_int(-options.jitter, options.jitter));
      const double inner = base_inner * rng.uniform(1.0 - options.dilation, 1.0 + options.dilation);
      const double gain = rng.uniform(1.0 - options.gain_spread, 1.0 + options.gain_spread);
      std::vector<float> gray(plane);
      std::vector<std::uint8_t> in_ring(plane, 0);
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t x = 0; x < width; ++x) {
          const double dy = static_cast<double>(y) - cy;
          const double dx = static_cast<double>(x) - cx;
          const double rho = std::hypot(dy, dx);
          double v = kBackground;
          if (rho < inner) {
            v = kPupil;
          } else if (rho <= outer) {
            const double t = (rho - inner) / (outer - inner);
            const double theta = std::atan2(dy, dx);
            v = 0.6 + sig.radial_amplitude * std::cos(2.0 * std::numbers::pi * sig.radial_cycles * t) +
                sig.angular_amplitude * std::cos(static_cast<double>(sig.angular_frequency) * theta);
            in_ring[y * width + x] = 1;
          }
          gray[y * width + x] = static_cast<float>(v);
        }
      }
      std::vector<float> pixels(3 * plane);
      for (std::size_t ch = 0; ch < 3; ++ch) {
        for (std::size_t p = 0; p < plane; ++p) {
          const double base = in_ring[p] ? gain * sig.tint[ch] * gray[p] : gray[p];
          const double v = base + options.noise_sigma * rng.normal();
          pixels[ch * plane + p] = static_cast<float>(std::clamp(v, 0.0, 1.0));
        }
      }
      std::string index = std::to_string(i);
      while (index.size() < 3) index.insert(index.begin(), '0');
      out.push_back({Tensor({3, height, width}, std::move(pixels)), c, "synth/" + name + "/img_" + index + ".ppm"});
      if (geometry) geometry->push_back({cy, cx, inner, outer});
    }
  }
  return out;
}

ChannelStats channel_stats(const std::vector<LabeledImage>& images) {
  if (images.empty()) raise(ErrorCode::kEmptySplit, "channel_stats of an empty image list");
  const std::size_t channels = images.front().pixels.dim(0);
  std::vector<double> sum(channels, 0.0), sq(channels, 0.0);
  double count = 0.0;
  for (const auto& img : images) {
    const std::size_t plane = img.pixels.dim(1) * img.pixels.dim(2);
    const auto d = img.pixels.data();
    for (std::size_t c = 0; c < channels; ++c) {
      for (std::size_t p = 0; p < plane; ++p) {
        const double v = d[c * plane + p];
        sum[c] += v;
        sq[c] += v * v;
      }
    }
    count += static_cast<double>(plane);
  }
  ChannelStats stats;
  for (std::size_t c = 0; c < channels; ++c) {
    const double mu = sum[c] / count;
    const double var = std::max(0.0, sq[c] / count - mu * mu);
    const double sd = std::sqrt(var);
    stats.mean.push_back(static_cast<float>(mu));
    stats.stddev.push_back(sd > 1e-6 ? static_cast<float>(sd) : 1.0f);
  }
  return stats;
}

Batch make_batch(const std::vector<LabeledImage>& images, std::span<const std::size_t> indices) {
  if (indices.empty()) raise(ErrorCode::kEmptySplit, "empty batch");
  const Shape& s = images[indices[0]].pixels.shape();
  const std::size_t per = shape_numel(s);
  std::vector<float> data(per * indices.size());
  Batch batch;
  batch.labels.reserve(indices.size());
  for (std::size_t i = 0; i < indices.size(); ++i) {
    const auto& img = images[indices[i]];
    if (img.pixels.shape() != s) raise(ErrorCode::kShapeMismatch, "batch images must share a shape");
    std::copy(img.pixels.data().begin(), img.pixels.data().end(), data.begin() + static_cast<std::ptrdiff_t>(i * per));
    batch.labels.push_back(img.class_id);
  }
  batch.images = Tensor({indices.size(), s[0], s[1], s[2]}, std::move(data));
  return batch;
}

Batch make_batch(const std::vector<LabeledImage>& images) {
  std::vector<std::size_t> idx(images.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  return make_batch(images, idx);
}

}  // namespace irisnet
