#include "irisnet/image.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "irisnet/error.hpp"

namespace irisnet {

namespace {

class PnmReader {
 public:
  PnmReader(std::vector<unsigned char> bytes, std::string path) : bytes_(std::move(bytes)), path_(std::move(path)) {}

  [[noreturn]] void fail(const std::string& why) const {
    raise(ErrorCode::kUnreadableImage, path_ + ": " + why);
  }

  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else {
        break;
      }
    }
  }

  std::size_t read_uint() {
    skip_space_and_comments();
    if (pos_ >= bytes_.size() || !std::isdigit(bytes_[pos_])) fail("expected an integer");
    std::size_t v = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      v = v * 10 + static_cast<std::size_t>(bytes_[pos_] - '0');
      if (v > 1'000'000'000) fail("header value out of range");
      ++pos_;
    }
    return v;
  }

  Tensor decode() {
    if (bytes_.size() < 2 || bytes_[0] != 'P') fail("not a PNM file");
    const char kind = static_cast<char>(bytes_[1]);
    if (kind != '2' && kind != '3' && kind != '5' && kind != '6') fail(std::string("unsupported PNM type P") + kind);
    pos_ = 2;
    const std::size_t width = read_uint();
    const std::size_t height = read_uint();
    const std::size_t maxval = read_uint();
    if (width == 0 || height == 0) fail("empty image");
    if (maxval == 0 || maxval > 65535) fail("maxval must be in [1, 65535]");
    const std::size_t channels = (kind == '3' || kind == '6') ? 3 : 1;
    const std::size_t count = width * height * channels;
    std::vector<float> interleaved(count);
    const double scale = 1.0 / static_cast<double>(maxval);

    if (kind == '2' || kind == '3') {
      for (auto& v : interleaved) {
        const std::size_t raw = read_uint();
        if (raw > maxval) fail("sample exceeds maxval");
        v = static_cast<float>(static_cast<double>(raw) * scale);
      }
    } else {
      if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) fail("missing header terminator");
      ++pos_;
      const std::size_t bytes_per = maxval < 256 ? 1 : 2;
      if (bytes_.size() - pos_ < count * bytes_per) fail("truncated pixel data");
      for (std::size_t i = 0; i < count; ++i) {
        std::size_t raw = bytes_[pos_ + i * bytes_per];
        if (bytes_per == 2) raw = (raw << 8) | bytes_[pos_ + i * 2 + 1];
        if (raw > maxval) fail("sample exceeds maxval");
        interleaved[i] = static_cast<float>(static_cast<double>(raw) * scale);
      }
    }

    std::vector<float> planar(count);
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t x = 0; x < width; ++x) {
        for (std::size_t c = 0; c < channels; ++c) {
          planar[(c * height + y) * width + x] = interleaved[(y * width + x) * channels + c];
        }
      }
    }
    return Tensor({channels, height, width}, std::move(planar));
  }

 private:
  std::vector<unsigned char> bytes_;
  std::string path_;
  std::size_t pos_ = 0;
};

void require_image(const Tensor& image, const char* op) {
  if (image.rank() != 3) raise(ErrorCode::kShapeMismatch, std::string(op) + " expects [c,h,w]");
}

std::uint8_t quantize(float v) {
  const float c = std::clamp(v, 0.0f, 1.0f);
  return static_cast<std::uint8_t>(std::lround(c * 255.0f));
}

void write_bytes(const std::filesystem::path& path, const std::string& header, std::span<const std::uint8_t> body) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(header.data(), static_cast<std::streamsize>(header.size()));
  out.write(reinterpret_cast<const char*>(body.data()), static_cast<std::streamsize>(body.size()));
  if (!out) raise(ErrorCode::kIoFailure, "write failed: " + path.string());
}

}  // namespace

Tensor read_pnm(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kUnreadableImage, path.string() + ": cannot open");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return PnmReader(std::move(bytes), path.string()).decode();
}

void write_pnm(const std::filesystem::path& path, const Tensor& image) {
  require_image(image, "write_pnm");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (c != 1 && c != 3) raise(ErrorCode::kShapeMismatch, "write_pnm supports 1 or 3 channels");
  std::vector<std::uint8_t> body(c * h * w);
  const auto d = image.data();
  for (std::size_t y = 0; y < h; ++y) {
    for (std::size_t x = 0; x < w; ++x) {
      for (std::size_t ch = 0; ch < c; ++ch) body[(y * w + x) * c + ch] = quantize(d[(ch * h + y) * w + x]);
    }
  }
  const std::string header =
      std::string(c == 3 ? "P6" : "P5") + "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
  write_bytes(path, header, body);
}

void write_pgm(const std::filesystem::path& path, std::span<const std::uint8_t> gray, std::size_t height,
               std::size_t width) {
  if (gray.size() != height * width) raise(ErrorCode::kShapeMismatch, "write_pgm: size mismatch");
  write_bytes(path, "P5\n" + std::to_string(width) + " " + std::to_string(height) + "\n255\n", gray);
}

Tensor to_rgb(const Tensor& image) {
  require_image(image, "to_rgb");
  if (image.dim(0) == 3) return image.detach();
  if (image.dim(0) != 1) raise(ErrorCode::kShapeMismatch, "to_rgb expects 1 or 3 channels");
  const std::size_t plane = image.dim(1) * image.dim(2);
  std::vector<float> out(3 * plane);
  for (std::size_t c = 0; c < 3; ++c) std::copy(image.data().begin(), image.data().end(), out.begin() + c * plane);
  return Tensor({3, image.dim(1), image.dim(2)}, std::move(out));
}

Tensor resize_bilinear(const Tensor& image, std::size_t out_h, std::size_t out_w) {
  require_image(image, "resize_bilinear");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  if (h < 2 || w < 2) raise(ErrorCode::kInvalidGeometry, "resize_bilinear needs inputs of at least 2x2");
  if (out_h == 0 || out_w == 0) raise(ErrorCode::kInvalidGeometry, "resize_bilinear: empty output");

  struct Tap {
    std::size_t lo, hi;
    float frac;
  };
  const auto taps = [](std::size_t in, std::size_t out) {
    std::vector<Tap> t(out);
    const double scale = static_cast<double>(in) / static_cast<double>(out);
    for (std::size_t i = 0; i < out; ++i) {
      double src = (static_cast<double>(i) + 0.5) * scale - 0.5;
      src = std::clamp(src, 0.0, static_cast<double>(in - 1));
      const auto lo = static_cast<std::size_t>(std::floor(src));
      const std::size_t hi = std::min(lo + 1, in - 1);
      t[i] = {lo, hi, static_cast<float>(src - static_cast<double>(lo))};
    }
    return t;
  };
  const auto ty = taps(h, out_h);
  const auto tx = taps(w, out_w);

  const auto d = image.data();
  std::vector<float> out(c * out_h * out_w);
  for (std::size_t ch = 0; ch < c; ++ch) {
    const float* plane = d.data() + ch * h * w;
    for (std::size_t y = 0; y < out_h; ++y) {
      const float* r0 = plane + ty[y].lo * w;
      const float* r1 = plane + ty[y].hi * w;
      for (std::size_t x = 0; x < out_w; ++x) {
        const float a = r0[tx[x].lo], b = r0[tx[x].hi], p = r1[tx[x].lo], q = r1[tx[x].hi];
        // a + f * (b - a) keeps constant regions exact.
        const float top = a + tx[x].frac * (b - a);
        const float bottom = p + tx[x].frac * (q - p);
        const float v = top + ty[y].frac * (bottom - top);
        const float lo = std::min({a, b, p, q});
        const float hi = std::max({a, b, p, q});
        out[(ch * out_h + y) * out_w + x] = std::clamp(v, lo, hi);
      }
    }
  }
  return Tensor({c, out_h, out_w}, std::move(out));
}

Tensor flip_horizontal(const Tensor& image) {
  require_image(image, "flip_horizontal");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<float> out(image.numel());
  const auto d = image.data();
  for (std::size_t row = 0; row < c * h; ++row) {
    for (std::size_t x = 0; x < w; ++x) out[row * w + x] = d[row * w + (w - 1 - x)];
  }
  return Tensor(image.shape(), std::move(out));
}

Tensor pad_crop(const Tensor& image, std::size_t pad, std::size_t top, std::size_t left) {
  require_image(image, "pad_crop");
  if (top > 2 * pad || left > 2 * pad) raise(ErrorCode::kInvalidGeometry, "pad_crop offset outside padded image");
  const std::size_t c = image.dim(0), h = image.dim(1), w = image.dim(2);
  std::vector<float> out(image.numel(), 0.0f);
  const auto d = image.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t y = 0; y < h; ++y) {
      const auto sy = static_cast<std::ptrdiff_t>(y + top) - static_cast<std::ptrdiff_t>(pad);
      if (sy < 0 || sy >= static_cast<std::ptrdiff_t>(h)) continue;
      for (std::size_t x = 0; x < w; ++x) {
        const auto sx = static_cast<std::ptrdiff_t>(x + left) - static_cast<std::ptrdiff_t>(pad);
        if (sx < 0 || sx >= static_cast<std::ptrdiff_t>(w)) continue;
        out[(ch * h + y) * w + x] = d[(ch * h + static_cast<std::size_t>(sy)) * w + static_cast<std::size_t>(sx)];
      }
    }
  }
  return Tensor(image.shape(), std::move(out));
}

Tensor adjust_brightness(const Tensor& image, float delta) {
  std::vector<float> out(image.data().begin(), image.data().end());
  for (auto& v : out) v = std::clamp(v + delta, 0.0f, 1.0f);
  return Tensor(image.shape(), std::move(out));
}

}  // namespace irisnet
