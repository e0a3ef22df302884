#include "irisnet/store.hpp"

#include <zlib.h>

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <system_error>

#include "irisnet/error.hpp"

namespace irisnet {

static_assert(std::endian::native == std::endian::little, "weight files assume a little-endian host");
static_assert(sizeof(float) == 4 && std::numeric_limits<float>::is_iec559);

namespace {

class Writer {
 public:
  void u32(std::uint32_t v) { raw(&v, 4); }
  void u64(std::uint64_t v) { raw(&v, 8); }
  void text(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    raw(s.data(), s.size());
  }
  void raw(const void* p, std::size_t n) {
    const auto* b = static_cast<const std::uint8_t*>(p);
    out.insert(out.end(), b, b + n);
  }
  std::vector<std::uint8_t> out;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  std::uint32_t u32() {
    std::uint32_t v;
    std::memcpy(&v, take(4), 4);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v;
    std::memcpy(&v, take(8), 8);
    return v;
  }
  std::string text() {
    const std::uint32_t n = u32();
    const auto* p = take(n);
    return std::string(reinterpret_cast<const char*>(p), n);
  }
  const std::uint8_t* take(std::size_t n) {
    if (n > bytes_.size() - pos_) raise(ErrorCode::kCorruptPayload, "weight file ends early");
    const auto* p = bytes_.data() + pos_;
    pos_ += n;
    return p;
  }
  std::size_t remaining() const { return bytes_.size() - pos_; }

 private:
  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

std::uint32_t crc_of(std::span<const std::uint8_t> bytes) {
  uLong crc = crc32(0L, Z_NULL, 0);
  std::size_t pos = 0;
  while (pos < bytes.size()) {
    const auto chunk = static_cast<uInt>(std::min<std::size_t>(bytes.size() - pos, 1u << 30));
    crc = crc32(crc, bytes.data() + pos, chunk);
    pos += chunk;
  }
  return static_cast<std::uint32_t>(crc);
}

}  // namespace

std::vector<std::uint8_t> serialize(const Model& model) {
  Writer w;
  w.raw(kWeightFileMagic.data(), kWeightFileMagic.size());
  w.u32(kWeightFileVersion);
  w.text(to_config_text(model.spec()));
  // std::map already orders names bytewise.
  w.u32(static_cast<std::uint32_t>(model.tensors().size()));
  for (const auto& [name, t] : model.tensors()) {
    w.text(name);
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (const auto d : t.shape()) w.u64(d);
    const auto data = t.data();
    w.raw(data.data(), data.size() * sizeof(float));
  }
  const std::uint32_t crc = crc_of(w.out);
  w.u32(crc);
  return std::move(w.out);
}

Model deserialize(std::span<const std::uint8_t> bytes) {
  const std::size_t magic_len = kWeightFileMagic.size();
  const std::size_t head = std::min(bytes.size(), magic_len);
  if (std::memcmp(bytes.data(), kWeightFileMagic.data(), head) != 0) {
    raise(ErrorCode::kBadMagic, "not an irisnet weight file");
  }
  if (bytes.size() < magic_len + 8) raise(ErrorCode::kCorruptPayload, "weight file truncated");

  Reader r(bytes.subspan(magic_len));
  const std::uint32_t version = r.u32();
  if (version != kWeightFileVersion) {
    raise(ErrorCode::kVersionUnsupported, "weight file version " + std::to_string(version));
  }
  const auto body = bytes.first(bytes.size() - 4);
  std::uint32_t stored_crc;
  std::memcpy(&stored_crc, bytes.data() + body.size(), 4);
  if (crc_of(body) != stored_crc) raise(ErrorCode::kCorruptPayload, "CRC32 mismatch");

  Reader rec(body.subspan(magic_len + 4));
  ModelSpec spec;
  try {
    spec = parse_model_spec(rec.text());
  } catch (const Error& e) {
    raise(ErrorCode::kSpecMismatch, std::string("embedded spec is invalid: ") + e.what());
  }
  const std::uint32_t count = rec.u32();
  Model::TensorMap tensors;
  std::string previous;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name = rec.text();
    if (i > 0 && name <= previous) raise(ErrorCode::kCorruptPayload, "records not sorted or duplicated: " + name);
    const std::uint32_t rank = rec.u32();
    if (rank == 0 || rank > 8) raise(ErrorCode::kCorruptPayload, name + ": bad rank");
    Shape shape(rank);
    std::size_t numel = 1;
    for (auto& d : shape) {
      d = rec.u64();
      if (d == 0 || d > rec.remaining() || numel > rec.remaining() / d) {
        raise(ErrorCode::kCorruptPayload, name + ": bad dimension");
      }
      numel *= d;
    }
    if (numel > rec.remaining() / sizeof(float)) raise(ErrorCode::kCorruptPayload, name + ": payload truncated");
    std::vector<float> data(numel);
    std::memcpy(data.data(), rec.take(numel * sizeof(float)), numel * sizeof(float));
    tensors.emplace(name, Tensor(std::move(shape), std::move(data)));
    previous = std::move(name);
  }
  if (rec.remaining() != 0) raise(ErrorCode::kCorruptPayload, "trailing bytes after the last record");
  return Model(std::move(spec), std::move(tensors));
}

void save(const Model& model, const std::filesystem::path& path) {
  const auto bytes = serialize(model);
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) raise(ErrorCode::kIoFailure, "cannot open " + tmp.string() + " for writing");
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      std::error_code ignored;
      std::filesystem::remove(tmp, ignored);
      raise(ErrorCode::kIoFailure, "write failed: " + tmp.string());
    }
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    raise(ErrorCode::kIoFailure, "cannot move weight file into " + path.string() + ": " + ec.message());
  }
}

Model load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) raise(ErrorCode::kIoFailure, "cannot open " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) raise(ErrorCode::kIoFailure, "read failed: " + path.string());
  return deserialize(bytes);
}

std::size_t weight_file_size(const ModelSpec& spec) {
  std::size_t size = kWeightFileMagic.size() + 4 + 4 + to_config_text(spec).size() + 4;
  for (const auto& d : declare_tensors(spec)) {
    size += 4 + d.name.size() + 4 + 8 * d.shape.size() + 4 * shape_numel(d.shape);
  }
  return size + 4;
}

Model freeze(Model model, const std::vector<std::string>& prefixes) {
  model.freeze(prefixes);
  return model;
}

std::string_view freeze_mode_name(FreezeMode mode) noexcept {
  return mode == FreezeMode::kFeatureExtractor ? "feature_extractor" : "full_finetune";
}

FreezeMode parse_freeze_mode(std::string_view text) {
  if (text == "feature_extractor") return FreezeMode::kFeatureExtractor;
  if (text == "full_finetune") return FreezeMode::kFullFinetune;
  raise(ErrorCode::kInvalidArgument,
        "unknown freeze mode '" + std::string(text) + "' (expected feature_extractor or full_finetune)");
}

std::vector<std::string> backbone_parameter_names(const Model& model) {
  std::vector<std::string> names;
  for (auto& n : model.parameter_names()) {
    if (!n.starts_with("head.")) names.push_back(std::move(n));
  }
  return names;
}

Model transfer(const Model& pretrained, std::size_t new_classes, FreezeMode mode, std::uint64_t seed) {
  Model model = replace_head(pretrained, new_classes, seed);
  model.unfreeze_all();
  if (mode == FreezeMode::kFeatureExtractor) model.freeze(backbone_parameter_names(model));
  return model;
}

Model transfer(const std::filesystem::path& pretrained_path, std::size_t new_classes, FreezeMode mode,
               std::uint64_t seed) {
  return transfer(load(pretrained_path), new_classes, mode, seed);
}

}  // namespace irisnet
