#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "irisnet/model.hpp"

namespace irisnet {

inline constexpr std::string_view kWeightFileMagic = "IRISNET1";
inline constexpr std::uint32_t kWeightFileVersion = 1;

// Layout (all integers little-endian):
//   magic[8] version:u32 spec_len:u32 spec[spec_len] record_count:u32
//   record* crc32:u32
//   record = name_len:u32 name rank:u32 dims:u64[rank] f32[prod(dims)]
// Records hold every model tensor (parameters, batchnorm running statistics,
// input standardization) sorted bytewise by name. The CRC covers all bytes
// before it. Frozen flags are not stored.
std::vector<std::uint8_t> serialize(const Model& model);
Model deserialize(std::span<const std::uint8_t> bytes);

// Writes through a temporary file in the same directory and renames it into
// place. IoFailure on any filesystem error.
void save(const Model& model, const std::filesystem::path& path);
Model load(const std::filesystem::path& path);

// Exact size of serialize(model) computed from the spec alone.
std::size_t weight_file_size(const ModelSpec& spec);

// Copy of `model` with `prefixes` added to its frozen set.
Model freeze(Model model, const std::vector<std::string>& prefixes);

enum class FreezeMode { kFeatureExtractor, kFullFinetune };
std::string_view freeze_mode_name(FreezeMode mode) noexcept;
// "feature_extractor" or "full_finetune"; InvalidArgument otherwise.
FreezeMode parse_freeze_mode(std::string_view text);

// Names of every trainable parameter outside the classifier head.
std::vector<std::string> backbone_parameter_names(const Model& model);

// load -> replace_head(new_classes) -> freeze everything but the head
// (feature_extractor) or nothing (full_finetune).
Model transfer(const Model& pretrained, std::size_t new_classes, FreezeMode mode, std::uint64_t seed);
Model transfer(const std::filesystem::path& pretrained_path, std::size_t new_classes, FreezeMode mode,
               std::uint64_t seed);

}  // namespace irisnet
