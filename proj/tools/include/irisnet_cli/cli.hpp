#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "irisnet/error.hpp"
#include "irisnet/saliency.hpp"
#include "irisnet/store.hpp"
#include "irisnet/train.hpp"

namespace irisnet::cli {

enum ExitCode : int {
  kExitOk = 0,
  kExitInternal = 1,
  kExitConfig = 2,
  kExitData = 3,
  kExitIo = 4,
};

// Maps a library error to the process exit status.
int exit_code_for(ErrorCode code) noexcept;

struct SynthOptions {
  std::size_t classes = 20;
  std::size_t per_class = 10;
  std::size_t size = 32;
  std::size_t first_class = 0;
};

struct RunConfig {
  std::string command;
  std::filesystem::path data_root;
  std::optional<std::filesystem::path> weights_in;
  std::optional<std::filesystem::path> weights_out;
  std::optional<std::filesystem::path> split_manifest;
  std::filesystem::path out_dir = ".";
  std::string model_variant = "resnet_micro";
  std::size_t k_test = 4;
  double val_fraction = 0.2;
  FreezeMode freeze_mode = FreezeMode::kFullFinetune;
  TrainConfig train;
  OcclusionConfig occlusion;
  std::optional<std::size_t> label;  // saliency: true class, else the base prediction
  std::vector<std::filesystem::path> images;
  SynthOptions synth;
};

int cmd_pretrain(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_finetune(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_saliency(const RunConfig& cfg, std::ostream& out, std::ostream& log);
int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& log);

// Parses argv and dispatches. Errors are reported on `err` and mapped to the
// fixed exit codes.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace irisnet::cli
