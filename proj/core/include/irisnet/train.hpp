#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "irisnet/data.hpp"
#include "irisnet/model.hpp"

namespace irisnet {

enum class OptimizerKind { kAdam, kSgd };

struct TrainConfig {
  std::size_t epochs = 100;
  std::size_t batch_size = 24;
  double learning_rate = 0.0002;
  double lambda1 = 1e-4;  // weight of ||W_fc||_F^2
  OptimizerKind optimizer = OptimizerKind::kAdam;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  std::uint64_t seed = 42;
  std::vector<std::string> freeze_prefixes;
  AugmentPolicy augment;
  // Refit input standardization on the training split. Fine-tuning keeps the
  // source model's statistics instead.
  bool fit_input_normalization = true;
  std::ostream* log = nullptr;
};

// InvalidArgument when a field is out of range.
void validate(const TrainConfig& config);

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based
  double train_loss = 0.0;
  double val_accuracy = 0.0;

  bool operator==(const EpochRecord&) const = default;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;
  double best_val_accuracy = 0.0;
  double test_accuracy = 0.0;

  bool operator==(const TrainReport&) const = default;
};

struct TrainResult {
  Model model;  // parameters from the best validation epoch
  TrainReport report;
};

// Seeded shuffle each epoch, incomplete trailing batch dropped, validation
// accuracy after every epoch, and the snapshot with the highest validation
// accuracy (earliest on ties) returned and scored on the test split.
TrainResult train(Model model, const DatasetSplit& split, const TrainConfig& config);

// Fraction of images whose argmax prediction equals the label.
double evaluate(const Model& model, const std::vector<LabeledImage>& images);

struct ClassTally {
  std::size_t correct = 0;
  std::size_t total = 0;
};
std::vector<ClassTally> per_class_tally(const Model& model, const std::vector<LabeledImage>& images,
                                        std::size_t classes);

// `epoch,train_loss,val_acc` table.
std::string report_csv(const TrainReport& report);
// Plain text, one `key=value` fact per line.
std::string report_log(const TrainReport& report);
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace irisnet
