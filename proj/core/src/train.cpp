#include "irisnet/train.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <ostream>

#include "irisnet/error.hpp"
#include "irisnet/loss.hpp"
#include "irisnet/optim.hpp"

namespace irisnet {

namespace {

constexpr std::size_t kEvalBatch = 64;

std::string format_g(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

std::vector<std::size_t> predictions(const Model& model, const std::vector<LabeledImage>& images) {
  std::vector<std::size_t> out;
  out.reserve(images.size());
  for (std::size_t start = 0; start < images.size(); start += kEvalBatch) {
    const std::size_t end = std::min(images.size(), start + kEvalBatch);
    std::vector<std::size_t> idx(end - start);
    std::iota(idx.begin(), idx.end(), start);
    const Batch batch = make_batch(images, idx);
    const auto pred = predict(model, batch.images);
    out.insert(out.end(), pred.begin(), pred.end());
  }
  return out;
}

}  // namespace

void validate(const TrainConfig& c) {
  const auto fail = [](const std::string& why) { raise(ErrorCode::kInvalidArgument, why); };
  if (c.epochs < 1) fail("epochs must be >= 1");
  if (c.batch_size < 2) fail("batch_size must be >= 2");
  if (!(c.learning_rate > 0.0)) fail("learning_rate must be > 0");
  if (!(c.lambda1 >= 0.0)) fail("lambda1 must be >= 0");
  if (c.adam_beta1 < 0.0 || c.adam_beta1 >= 1.0 || c.adam_beta2 < 0.0 || c.adam_beta2 >= 1.0) {
    fail("adam betas must be in [0,1)");
  }
  if (!(c.adam_eps > 0.0)) fail("adam_eps must be > 0");
}

double evaluate(const Model& model, const std::vector<LabeledImage>& images) {
  if (images.empty()) raise(ErrorCode::kEmptySplit, "cannot evaluate on an empty set");
  const auto pred = predictions(model, images);
  std::size_t correct = 0;
  for (std::size_t i = 0; i < images.size(); ++i) correct += pred[i] == images[i].class_id ? 1 : 0;
  return static_cast<double>(correct) / static_cast<double>(images.size());
}

std::vector<ClassTally> per_class_tally(const Model& model, const std::vector<LabeledImage>& images,
                                        std::size_t classes) {
  if (images.empty()) raise(ErrorCode::kEmptySplit, "cannot evaluate on an empty set");
  const auto pred = predictions(model, images);
  std::vector<ClassTally> tally(classes);
  for (std::size_t i = 0; i < images.size(); ++i) {
    auto& t = tally.at(images[i].class_id);
    ++t.total;
    t.correct += pred[i] == images[i].class_id ? 1 : 0;
  }
  return tally;
}

TrainResult train(Model model, const DatasetSplit& split, const TrainConfig& config) {
  validate(config);
  if (split.train.empty() || split.val.empty() || split.test.empty()) {
    raise(ErrorCode::kEmptySplit, "train, val and test partitions must all be non-empty");
  }
  const std::size_t classes = model.spec().head_classes;
  for (const auto* part : {&split.train, &split.val, &split.test}) {
    for (const auto& img : *part) {
      if (img.class_id >= classes) {
        raise(ErrorCode::kLabelOutOfRange, img.source_path + " has class " + std::to_string(img.class_id) +
                                               " but the model has " + std::to_string(classes) + " outputs");
      }
    }
  }
  const std::size_t n = split.train.size();
  const std::size_t batch_size = std::min(config.batch_size, n);
  if (batch_size < 2) raise(ErrorCode::kDegenerateBatch, "training set of " + std::to_string(n) + " image(s)");

  if (!config.freeze_prefixes.empty()) model.freeze(config.freeze_prefixes);
  if (config.fit_input_normalization) {
    const ChannelStats stats = channel_stats(split.train);
    auto mean = model.tensor("input.mean").mutable_data();
    auto sd = model.tensor("input.std").mutable_data();
    std::copy(stats.mean.begin(), stats.mean.end(), mean.begin());
    std::copy(stats.stddev.begin(), stats.stddev.end(), sd.begin());
  }

  const NamedTensors params = trainable_parameters(model);
  AdamState adam;
  const AdamConfig adam_config{config.learning_rate, config.adam_beta1, config.adam_beta2, config.adam_eps};
  const float lambda1 = static_cast<float>(config.lambda1);

  TrainResult result;
  Model best = model;
  double best_acc = -1.0;
  std::vector<std::size_t> order(n);
  std::vector<LabeledImage> augmented;
  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle_rng(derive_seed(config.seed, "shuffle", epoch));
    shuffle_rng.shuffle(order);

    const std::vector<LabeledImage>* source = &split.train;
    if (!config.augment.empty()) {
      augmented.clear();
      augmented.reserve(n);
      for (std::size_t i = 0; i < n; ++i) {
        Rng rng(derive_seed(config.seed, "augment", epoch * n + i));
        augmented.push_back(augment(split.train[i], config.augment, rng));
      }
      source = &augmented;
    }

    double loss_sum = 0.0;
    std::size_t steps = 0;
    for (std::size_t start = 0; start + batch_size <= n; start += batch_size) {
      const std::span<const std::size_t> idx(order.data() + start, batch_size);
      const Batch batch = make_batch(*source, idx);
      const Tensor logits = model.forward(batch.images, true);
      const Tensor loss = final_loss(logits, std::span<const std::size_t>(batch.labels), model.head_weight(), lambda1);
      loss.backward();
      if (config.optimizer == OptimizerKind::kAdam) {
        adam_step(params, adam, adam_config);
      } else {
        sgd_step(params, config.learning_rate);
      }
      zero_grads(params);
      loss_sum += static_cast<double>(loss.item());
      ++steps;
    }

    EpochRecord rec;
    rec.epoch = epoch;
    rec.train_loss = loss_sum / static_cast<double>(steps);
    rec.val_accuracy = evaluate(model, split.val);
    result.report.epochs.push_back(rec);
    if (rec.val_accuracy > best_acc) {
      best_acc = rec.val_accuracy;
      best = model;
      result.report.best_epoch = epoch;
      result.report.best_val_accuracy = rec.val_accuracy;
    }
    if (config.log) {
      *config.log << "epoch " << epoch << "/" << config.epochs << " train_loss=" << format_g(rec.train_loss, 6)
                  << " val_acc=" << format_g(rec.val_accuracy, 6) << '\n';
    }
  }

  result.model = std::move(best);
  result.report.test_accuracy = evaluate(result.model, split.test);
  if (config.log) {
    *config.log << "best_epoch=" << result.report.best_epoch
                << " best_val_acc=" << format_g(result.report.best_val_accuracy, 6)
                << " test_acc=" << format_g(result.report.test_accuracy, 6) << '\n';
  }
  return result;
}

std::string report_csv(const TrainReport& report) {
  std::string out = "epoch,train_loss,val_acc\n";
  for (const auto& e : report.epochs) {
    out += std::to_string(e.epoch) + "," + format_g(e.train_loss, 9) + "," + format_g(e.val_accuracy, 9) + "\n";
  }
  return out;
}

std::string report_log(const TrainReport& report) {
  std::string out;
  for (const auto& e : report.epochs) {
    out += "epoch=" + std::to_string(e.epoch) + " train_loss=" + format_g(e.train_loss, 9) +
           " val_acc=" + format_g(e.val_accuracy, 9) + "\n";
  }
  out += "best_epoch=" + std::to_string(report.best_epoch) + "\n";
  out += "best_val_accuracy=" + format_g(report.best_val_accuracy, 9) + "\n";
  out += "test_accuracy=" + format_g(report.test_accuracy, 9) + "\n";
  return out;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) raise(ErrorCode::kIoFailure, "cannot open " + path.string() + " for writing");
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  if (!out) raise(ErrorCode::kIoFailure, "write failed: " + path.string());
}

}  // namespace irisnet
