#include <doctest.h>

#include <algorithm>
#include <numeric>
#include <sstream>

#include "error_check.hpp"
#include "irisnet/train.hpp"
#include "test_support.hpp"

using namespace irisnet;
using irisnet::testing::bit_equal;
using irisnet::testing::TempDir;

namespace {

// Three classes of solid colour plus pixel noise: separable by channel means.
std::vector<LabeledImage> separable_set(std::size_t per_class, std::uint64_t seed) {
  const float colours[3][3] = {{0.8f, 0.2f, 0.2f}, {0.2f, 0.8f, 0.2f}, {0.2f, 0.2f, 0.8f}};
  std::vector<LabeledImage> out;
  for (std::size_t c = 0; c < 3; ++c) {
    for (std::size_t i = 0; i < per_class; ++i) {
      Rng rng(derive_seed(seed, "separable", c * per_class + i));
      std::vector<float> px(3 * 32 * 32);
      for (std::size_t ch = 0; ch < 3; ++ch)
        for (std::size_t p = 0; p < 1024; ++p)
          px[ch * 1024 + p] = std::clamp(colours[c][ch] + 0.05f * float(rng.normal()), 0.0f, 1.0f);
      out.push_back({Tensor({3, 32, 32}, std::move(px)), c, "sep/" + std::to_string(c) + "/" + std::to_string(i)});
    }
  }
  return out;
}

TrainConfig quick_config(std::size_t epochs) {
  TrainConfig cfg;
  cfg.epochs = epochs;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-3;
  cfg.seed = 5;
  return cfg;
}

bool same_parameters(const Model& a, const Model& b, const std::string& skip_prefix) {
  for (const auto& name : a.parameter_names()) {
    if (!skip_prefix.empty() && name.starts_with(skip_prefix)) continue;
    if (!bit_equal(a.tensor(name).data(), b.tensor(name).data())) return false;
  }
  return true;
}

}  // namespace

TEST_CASE("TrainConfig defaults follow the paper recipe") {
  const TrainConfig cfg;
  CHECK(cfg.epochs == 100);
  CHECK(cfg.batch_size == 24);
  CHECK(cfg.learning_rate == 0.0002);
  CHECK(cfg.lambda1 == 1e-4);
  CHECK(cfg.optimizer == OptimizerKind::kAdam);
  CHECK(cfg.adam_beta1 == 0.9);
  CHECK(cfg.adam_beta2 == 0.999);
  CHECK(cfg.adam_eps == 1e-8);
  CHECK_NOTHROW(validate(cfg));
}

TEST_CASE("TrainConfig validation") {
  const auto bad = [](auto mutate) {
    TrainConfig c;
    mutate(c);
    return ::irisnet::testing::error_of([&] { validate(c); });
  };
  CHECK(bad([](TrainConfig& c) { c.epochs = 0; }) == ErrorCode::kInvalidArgument);
  CHECK(bad([](TrainConfig& c) { c.batch_size = 1; }) == ErrorCode::kInvalidArgument);
  CHECK(bad([](TrainConfig& c) { c.learning_rate = 0; }) == ErrorCode::kInvalidArgument);
  CHECK(bad([](TrainConfig& c) { c.lambda1 = -1; }) == ErrorCode::kInvalidArgument);
  CHECK(bad([](TrainConfig& c) { c.adam_beta1 = 1.0; }) == ErrorCode::kInvalidArgument);
  CHECK(bad([](TrainConfig& c) { c.adam_eps = 0; }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("training converges on a separable three-class set") {
  const auto split = make_split(separable_set(12, 1), 2, 0.2, 3);
  const TrainResult r = train(build(resnet_micro_spec(3), 9), split, quick_config(20));
  const auto& ep = r.report.epochs;
  REQUIRE(ep.size() == 20);
  CHECK(ep.back().train_loss < 0.1);
  CHECK(r.report.best_val_accuracy == 1.0);
  CHECK(ep.back().val_accuracy == 1.0);
  // epoch-averaged windows of five never increase
  std::vector<double> windows;
  for (std::size_t w = 0; w < 4; ++w) {
    double s = 0;
    for (std::size_t e = 5 * w; e < 5 * w + 5; ++e) s += ep[e].train_loss;
    windows.push_back(s / 5.0);
  }
  for (std::size_t w = 1; w < windows.size(); ++w) CHECK(windows[w] <= windows[w - 1]);
  // the returned snapshot reproduces the reported best validation accuracy
  CHECK(evaluate(r.model, split.val) == r.report.best_val_accuracy);
  CHECK(evaluate(r.model, split.test) == r.report.test_accuracy);
  double best = 0;
  for (const auto& e : ep) best = std::max(best, e.val_accuracy);
  CHECK(best == r.report.best_val_accuracy);
  CHECK(ep[r.report.best_epoch - 1].val_accuracy == best);
  for (std::size_t e = 0; e + 1 < r.report.best_epoch; ++e) CHECK(ep[e].val_accuracy < best);
}

TEST_CASE("training is deterministic") {
  const auto split = make_split(separable_set(8, 2), 2, 0.2, 3);
  TrainConfig cfg = quick_config(3);
  cfg.augment = parse_augment_policy("flip,crop,brightness");
  const auto a = train(build(resnet_micro_spec(3), 1), split, cfg);
  const auto b = train(build(resnet_micro_spec(3), 1), split, cfg);
  CHECK(a.report == b.report);
  CHECK(same_parameters(a.model, b.model, ""));
  CHECK(report_csv(a.report) == report_csv(b.report));
}

TEST_CASE("one epoch reports best_epoch 1") {
  const auto split = make_split(separable_set(6, 3), 2, 0.2, 3);
  const auto r = train(build(resnet_micro_spec(3), 1), split, quick_config(1));
  CHECK(r.report.best_epoch == 1);
  CHECK(r.report.epochs.size() == 1);
}

TEST_CASE("sgd optimizer trains") {
  const auto split = make_split(separable_set(8, 4), 2, 0.2, 3);
  TrainConfig cfg = quick_config(4);
  cfg.optimizer = OptimizerKind::kSgd;
  cfg.learning_rate = 0.05;
  const Model init = build(resnet_micro_spec(3), 1);
  const auto r = train(init, split, cfg);
  CHECK_FALSE(same_parameters(init, r.model, ""));
  CHECK(r.report.epochs.back().train_loss < r.report.epochs.front().train_loss);
}

TEST_CASE("freezing everything but the head moves only the head") {
  const auto split = make_split(separable_set(8, 5), 2, 0.2, 3);
  const Model init = build(resnet_micro_spec(3), 1);
  Model m = init;
  std::vector<std::string> backbone;
  for (const auto& n : m.parameter_names())
    if (!n.starts_with("head.")) backbone.push_back(n);
  TrainConfig cfg = quick_config(3);
  cfg.freeze_prefixes = backbone;
  const auto r = train(m, split, cfg);
  CHECK(same_parameters(init, r.model, "head."));
  CHECK_FALSE(bit_equal(init.head_weight().data(), r.model.head_weight().data()));
  for (const auto& [name, t] : init.tensors()) {
    if (name.find("running_") != std::string::npos) CHECK(bit_equal(t.data(), r.model.tensor(name).data()));
  }
}

TEST_CASE("a fully frozen model still trains and reports") {
  const auto split = make_split(separable_set(6, 6), 2, 0.2, 3);
  const Model init = build(resnet_micro_spec(3), 1);
  TrainConfig cfg = quick_config(2);
  cfg.freeze_prefixes = {""};
  const auto r = train(init, split, cfg);
  CHECK(same_parameters(init, r.model, ""));
  CHECK(r.report.epochs.size() == 2);
  cfg.freeze_prefixes = {"nosuch."};
  CHECK_ERROR(train(init, split, cfg), ErrorCode::kUnknownPrefix);
}

TEST_CASE("train errors") {
  const auto split = make_split(separable_set(6, 7), 2, 0.2, 3);
  const Model m = build(resnet_micro_spec(3), 1);
  DatasetSplit empty = split;
  empty.val.clear();
  CHECK_ERROR(train(m, empty, quick_config(1)), ErrorCode::kEmptySplit);

  DatasetSplit tiny = split;
  tiny.train.resize(1);
  CHECK_ERROR(train(m, tiny, quick_config(1)), ErrorCode::kDegenerateBatch);

  CHECK_ERROR(train(build(resnet_micro_spec(2), 1), split, quick_config(1)), ErrorCode::kLabelOutOfRange);
  CHECK_ERROR(train(m, split, quick_config(0)), ErrorCode::kInvalidArgument);
}

TEST_CASE("lambda1 shrinks the head weight") {
  const auto split = make_split(separable_set(8, 8), 2, 0.2, 3);
  const Model init = build(resnet_micro_spec(3), 1);
  TrainConfig cfg = quick_config(5);
  cfg.lambda1 = 0.0;
  const auto plain = train(init, split, cfg);
  cfg.lambda1 = 0.1;
  const auto reg = train(init, split, cfg);
  const auto norm = [](const Tensor& w) {
    double s = 0;
    for (float v : w.data()) s += double(v) * v;
    return s;
  };
  CHECK(norm(reg.model.head_weight()) < norm(plain.model.head_weight()));
}

TEST_CASE("evaluate and per_class_tally") {
  const auto images = separable_set(10, 9);
  const auto split = make_split(images, 2, 0.2, 3);
  const auto r = train(build(resnet_micro_spec(3), 2), split, quick_config(15));
  REQUIRE(evaluate(r.model, images) == 1.0);
  std::vector<LabeledImage> wrong = images;
  for (auto& img : wrong) img.class_id = (img.class_id + 1) % 3;
  CHECK(evaluate(r.model, wrong) == 0.0);
  CHECK_ERROR(evaluate(r.model, {}), ErrorCode::kEmptySplit);

  const auto tally = per_class_tally(r.model, images, 3);
  for (const auto& t : tally) {
    CHECK(t.total == 10);
    CHECK(t.correct == 10);
  }
}

TEST_CASE("report formats") {
  TrainReport rep;
  rep.epochs = {{1, 0.5, 0.25}, {2, 0.125, 0.75}};
  rep.best_epoch = 2;
  rep.best_val_accuracy = 0.75;
  rep.test_accuracy = 0.5;
  CHECK(report_csv(rep) == "epoch,train_loss,val_acc\n1,0.5,0.25\n2,0.125,0.75\n");
  const std::string log = report_log(rep);
  CHECK(log.find("best_epoch=2\n") != std::string::npos);
  CHECK(log.find("test_accuracy=0.5\n") != std::string::npos);

  TempDir dir;
  write_text_file(dir / "r.csv", report_csv(rep));
  CHECK(irisnet::testing::read_text(dir / "r.csv") == report_csv(rep));
  CHECK_ERROR(write_text_file(dir / "missing" / "r.csv", "x"), ErrorCode::kIoFailure);
}

TEST_CASE("training logs one line per epoch") {
  const auto split = make_split(separable_set(6, 10), 2, 0.2, 3);
  std::ostringstream log;
  TrainConfig cfg = quick_config(2);
  cfg.log = &log;
  (void)train(build(resnet_micro_spec(3), 1), split, cfg);
  const std::string text = log.str();
  CHECK(text.find("epoch 1/2 train_loss=") != std::string::npos);
  CHECK(text.find("epoch 2/2 train_loss=") != std::string::npos);
  CHECK(text.find("best_epoch=") != std::string::npos);
}
