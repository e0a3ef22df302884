#include "irisnet_cli/cli.hpp"

#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include "irisnet/data.hpp"
#include "irisnet/image.hpp"
#include "irisnet/model.hpp"
#include "irisnet/model_spec.hpp"

namespace irisnet::cli {

namespace fs = std::filesystem;

namespace {

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) raise(ErrorCode::kIoFailure, "cannot create directory " + dir.string() + ": " + ec.message());
}

const fs::path& require_path(const std::optional<fs::path>& p, const char* flag) {
  if (!p) raise(ErrorCode::kInvalidArgument, std::string(flag) + " is required");
  return *p;
}

void require_data_root(const RunConfig& cfg) {
  if (cfg.data_root.empty()) raise(ErrorCode::kInvalidArgument, "--data-root is required");
}

struct Dataset {
  Corpus corpus;
  DatasetSplit split;
};

// Loads the corpus at the model's input size and either reuses the split
// manifest given with --split or draws a fresh split and records it.
Dataset load_dataset(const RunConfig& cfg, std::size_t input_size, std::ostream& log) {
  require_data_root(cfg);
  Dataset ds;
  ds.corpus = load_corpus(cfg.data_root);
  ds.corpus.images = resize_all(std::move(ds.corpus.images), input_size);
  log << "corpus " << cfg.data_root.string() << ": " << ds.corpus.images.size() << " images, "
      << ds.corpus.class_names.size() << " classes\n";
  if (cfg.split_manifest && fs::exists(*cfg.split_manifest)) {
    ds.split = read_split_manifest(*cfg.split_manifest, ds.corpus.images);
    log << "split read from " << cfg.split_manifest->string() << '\n';
  } else {
    ds.split = make_split(ds.corpus.images, cfg.k_test, cfg.val_fraction, cfg.train.seed);
    const fs::path manifest = cfg.split_manifest ? *cfg.split_manifest : cfg.out_dir / "split.csv";
    if (manifest.has_parent_path()) ensure_dir(manifest.parent_path());
    write_split_manifest(manifest, ds.split);
    log << "split written to " << manifest.string() << '\n';
  }
  ds.split.class_count = ds.corpus.class_names.size();
  log << "split train=" << ds.split.train.size() << " val=" << ds.split.val.size()
      << " test=" << ds.split.test.size() << '\n';
  return ds;
}

int finish_training(const RunConfig& cfg, const TrainResult& result, std::ostream& out, std::ostream& log) {
  const fs::path weights = cfg.weights_out ? *cfg.weights_out : cfg.out_dir / "weights.irn";
  if (weights.has_parent_path()) ensure_dir(weights.parent_path());
  save(result.model, weights);
  write_text_file(cfg.out_dir / "report.csv", report_csv(result.report));
  write_text_file(cfg.out_dir / "train.log", report_log(result.report));
  log << "weights written to " << weights.string() << '\n';
  out << "best_epoch=" << result.report.best_epoch << '\n'
      << "best_val_accuracy=" << fmt(result.report.best_val_accuracy) << '\n'
      << "test_accuracy=" << fmt(result.report.test_accuracy) << '\n';
  return kExitOk;
}

}  // namespace

int exit_code_for(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::kInvalidSpec:
    case ErrorCode::kInvalidArgument:
    case ErrorCode::kUnknownPrefix:
    case ErrorCode::kWindowOutOfBounds:
    case ErrorCode::kInvalidGeometry:
      return kExitConfig;
    case ErrorCode::kEmptyCorpus:
    case ErrorCode::kUnreadableImage:
    case ErrorCode::kInsufficientClassSamples:
    case ErrorCode::kEmptySplit:
    case ErrorCode::kLabelOutOfRange:
    case ErrorCode::kManifestMismatch:
    case ErrorCode::kDegenerateBatch:
      return kExitData;
    case ErrorCode::kIoFailure:
    case ErrorCode::kBadMagic:
    case ErrorCode::kVersionUnsupported:
    case ErrorCode::kCorruptPayload:
    case ErrorCode::kSpecMismatch:
      return kExitIo;
    case ErrorCode::kShapeMismatch:
    case ErrorCode::kNotScalar:
      return kExitInternal;
  }
  return kExitInternal;
}

int cmd_pretrain(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  validate(cfg.train);
  const ModelSpec probe = variant_spec(cfg.model_variant, 2);
  ensure_dir(cfg.out_dir);
  Dataset ds = load_dataset(cfg, probe.input_size, log);
  const Model model = build(variant_spec(cfg.model_variant, ds.split.class_count), derive_seed(cfg.train.seed, "init"));
  TrainConfig tc = cfg.train;
  tc.log = &log;
  tc.fit_input_normalization = true;
  return finish_training(cfg, train(model, ds.split, tc), out, log);
}

int cmd_finetune(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  validate(cfg.train);
  const fs::path& source_path = require_path(cfg.weights_in, "--weights-in");
  ensure_dir(cfg.out_dir);
  const Model source = load(source_path);
  Dataset ds = load_dataset(cfg, source.spec().input_size, log);
  const Model model =
      transfer(source, ds.split.class_count, cfg.freeze_mode, derive_seed(cfg.train.seed, "head"));
  log << "transfer from " << source_path.string() << " (" << freeze_mode_name(cfg.freeze_mode) << "), "
      << ds.split.class_count << " target classes\n";
  TrainConfig tc = cfg.train;
  tc.log = &log;
  tc.fit_input_normalization = false;
  return finish_training(cfg, train(model, ds.split, tc), out, log);
}

int cmd_eval(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const Model model = load(require_path(cfg.weights_in, "--weights-in"));
  ensure_dir(cfg.out_dir);
  Dataset ds = load_dataset(cfg, model.spec().input_size, log);
  if (ds.split.class_count != model.spec().head_classes) {
    raise(ErrorCode::kLabelOutOfRange, "corpus has " + std::to_string(ds.split.class_count) +
                                           " classes but the model predicts " +
                                           std::to_string(model.spec().head_classes));
  }
  const auto tally = per_class_tally(model, ds.split.test, ds.split.class_count);
  std::size_t correct = 0, total = 0;
  std::string csv = "class_id,class_name,correct,total,accuracy\n";
  for (std::size_t c = 0; c < tally.size(); ++c) {
    correct += tally[c].correct;
    total += tally[c].total;
    const double acc = tally[c].total ? static_cast<double>(tally[c].correct) / static_cast<double>(tally[c].total) : 0.0;
    csv += std::to_string(c) + "," + ds.corpus.class_names[c] + "," + std::to_string(tally[c].correct) + "," +
           std::to_string(tally[c].total) + "," + fmt(acc) + "\n";
  }
  const double accuracy = static_cast<double>(correct) / static_cast<double>(total);
  std::ostringstream summary;
  summary << "classes=" << ds.split.class_count << '\n'
          << "test_images=" << total << '\n'
          << "test_accuracy=" << fmt(accuracy) << '\n';
  write_text_file(cfg.out_dir / "per_class.csv", csv);
  write_text_file(cfg.out_dir / "eval.txt", summary.str());
  out << summary.str();
  return kExitOk;
}

int cmd_saliency(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const Model model = load(require_path(cfg.weights_in, "--weights-in"));
  if (cfg.images.empty()) raise(ErrorCode::kInvalidArgument, "saliency needs at least one image");
  const std::size_t size = model.spec().input_size;
  // Reject impossible windows before touching any image.
  grid_extent(size, cfg.occlusion.window, cfg.occlusion.stride);
  if (cfg.label && *cfg.label >= model.spec().head_classes) {
    raise(ErrorCode::kInvalidArgument, "--label " + std::to_string(*cfg.label) + " is not a model class");
  }
  ensure_dir(cfg.out_dir);
  for (const auto& path : cfg.images) {
    Tensor img = to_rgb(read_pnm(path));
    if (img.dim(1) != size || img.dim(2) != size) img = resize_bilinear(img, size, size);
    Shape one = img.shape();
    one.insert(one.begin(), 1);
    const std::size_t label = cfg.label ? *cfg.label : predict(model, Tensor(one, img.to_vector()))[0];
    const SaliencyMap map = sweep(model, img, label, cfg.occlusion);
    const fs::path dir = cfg.out_dir / path.stem();
    ensure_dir(dir);
    export_map(map, img, (dir / "").string());
    std::ostringstream summary;
    summary << "image=" << path.filename().string() << '\n'
            << "label=" << label << '\n'
            << "base_prediction=" << map.base_prediction << '\n'
            << "base_confidence=" << fmt(map.base_confidence) << '\n'
            << "grid=" << map.grid_h << 'x' << map.grid_w << '\n';
    write_text_file(dir / "summary.txt", summary.str());
    log << path.string() << " -> " << dir.string() << '\n';
    out << summary.str();
  }
  return kExitOk;
}

int cmd_synth(const RunConfig& cfg, std::ostream& out, std::ostream& log) {
  const auto& s = cfg.synth;
  const auto images = synth_corpus(s.classes, s.per_class, s.size, s.size, derive_seed(cfg.train.seed, "synth"),
                                   s.first_class);
  for (std::size_t c = 0; c < s.classes; ++c) ensure_dir(cfg.out_dir / synth_class_name(s.first_class + c));
  for (const auto& img : images) {
    // source_path is "synth/<class>/<file>"
    write_pnm(cfg.out_dir / fs::path(img.source_path).lexically_relative("synth"), img.pixels);
  }
  log << "wrote " << images.size() << " images to " << cfg.out_dir.string() << '\n';
  out << "classes=" << s.classes << '\n' << "images=" << images.size() << '\n';
  return kExitOk;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  std::string data_root, weights_in, weights_out, split, out_dir = ".";
  std::string optimizer = "adam", freeze_mode = "full_finetune", augment = "none";
  long long label = -1;

  CLI::App app{"Few-shot residual-network image identity recognition", "irisnet"};
  app.option_defaults()->always_capture_default();
  app.set_config("--config", "", "key=value file; command-line flags take precedence");
  app.require_subcommand(1);

  app.add_option("--data-root", data_root, "Corpus root holding one directory per class");
  app.add_option("--weights-in", weights_in, "Weight file to start from");
  app.add_option("--weights-out", weights_out, "Weight file to write (default <out-dir>/weights.irn)");
  app.add_option("--split", split, "Split manifest CSV to reuse, or to write when missing");
  app.add_option("--out-dir", out_dir, "Directory for reports and outputs");
  app.add_option("--model", cfg.model_variant, "Model variant")->check(CLI::IsMember({"resnet_micro", "resnet50"}));
  app.add_option("--epochs", cfg.train.epochs, "Training epochs");
  app.add_option("--batch-size", cfg.train.batch_size, "Mini-batch size");
  app.add_option("--lr", cfg.train.learning_rate, "Learning rate");
  app.add_option("--lambda1", cfg.train.lambda1, "Weight of the squared Frobenius norm of the classifier head");
  app.add_option("--optimizer", optimizer, "Optimizer")->check(CLI::IsMember({"adam", "sgd"}));
  app.add_option("--augment", augment, "Comma-separated subset of flip,crop,brightness, or none");
  app.add_option("--freeze-mode", freeze_mode, "Transfer mode")
      ->check(CLI::IsMember({"feature_extractor", "full_finetune"}));
  app.add_option("--k-test", cfg.k_test, "Test images held out per class");
  app.add_option("--val-fraction", cfg.val_fraction, "Fraction of the remaining images used for validation");
  app.add_option("--window", cfg.occlusion.window, "Occlusion window side N");
  app.add_option("--stride", cfg.occlusion.stride, "Occlusion window stride S");
  app.add_option("--fill", cfg.occlusion.fill, "Raw pixel value written into the occluded window");
  app.add_option("--seed", cfg.train.seed, "Seed for every random stream");

  auto* pretrain = app.add_subcommand("pretrain", "Train from random initialization");
  auto* finetune = app.add_subcommand("finetune", "Transfer a pretrained model to a new corpus and train it");
  auto* eval = app.add_subcommand("eval", "Report test accuracy on the held-out split");
  auto* saliency = app.add_subcommand("saliency", "Occlusion saliency maps for images");
  auto* synth = app.add_subcommand("synth", "Write a synthetic ring corpus to --out-dir");
  saliency->add_option("images", cfg.images, "Input images (PPM/PGM)")->required();
  saliency->add_option("--label", label, "True class index (default: the model's prediction)");
  synth->add_option("--classes", cfg.synth.classes, "Number of classes");
  synth->add_option("--per-class", cfg.synth.per_class, "Images per class");
  synth->add_option("--size", cfg.synth.size, "Image side in pixels");
  synth->add_option("--first-class", cfg.synth.first_class, "Index of the first ring signature");
  for (auto* sub : {pretrain, finetune, eval, saliency, synth}) sub->fallthrough();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    cfg.data_root = data_root;
    if (!weights_in.empty()) cfg.weights_in = weights_in;
    if (!weights_out.empty()) cfg.weights_out = weights_out;
    if (!split.empty()) cfg.split_manifest = split;
    cfg.out_dir = out_dir;
    cfg.train.optimizer = optimizer == "sgd" ? OptimizerKind::kSgd : OptimizerKind::kAdam;
    cfg.train.augment = parse_augment_policy(augment);
    cfg.freeze_mode = parse_freeze_mode(freeze_mode);
    if (label >= 0) cfg.label = static_cast<std::size_t>(label);

    if (*pretrain) return cmd_pretrain(cfg, out, err);
    if (*finetune) return cmd_finetune(cfg, out, err);
    if (*eval) return cmd_eval(cfg, out, err);
    if (*saliency) return cmd_saliency(cfg, out, err);
    return cmd_synth(cfg, out, err);
  } catch (const Error& e) {
    err << "error: " << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const fs::filesystem_error& e) {
    err << "error: " << e.what() << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << '\n';
    return kExitInternal;
  }
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, out, err);
}

}  // namespace irisnet::cli
