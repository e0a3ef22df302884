#include "irisnet/model.hpp"

#include <algorithm>
#include <cmath>

#include "irisnet/error.hpp"
#include "irisnet/ops.hpp"
#include "irisnet/random.hpp"

namespace irisnet {

template <std::floating_point T>
BasicTensor<T> residual_forward(const BasicTensor<T>& x, ResidualBlock<T>& block) {
  const std::size_t stages = block.kind == BlockKind::kBasic ? 2 : 3;
  if (block.branch.size() != stages) raise(ErrorCode::kShapeMismatch, "residual block has the wrong branch depth");
  if (x.rank() != 4 || x.dim(1) != block.spec.in_ch) {
    raise(ErrorCode::kShapeMismatch, "residual block expects " + std::to_string(block.spec.in_ch) +
                                         " input channels, got " + shape_str(x.shape()));
  }
  BasicTensor<T> h = x;
  for (std::size_t i = 0; i < stages; ++i) {
    h = batchnorm(conv2d(h, block.branch[i].conv), block.branch[i].bn);
    if (i + 1 < stages) h = relu(h);
  }
  BasicTensor<T> skip = x;
  if (block.shortcut) skip = batchnorm(conv2d(x, block.shortcut->conv), block.shortcut->bn);
  if (skip.shape() != h.shape()) {
    raise(ErrorCode::kShapeMismatch,
          "residual branch " + shape_str(h.shape()) + " does not match shortcut " + shape_str(skip.shape()));
  }
  return relu(add(h, skip));
}

template <std::floating_point T>
BasicModel<T>::BasicModel(ModelSpec spec, TensorMap tensors) : spec_(std::move(spec)), tensors_(std::move(tensors)) {
  const auto decls = declare_tensors(spec_);
  if (decls.size() != tensors_.size()) {
    raise(ErrorCode::kSpecMismatch, "spec declares " + std::to_string(decls.size()) + " tensors, got " +
                                        std::to_string(tensors_.size()));
  }
  for (const auto& d : decls) {
    const auto it = tensors_.find(d.name);
    if (it == tensors_.end()) raise(ErrorCode::kSpecMismatch, "missing tensor " + d.name);
    if (it->second.shape() != d.shape) {
      raise(ErrorCode::kSpecMismatch, d.name + " has shape " + shape_str(it->second.shape()) + ", spec declares " +
                                          shape_str(d.shape));
    }
    if (d.trainable()) trainable_.insert(d.name);
  }
  refresh_grad_flags();
}

template <std::floating_point T>
BasicModel<T>::BasicModel(const BasicModel& other)
    : spec_(other.spec_), trainable_(other.trainable_), frozen_(other.frozen_) {
  for (const auto& [name, t] : other.tensors_) tensors_.emplace(name, t.detach());
  refresh_grad_flags();
}

template <std::floating_point T>
BasicModel<T>& BasicModel<T>::operator=(const BasicModel& other) {
  if (this != &other) {
    BasicModel copy(other);
    *this = std::move(copy);
  }
  return *this;
}

template <std::floating_point T>
const BasicTensor<T>& BasicModel<T>::tensor(const std::string& name) const {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) raise(ErrorCode::kSpecMismatch, "no tensor named " + name);
  return it->second;
}

template <std::floating_point T>
BasicTensor<T>& BasicModel<T>::tensor(const std::string& name) {
  const auto it = tensors_.find(name);
  if (it == tensors_.end()) raise(ErrorCode::kSpecMismatch, "no tensor named " + name);
  return it->second;
}

template <std::floating_point T>
std::vector<std::string> BasicModel<T>::parameter_names() const {
  return {trainable_.begin(), trainable_.end()};
}

template <std::floating_point T>
bool BasicModel<T>::is_parameter(const std::string& name) const {
  return trainable_.contains(name);
}

template <std::floating_point T>
std::size_t BasicModel<T>::parameter_count() const {
  std::size_t n = 0;
  for (const auto& name : trainable_) n += tensors_.at(name).numel();
  return n;
}

template <std::floating_point T>
void BasicModel<T>::freeze(const std::vector<std::string>& prefixes) {
  for (const auto& prefix : prefixes) {
    const bool hit = std::any_of(trainable_.begin(), trainable_.end(),
                                 [&](const std::string& name) { return name.starts_with(prefix); });
    if (!hit) raise(ErrorCode::kUnknownPrefix, "prefix '" + prefix + "' matches no parameter");
  }
  frozen_.insert(prefixes.begin(), prefixes.end());
  refresh_grad_flags();
}

template <std::floating_point T>
void BasicModel<T>::unfreeze_all() {
  frozen_.clear();
  refresh_grad_flags();
}

template <std::floating_point T>
bool BasicModel<T>::is_frozen(std::string_view name) const {
  return std::any_of(frozen_.begin(), frozen_.end(), [&](const std::string& p) { return name.starts_with(p); });
}

template <std::floating_point T>
void BasicModel<T>::refresh_grad_flags() {
  for (auto& [name, t] : tensors_) t.set_requires_grad(trainable_.contains(name) && !is_frozen(name));
}

template <std::floating_point T>
ConvBn<T> BasicModel<T>::conv_bn(const std::string& prefix, const std::string& conv, const std::string& bn,
                                 std::size_t stride, std::size_t padding, bool training) const {
  ConvBn<T> out;
  out.conv.weight = tensor(prefix + conv + ".weight");
  out.conv.stride = stride;
  out.conv.padding = padding;
  const std::string b = prefix + bn + ".";
  out.bn.gamma = tensor(b + "gamma");
  out.bn.beta = tensor(b + "beta");
  out.bn.running_mean = tensor(b + "running_mean");
  out.bn.running_var = tensor(b + "running_var");
  // A frozen batchnorm layer keeps its running statistics as well.
  out.bn.training_mode = training && !(is_frozen(b + "gamma") && is_frozen(b + "beta"));
  return out;
}

template <std::floating_point T>
ResidualBlock<T> BasicModel<T>::block(std::size_t stage, std::size_t index, bool training) const {
  const auto blocks = expand_stage(spec_.stages.at(stage));
  const ResidualBlockSpec& bs = blocks.at(index);
  const std::string prefix = stage_block_prefix(stage, index);
  ResidualBlock<T> blk;
  blk.kind = spec_.block_kind;
  blk.spec = bs;
  if (spec_.block_kind == BlockKind::kBasic) {
    blk.branch.push_back(conv_bn(prefix, "conv1", "bn1", bs.stride, 1, training));
    blk.branch.push_back(conv_bn(prefix, "conv2", "bn2", 1, 1, training));
  } else {
    blk.branch.push_back(conv_bn(prefix, "conv1", "bn1", 1, 0, training));
    blk.branch.push_back(conv_bn(prefix, "conv2", "bn2", bs.stride, 1, training));
    blk.branch.push_back(conv_bn(prefix, "conv3", "bn3", 1, 0, training));
  }
  if (bs.projection) blk.shortcut = conv_bn(prefix + "shortcut.", "conv", "bn", bs.stride, 0, training);
  return blk;
}

namespace {

// (x - mean[c]) / std[c], differentiable in x only.
template <std::floating_point T>
BasicTensor<T> standardize(const BasicTensor<T>& x, const BasicTensor<T>& mean, const BasicTensor<T>& stdev) {
  const std::size_t b = x.dim(0), c = x.dim(1), plane = x.dim(2) * x.dim(3);
  std::vector<T> inv(c);
  for (std::size_t ch = 0; ch < c; ++ch) inv[ch] = T(1) / stdev.data()[ch];
  std::vector<T> out(x.numel());
  const auto xd = x.data();
  const auto md = mean.data();
  for (std::size_t n = 0; n < b; ++n) {
    for (std::size_t ch = 0; ch < c; ++ch) {
      const std::size_t off = (n * c + ch) * plane;
      for (std::size_t i = 0; i < plane; ++i) out[off + i] = (xd[off + i] - md[ch]) * inv[ch];
    }
  }
  return BasicTensor<T>::from_op(
      x.shape(), std::move(out), {x},
      [b, c, plane, inv = std::move(inv)](const detail::TensorImpl<T>& o, const std::vector<detail::ImplPtr<T>>& in) {
        auto gx = in[0]->grad_buffer();
        for (std::size_t n = 0; n < b; ++n) {
          for (std::size_t ch = 0; ch < c; ++ch) {
            const std::size_t off = (n * c + ch) * plane;
            for (std::size_t i = 0; i < plane; ++i) gx[off + i] += o.grad[off + i] * inv[ch];
          }
        }
      });
}

}  // namespace

template <std::floating_point T>
BasicTensor<T> BasicModel<T>::run(const BasicTensor<T>& images, bool training) const {
  const auto& st = spec_.stem;
  if (images.rank() != 4 || images.dim(1) != st.in_ch || images.dim(2) != spec_.input_size ||
      images.dim(3) != spec_.input_size) {
    raise(ErrorCode::kInvalidGeometry, spec_.variant_name + " expects [b," + std::to_string(st.in_ch) + "," +
                                           std::to_string(spec_.input_size) + "," + std::to_string(spec_.input_size) +
                                           "] input, got " + shape_str(images.shape()));
  }
  BasicTensor<T> x = standardize(images, tensor("input.mean"), tensor("input.std"));
  ConvBn<T> stem = conv_bn("stem.", "conv", "bn", st.stride, st.padding, training);
  x = relu(batchnorm(conv2d(x, stem.conv), stem.bn));
  if (st.pool_kernel != 0) x = maxpool2d(x, st.pool_kernel, st.pool_stride, st.pool_padding);
  for (std::size_t s = 0; s < spec_.stages.size(); ++s) {
    for (std::size_t b = 0; b < spec_.stages[s].block_count; ++b) {
      ResidualBlock<T> blk = block(s, b, training);
      x = residual_forward(x, blk);
    }
  }
  return dense(global_avgpool(x), tensor("head.weight"), tensor("head.bias"));
}

template <std::floating_point T>
BasicTensor<T> BasicModel<T>::forward(const BasicTensor<T>& images, bool training) {
  return run(images, training);
}

template <std::floating_point T>
BasicTensor<T> BasicModel<T>::infer(const BasicTensor<T>& images) const {
  NoGradGuard no_grad;
  return run(images, false);
}

template BasicTensor<float> residual_forward(const BasicTensor<float>&, ResidualBlock<float>&);
template BasicTensor<double> residual_forward(const BasicTensor<double>&, ResidualBlock<double>&);
template class BasicModel<float>;
template class BasicModel<double>;

namespace {

Tensor fan_in_uniform(const TensorDecl& decl, std::uint64_t seed) {
  Rng rng(derive_seed(seed, decl.name));
  const double bound = 1.0 / std::sqrt(static_cast<double>(decl.fan_in));
  std::vector<float> values(shape_numel(decl.shape));
  for (auto& v : values) v = static_cast<float>(rng.uniform(-bound, bound));
  return Tensor(decl.shape, std::move(values));
}

Tensor init_tensor(const TensorDecl& decl, std::uint64_t seed) {
  switch (decl.role) {
    case TensorRole::kConvWeight:
    case TensorRole::kDenseWeight:
      return fan_in_uniform(decl, seed);
    case TensorRole::kGamma:
    case TensorRole::kRunningVar:
    case TensorRole::kInputStd:
      return Tensor::full(decl.shape, 1.0f);
    default:
      return Tensor::zeros(decl.shape);
  }
}

}  // namespace

Model build(const ModelSpec& spec, std::uint64_t seed) {
  validate(spec);
  Model::TensorMap tensors;
  for (const auto& decl : declare_tensors(spec)) tensors.emplace(decl.name, init_tensor(decl, seed));
  return Model(spec, std::move(tensors));
}

Model replace_head(const Model& model, std::size_t new_classes, std::uint64_t seed) {
  ModelSpec spec = model.spec();
  spec.head_classes = new_classes;
  validate(spec);

  Model::TensorMap tensors;
  for (const auto& decl : declare_tensors(spec)) {
    if (decl.name.starts_with("head.")) {
      tensors.emplace(decl.name, init_tensor(decl, seed));
    } else {
      tensors.emplace(decl.name, model.tensor(decl.name).detach());
    }
  }
  Model out(spec, std::move(tensors));

  // Prefixes that also cover the head are narrowed to the non-head
  // parameters they used to match.
  std::set<std::string> frozen;
  for (const auto& prefix : model.frozen_prefixes()) {
    const bool covers_head = std::string_view("head.weight").starts_with(prefix) ||
                             std::string_view("head.bias").starts_with(prefix) || prefix.starts_with("head.");
    if (!covers_head) {
      frozen.insert(prefix);
      continue;
    }
    for (const auto& name : model.parameter_names()) {
      if (name.starts_with(prefix) && !name.starts_with("head.")) frozen.insert(name);
    }
  }
  if (!frozen.empty()) out.freeze({frozen.begin(), frozen.end()});
  return out;
}

std::vector<std::size_t> argmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) raise(ErrorCode::kShapeMismatch, "argmax_rows expects [b,n]");
  const std::size_t b = logits.dim(0), n = logits.dim(1);
  std::vector<std::size_t> out(b);
  const auto d = logits.data();
  for (std::size_t i = 0; i < b; ++i) {
    std::size_t best = 0;
    for (std::size_t j = 1; j < n; ++j) {
      if (d[i * n + j] > d[i * n + best]) best = j;
    }
    out[i] = best;
  }
  return out;
}

std::vector<std::size_t> predict(const Model& model, const Tensor& images) {
  return argmax_rows(model.infer(images));
}

}  // namespace irisnet
