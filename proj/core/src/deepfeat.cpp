#include "malfuse/deepfeat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>

#include "malfuse/asmfeat.hpp"
#include "malfuse/errors.hpp"
#include "malfuse/eval.hpp"
#include "malfuse/hexfeat.hpp"
#include "malfuse/imaging.hpp"

namespace malfuse {
namespace {

int checked_classes(int num_classes) {
  if (num_classes < 2) {
    throw ValidationError("network needs >= 2 output classes");
  }
  return num_classes;
}

// Final length of a [conv k3 -> pool 2] x3 stack on a length-L input.
std::size_t conv_stack_len(std::size_t len) {
  for (int i = 0; i < 3; ++i) {
    if (len < 3) {
      throw ValidationError("entropy input length too short for the network");
    }
    len = (len - 2) / 2;
    if (len == 0) {
      throw ValidationError("entropy input length too short for the network");
    }
  }
  return len;
}

nn::Tensor flatten(nn::Tensor t) {
  t.shape = {t.data.size()};
  return t;
}

nn::Tensor reshape(nn::Tensor t, std::vector<std::size_t> shape) {
  t.shape = std::move(shape);
  return t;
}

std::uint64_t fold_seed(std::uint64_t seed, int fold) {
  return seed ^ (0x9E3779B97F4A7C15ull * static_cast<std::uint64_t>(fold + 1));
}

}  // namespace

// ---------------------------------------------------------------------------
// Input preparation
// ---------------------------------------------------------------------------

nn::Tensor grayscale_input(const HexDump& dump) {
  const GrayImage img = bytes_to_image(dump);
  const GrayImage sized = resize_lanczos(img, kImageSide, kImageSide);
  // Quantize to 8-bit first: the network consumes the stored grayscale
  // image, not the unclamped resampling intermediate.
  const std::vector<std::uint8_t> pix = quantize_u8(sized);
  nn::Tensor x({1, kImageSide, kImageSide});
  for (std::size_t i = 0; i < pix.size(); ++i) {
    x.data[i] = static_cast<double>(pix[i]) / 255.0;
  }
  return x;
}

nn::Tensor entropy_input(const HexDump& dump, std::size_t len,
                         std::size_t chunk) {
  if (len == 0) throw ValidationError("entropy input length must be positive");
  const std::vector<double> stream = entropy_stream(dump, EntropyParams{chunk});
  nn::Tensor x({1, len});
  const std::size_t n = std::min(len, stream.size());
  std::copy(stream.begin(), stream.begin() + static_cast<std::ptrdiff_t>(n),
            x.data.begin());
  return x;
}

std::vector<int> byte_id_input(const HexDump& dump, std::size_t cap) {
  const std::vector<std::uint8_t> bytes = dump.defined_bytes();
  const std::size_t n = std::min(cap, bytes.size());
  std::vector<int> ids(n);
  for (std::size_t i = 0; i < n; ++i) ids[i] = static_cast<int>(bytes[i]);
  return ids;
}

std::vector<int> opcode_id_input(const AsmListing& listing, const Vocab& opcodes,
                                 std::size_t cap) {
  std::vector<int> ids = opcode_id_sequence(listing, opcodes);
  if (ids.size() > cap) ids.resize(cap);
  return ids;
}

std::vector<std::string> hidden_feature_names(std::size_t dim) {
  std::vector<std::string> names;
  names.reserve(dim);
  char buf[16];
  for (std::size_t i = 0; i < dim; ++i) {
    std::snprintf(buf, sizeof(buf), "h%03zu", i);
    names.emplace_back(buf);
  }
  return names;
}

// ---------------------------------------------------------------------------
// GrayscaleCnn
// ---------------------------------------------------------------------------

namespace {
constexpr std::size_t kGrayFlatDim = 70 * 29 * 29;  // trace from 255x255
}

GrayscaleCnn::GrayscaleCnn(int num_classes, std::uint64_t seed)
    : num_classes_(checked_classes(num_classes)),
      rng_(seed),
      conv1_(1, 50, 5, 5, rng_),
      ln1_(50),
      conv2_(50, 50, 3, 3, rng_),
      ln2_(50),
      conv3_(50, 70, 3, 3, rng_),
      ln3_(70),
      fc1_(kGrayFlatDim, kFeatureDim, rng_),
      fc2_(kFeatureDim, static_cast<std::size_t>(num_classes), rng_) {}

nn::Tensor GrayscaleCnn::forward(const Input& image) {
  if (image.shape != std::vector<std::size_t>{1, kImageSide, kImageSide}) {
    throw ValidationError("grayscale net expects a [1,255,255] input");
  }
  nn::Tensor t = ln1_.forward(pool1_.forward(relu1_.forward(conv1_.forward(image))));
  t = ln2_.forward(pool2_.forward(relu2_.forward(conv2_.forward(t))));
  t = ln3_.forward(pool3_.forward(relu3_.forward(conv3_.forward(t))));
  t = relu4_.forward(fc1_.forward(flatten(std::move(t))));
  features_ = t.data;
  return fc2_.forward(t);
}

void GrayscaleCnn::backward(const nn::Tensor& grad_logits) {
  nn::Tensor g = relu4_.backward(fc2_.backward(grad_logits));
  g = reshape(fc1_.backward(g), {70, 29, 29});
  g = conv3_.backward(relu3_.backward(pool3_.backward(ln3_.backward(g))));
  g = conv2_.backward(relu2_.backward(pool2_.backward(ln2_.backward(g))));
  conv1_.backward(relu1_.backward(pool1_.backward(ln1_.backward(g))));
}

std::vector<nn::Tensor*> GrayscaleCnn::params() {
  return {&conv1_.weight, &conv1_.bias, &ln1_.gamma, &ln1_.beta,
          &conv2_.weight, &conv2_.bias, &ln2_.gamma, &ln2_.beta,
          &conv3_.weight, &conv3_.bias, &ln3_.gamma, &ln3_.beta,
          &fc1_.weight,   &fc1_.bias,   &fc2_.weight, &fc2_.bias};
}

std::vector<nn::Tensor*> GrayscaleCnn::grads() {
  return {&conv1_.grad_weight, &conv1_.grad_bias, &ln1_.grad_gamma,
          &ln1_.grad_beta,     &conv2_.grad_weight, &conv2_.grad_bias,
          &ln2_.grad_gamma,    &ln2_.grad_beta,     &conv3_.grad_weight,
          &conv3_.grad_bias,   &ln3_.grad_gamma,    &ln3_.grad_beta,
          &fc1_.grad_weight,   &fc1_.grad_bias,     &fc2_.grad_weight,
          &fc2_.grad_bias};
}

std::string GrayscaleCnn::arch_tag() const {
  return "gray-v1/c" + std::to_string(num_classes_);
}

void GrayscaleCnn::save(const std::filesystem::path& path) const {
  auto* self = const_cast<GrayscaleCnn*>(this);
  std::vector<const nn::Tensor*> tensors;
  for (nn::Tensor* t : self->params()) tensors.push_back(t);
  nn::save_weights(path, arch_tag(), tensors);
}

GrayscaleCnn GrayscaleCnn::load(const std::filesystem::path& path,
                                int num_classes) {
  GrayscaleCnn model(num_classes, 0);
  nn::load_weights(path, model.arch_tag(), model.params());
  return model;
}

// ---------------------------------------------------------------------------
// EntropyCnn
// ---------------------------------------------------------------------------

EntropyCnn::EntropyCnn(int num_classes, std::uint64_t seed,
                       std::size_t input_len)
    : num_classes_(checked_classes(num_classes)),
      input_len_(input_len),
      rng_(seed),
      conv1_(1, 50, 3, rng_),
      conv2_(50, 70, 3, rng_),
      conv3_(70, 70, 3, rng_),
      fc1_(70 * conv_stack_len(input_len), 1000, rng_),
      fc2_(1000, kFeatureDim, rng_),
      fc3_(kFeatureDim, static_cast<std::size_t>(num_classes), rng_) {}

std::size_t EntropyCnn::flat_dim() const {
  return 70 * conv_stack_len(input_len_);
}

nn::Tensor EntropyCnn::forward(const Input& stream) {
  if (stream.shape != std::vector<std::size_t>{1, input_len_}) {
    throw ValidationError("entropy net expects a [1," +
                          std::to_string(input_len_) + "] input");
  }
  nn::Tensor t = pool1_.forward(relu1_.forward(conv1_.forward(stream)));
  t = pool2_.forward(relu2_.forward(conv2_.forward(t)));
  t = pool3_.forward(relu3_.forward(conv3_.forward(t)));
  t = relu4_.forward(fc1_.forward(flatten(std::move(t))));
  t = relu5_.forward(fc2_.forward(t));
  features_ = t.data;
  return fc3_.forward(t);
}

void EntropyCnn::backward(const nn::Tensor& grad_logits) {
  nn::Tensor g = relu5_.backward(fc3_.backward(grad_logits));
  g = relu4_.backward(fc2_.backward(g));
  g = reshape(fc1_.backward(g), {70, conv_stack_len(input_len_)});
  g = conv3_.backward(relu3_.backward(pool3_.backward(g)));
  g = conv2_.backward(relu2_.backward(pool2_.backward(g)));
  conv1_.backward(relu1_.backward(pool1_.backward(g)));
}

std::vector<nn::Tensor*> EntropyCnn::params() {
  return {&conv1_.weight, &conv1_.bias, &conv2_.weight, &conv2_.bias,
          &conv3_.weight, &conv3_.bias, &fc1_.weight,   &fc1_.bias,
          &fc2_.weight,   &fc2_.bias,   &fc3_.weight,   &fc3_.bias};
}

std::vector<nn::Tensor*> EntropyCnn::grads() {
  return {&conv1_.grad_weight, &conv1_.grad_bias, &conv2_.grad_weight,
          &conv2_.grad_bias,   &conv3_.grad_weight, &conv3_.grad_bias,
          &fc1_.grad_weight,   &fc1_.grad_bias,     &fc2_.grad_weight,
          &fc2_.grad_bias,     &fc3_.grad_weight,   &fc3_.grad_bias};
}

std::string EntropyCnn::arch_tag() const {
  return "ent-v1/l" + std::to_string(input_len_) + "/c" +
         std::to_string(num_classes_);
}

void EntropyCnn::save(const std::filesystem::path& path) const {
  auto* self = const_cast<EntropyCnn*>(this);
  std::vector<const nn::Tensor*> tensors;
  for (nn::Tensor* t : self->params()) tensors.push_back(t);
  nn::save_weights(path, arch_tag(), tensors);
}

EntropyCnn EntropyCnn::load(const std::filesystem::path& path, int num_classes,
                            std::size_t input_len) {
  EntropyCnn model(num_classes, 0, input_len);
  nn::load_weights(path, model.arch_tag(), model.params());
  return model;
}

// ---------------------------------------------------------------------------
// NgramCnn
// ---------------------------------------------------------------------------

NgramCnn::NgramCnn(std::size_t vocab_rows, int num_classes, std::uint64_t seed)
    : vocab_rows_(vocab_rows),
      num_classes_(checked_classes(num_classes)),
      rng_(seed),
      emb_(vocab_rows, 4, rng_),
      conv3_(4, 100, 3, rng_),
      conv5_(4, 100, 5, rng_),
      conv7_(4, 100, 7, rng_),
      fc_(kFeatureDim, static_cast<std::size_t>(num_classes), rng_) {
  if (vocab_rows < 2) {
    throw ValidationError("token net needs at least one real id plus the pad id");
  }
}

nn::Tensor NgramCnn::forward(const Input& ids) {
  std::vector<int> padded = ids;
  while (padded.size() < 7) padded.push_back(pad_id());
  padded_len_ = padded.size();

  // pad_prefix[i] = number of pad tokens among the first i positions, so a
  // window [t, t+k) is poolable iff it contains no pad.
  std::vector<std::size_t> pad_prefix(padded.size() + 1, 0);
  for (std::size_t i = 0; i < padded.size(); ++i) {
    pad_prefix[i + 1] = pad_prefix[i] + (padded[i] == pad_id() ? 1 : 0);
  }
  const auto window_mask = [&](std::size_t k) {
    std::vector<char> valid(padded.size() - k + 1, 0);
    for (std::size_t t = 0; t + k <= padded.size(); ++t) {
      valid[t] = (pad_prefix[t + k] - pad_prefix[t]) == 0 ? 1 : 0;
    }
    return valid;
  };

  const nn::Tensor x = emb_.forward(padded);
  const nn::Tensor p3 =
      pool3_.forward(relu3_.forward(conv3_.forward(x)), window_mask(3));
  const nn::Tensor p5 =
      pool5_.forward(relu5_.forward(conv5_.forward(x)), window_mask(5));
  const nn::Tensor p7 =
      pool7_.forward(relu7_.forward(conv7_.forward(x)), window_mask(7));

  nn::Tensor feat({kFeatureDim});
  std::copy(p3.data.begin(), p3.data.end(), feat.data.begin());
  std::copy(p5.data.begin(), p5.data.end(), feat.data.begin() + 100);
  std::copy(p7.data.begin(), p7.data.end(), feat.data.begin() + 200);
  features_ = feat.data;
  return fc_.forward(feat);
}

void NgramCnn::backward(const nn::Tensor& grad_logits) {
  const nn::Tensor gfeat = fc_.backward(grad_logits);
  const auto slice = [&](std::size_t offset) {
    nn::Tensor g({100});
    std::copy(gfeat.data.begin() + static_cast<std::ptrdiff_t>(offset),
              gfeat.data.begin() + static_cast<std::ptrdiff_t>(offset + 100),
              g.data.begin());
    return g;
  };
  nn::Tensor gx({4, padded_len_});
  const auto add_branch = [&](nn::Tensor g) {
    for (std::size_t i = 0; i < gx.data.size(); ++i) gx.data[i] += g.data[i];
  };
  add_branch(conv3_.backward(relu3_.backward(pool3_.backward(slice(0)))));
  add_branch(conv5_.backward(relu5_.backward(pool5_.backward(slice(100)))));
  add_branch(conv7_.backward(relu7_.backward(pool7_.backward(slice(200)))));
  emb_.backward(gx);
}

std::vector<nn::Tensor*> NgramCnn::params() {
  return {&emb_.weight,   &conv3_.weight, &conv3_.bias,
          &conv5_.weight, &conv5_.bias,   &conv7_.weight,
          &conv7_.bias,   &fc_.weight,    &fc_.bias};
}

std::vector<nn::Tensor*> NgramCnn::grads() {
  return {&emb_.grad_weight,   &conv3_.grad_weight, &conv3_.grad_bias,
          &conv5_.grad_weight, &conv5_.grad_bias,   &conv7_.grad_weight,
          &conv7_.grad_bias,   &fc_.grad_weight,    &fc_.grad_bias};
}

std::string NgramCnn::arch_tag() const {
  return "ngram-v1/r" + std::to_string(vocab_rows_) + "/c" +
         std::to_string(num_classes_);
}

void NgramCnn::save(const std::filesystem::path& path) const {
  auto* self = const_cast<NgramCnn*>(this);
  std::vector<const nn::Tensor*> tensors;
  for (nn::Tensor* t : self->params()) tensors.push_back(t);
  nn::save_weights(path, arch_tag(), tensors);
}

NgramCnn NgramCnn::load(const std::filesystem::path& path,
                        std::size_t vocab_rows, int num_classes) {
  NgramCnn model(vocab_rows, num_classes, 0);
  nn::load_weights(path, model.arch_tag(), model.params());
  return model;
}

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

template <typename Model>
TrainLog train_cnn(Model& model,
                   const std::vector<const typename Model::Input*>& inputs,
                   const std::vector<int>& labels, const CnnTrainConfig& cfg) {
  const std::size_t n = inputs.size();
  if (n == 0) throw ValidationError("train_cnn: empty dataset");
  if (labels.size() != n) {
    throw ValidationError("train_cnn: inputs/labels size mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (inputs[i] == nullptr) throw ValidationError("train_cnn: null input");
    if (labels[i] < 0 || labels[i] >= model.num_classes()) {
      throw ValidationError("train_cnn: label out of range at sample " +
                            std::to_string(i));
    }
  }
  if (cfg.epochs < 1 || cfg.batch_size < 1 || !(cfg.lr > 0.0)) {
    throw ValidationError("train_cnn: bad hyperparameters");
  }

  std::mt19937_64 rng(cfg.seed);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  deterministic_shuffle(order, rng);

  std::size_t n_val = 0;
  if (cfg.patience > 0) {
    if (!(cfg.val_fraction >= 0.0 && cfg.val_fraction < 1.0)) {
      throw ValidationError("train_cnn: val_fraction must be in [0, 1)");
    }
    n_val = static_cast<std::size_t>(cfg.val_fraction * static_cast<double>(n));
  }
  std::vector<std::size_t> val_idx(order.end() - static_cast<std::ptrdiff_t>(n_val),
                                   order.end());
  std::vector<std::size_t> train_idx(order.begin(),
                                     order.end() - static_cast<std::ptrdiff_t>(n_val));
  const bool early_stop = n_val >= 1;

  nn::Adam opt(cfg.lr);
  opt.attach(model.params(), model.grads());

  TrainLog log;
  log.train_samples = train_idx.size();
  log.val_samples = n_val;

  const auto eval_loss = [&](const std::vector<std::size_t>& idx) {
    double total = 0.0;
    for (std::size_t i : idx) {
      const nn::Tensor logits = model.forward(*inputs[i]);
      total += nn::softmax_cross_entropy(logits, labels[i]).loss;
    }
    return total / static_cast<double>(idx.size());
  };

  std::vector<std::vector<double>> best_params;
  double best_val = std::numeric_limits<double>::infinity();
  int bad_epochs = 0;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    deterministic_shuffle(train_idx, rng);
    double epoch_loss = 0.0;
    std::size_t in_batch = 0;
    for (std::size_t s = 0; s < train_idx.size(); ++s) {
      const std::size_t i = train_idx[s];
      const nn::Tensor logits = model.forward(*inputs[i]);
      const nn::SoftmaxLoss sl = nn::softmax_cross_entropy(logits, labels[i]);
      if (!std::isfinite(sl.loss)) {
        throw Error("training diverged: non-finite loss at epoch " +
                    std::to_string(epoch) + ", sample " + std::to_string(i) +
                    " (try a lower learning rate)");
      }
      epoch_loss += sl.loss;
      model.backward(sl.grad);
      ++in_batch;
      if (in_batch == static_cast<std::size_t>(cfg.batch_size) ||
          s + 1 == train_idx.size()) {
        opt.step(1.0 / static_cast<double>(in_batch));
        in_batch = 0;
      }
    }
    log.train_loss.push_back(epoch_loss / static_cast<double>(train_idx.size()));

    if (early_stop) {
      const double v = eval_loss(val_idx);
      log.val_loss.push_back(v);
      if (v < best_val) {
        best_val = v;
        log.best_epoch = epoch;
        bad_epochs = 0;
        best_params.clear();
        for (nn::Tensor* t : model.params()) best_params.push_back(t->data);
      } else if (++bad_epochs >= cfg.patience) {
        break;
      }
    } else {
      log.best_epoch = epoch;
    }
  }

  if (early_stop && !best_params.empty()) {
    const auto params = model.params();
    for (std::size_t i = 0; i < params.size(); ++i) {
      params[i]->data = best_params[i];
    }
  }
  return log;
}

template <typename Model>
std::vector<std::vector<double>> extract_features(
    Model& model, const std::vector<const typename Model::Input*>& inputs) {
  std::vector<std::vector<double>> rows;
  rows.reserve(inputs.size());
  for (const auto* x : inputs) {
    if (x == nullptr) throw ValidationError("extract_features: null input");
    model.forward(*x);
    rows.push_back(model.features());
  }
  return rows;
}

// ---------------------------------------------------------------------------
// Out-of-fold extraction
// ---------------------------------------------------------------------------

template <typename Model>
DeepFeatureResult extract_oof(
    const std::string& category,
    const std::vector<const typename Model::Input*>& inputs,
    const std::vector<int>& labels, int folds, const CnnTrainConfig& cfg,
    const std::function<Model(std::uint64_t seed)>& make_model,
    const std::filesystem::path& model_dir, const std::string& stem) {
  if (folds < 2) {
    throw ValidationError("out-of-fold extraction needs >= 2 folds");
  }
  if (inputs.size() != labels.size()) {
    throw ValidationError("extract_oof: inputs/labels size mismatch");
  }
  const KFoldPlan plan = kfold_plan(labels, folds, cfg.seed);

  DeepFeatureResult res;
  res.category = category;
  res.names = hidden_feature_names(Model::kFeatureDim);
  res.rows.assign(inputs.size(), {});
  res.fold_of.assign(inputs.size(), -1);

  const auto gather = [&](const std::vector<std::size_t>& idx) {
    std::pair<std::vector<const typename Model::Input*>, std::vector<int>> out;
    for (std::size_t i : idx) {
      out.first.push_back(inputs[i]);
      out.second.push_back(labels[i]);
    }
    return out;
  };

  for (int fold = 0; fold < folds; ++fold) {
    const auto [tr_in, tr_lab] = gather(plan.train_indices(fold));
    Model model = make_model(fold_seed(cfg.seed, fold));
    CnnTrainConfig fold_cfg = cfg;
    fold_cfg.seed = fold_seed(cfg.seed, fold);
    res.fold_logs.push_back(train_cnn(model, tr_in, tr_lab, fold_cfg));
    for (std::size_t i : plan.eval_indices(fold)) {
      model.forward(*inputs[i]);
      res.rows[i] = model.features();
      res.fold_of[i] = fold;
    }
    if (!model_dir.empty()) {
      model.save(model_dir / (stem + "_fold" + std::to_string(fold) + ".mfnn"));
    }
  }

  std::vector<std::size_t> labeled;
  std::vector<std::size_t> unlabeled;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] >= 0 ? labeled : unlabeled).push_back(i);
  }
  const auto [full_in, full_lab] = gather(labeled);
  Model full = make_model(cfg.seed);
  res.full_log = train_cnn(full, full_in, full_lab, cfg);
  for (std::size_t i : unlabeled) {
    full.forward(*inputs[i]);
    res.rows[i] = full.features();
  }
  if (!model_dir.empty()) {
    full.save(model_dir / (stem + "_full.mfnn"));
  }
  return res;
}

// Explicit instantiations for the three architectures.
template TrainLog train_cnn<GrayscaleCnn>(
    GrayscaleCnn&, const std::vector<const nn::Tensor*>&,
    const std::vector<int>&, const CnnTrainConfig&);
template TrainLog train_cnn<EntropyCnn>(
    EntropyCnn&, const std::vector<const nn::Tensor*>&,
    const std::vector<int>&, const CnnTrainConfig&);
template TrainLog train_cnn<NgramCnn>(
    NgramCnn&, const std::vector<const std::vector<int>*>&,
    const std::vector<int>&, const CnnTrainConfig&);

template std::vector<std::vector<double>> extract_features<GrayscaleCnn>(
    GrayscaleCnn&, const std::vector<const nn::Tensor*>&);
template std::vector<std::vector<double>> extract_features<EntropyCnn>(
    EntropyCnn&, const std::vector<const nn::Tensor*>&);
template std::vector<std::vector<double>> extract_features<NgramCnn>(
    NgramCnn&, const std::vector<const std::vector<int>*>&);

template DeepFeatureResult extract_oof<GrayscaleCnn>(
    const std::string&, const std::vector<const nn::Tensor*>&,
    const std::vector<int>&, int, const CnnTrainConfig&,
    const std::function<GrayscaleCnn(std::uint64_t)>&,
    const std::filesystem::path&, const std::string&);
template DeepFeatureResult extract_oof<EntropyCnn>(
    const std::string&, const std::vector<const nn::Tensor*>&,
    const std::vector<int>&, int, const CnnTrainConfig&,
    const std::function<EntropyCnn(std::uint64_t)>&,
    const std::filesystem::path&, const std::string&);
template DeepFeatureResult extract_oof<NgramCnn>(
    const std::string&, const std::vector<const std::vector<int>*>&,
    const std::vector<int>&, int, const CnnTrainConfig&,
    const std::function<NgramCnn(std::uint64_t)>&,
    const std::filesystem::path&, const std::string&);

}  // namespace malfuse
