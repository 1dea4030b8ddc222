#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <string>
#include <vector>

#include "malfuse/corpus.hpp"
#include "malfuse/nn.hpp"
#include "malfuse/vocab.hpp"

namespace malfuse {

// ---------------------------------------------------------------------------
// Input preparation
// ---------------------------------------------------------------------------

inline constexpr std::size_t kImageSide = 255;        // grayscale net input
inline constexpr std::size_t kEntropyInputLen = 512;  // entropy net input
inline constexpr std::size_t kByteSeqCap = 1u << 16;  // byte id sequences
inline constexpr std::size_t kOpcodeSeqCap = 1u << 14;  // opcode id sequences
inline constexpr int kBytePadId = 256;  // byte embedding rows = 257

// Byte dump rendered as a grayscale image, Lanczos-resized to
// kImageSide x kImageSide and scaled to [0, 1].  Shape [1, 255, 255].
nn::Tensor grayscale_input(const HexDump& dump);

// Structural-entropy stream over `chunk`-byte chunks, right-padded with
// zeros / truncated to length `len`.  Shape [1, len].
nn::Tensor entropy_input(const HexDump& dump, std::size_t len = kEntropyInputLen,
                         std::size_t chunk = 256);

// Defined bytes as token ids (0..255), truncated to `cap`.
std::vector<int> byte_id_input(const HexDump& dump,
                               std::size_t cap = kByteSeqCap);

// Opcode ids under `opcodes` (unknown mnemonics map to opcodes.size()),
// truncated to `cap`.  Pad id is opcodes.size() + 1.
std::vector<int> opcode_id_input(const AsmListing& listing, const Vocab& opcodes,
                                 std::size_t cap = kOpcodeSeqCap);

// Column names for a hidden-activation block: h000, h001, ...
std::vector<std::string> hidden_feature_names(std::size_t dim);

// ---------------------------------------------------------------------------
// Architectures
//
// Each model is a single-sample network: forward(input) returns logits and
// caches the exported feature layer (the last hidden layer, post-ReLU);
// backward(grad_logits) accumulates parameter gradients.
// ---------------------------------------------------------------------------

// 255x255 grayscale image net: three conv/pool/layer-norm blocks
// (5x5x50, 3x3x50, 3x3x70) into dense 256 (feature layer) and a softmax head.
class GrayscaleCnn {
 public:
  using Input = nn::Tensor;
  static constexpr std::size_t kFeatureDim = 256;

  GrayscaleCnn(int num_classes, std::uint64_t seed);

  nn::Tensor forward(const Input& image);  // [1,255,255] -> logits [C]
  void backward(const nn::Tensor& grad_logits);
  const std::vector<double>& features() const { return features_; }
  std::vector<nn::Tensor*> params();
  std::vector<nn::Tensor*> grads();
  int num_classes() const { return num_classes_; }
  std::string arch_tag() const;

  void save(const std::filesystem::path& path) const;
  static GrayscaleCnn load(const std::filesystem::path& path, int num_classes);

 private:
  int num_classes_;
  std::mt19937_64 rng_;  // consumed during construction only
  nn::Conv2d conv1_;
  nn::MaxPool2d pool1_;
  nn::LayerNorm ln1_;
  nn::Conv2d conv2_;
  nn::MaxPool2d pool2_;
  nn::LayerNorm ln2_;
  nn::Conv2d conv3_;
  nn::MaxPool2d pool3_;
  nn::LayerNorm ln3_;
  nn::Dense fc1_;
  nn::Dense fc2_;
  nn::Relu relu1_, relu2_, relu3_, relu4_;
  std::vector<double> features_;
};

// Structural-entropy stream net: three Conv1d/pool blocks (k3x50, k3x70,
// k3x70) into dense 1000 then dense 300 (feature layer) and a softmax head.
class EntropyCnn {
 public:
  using Input = nn::Tensor;
  static constexpr std::size_t kFeatureDim = 300;

  EntropyCnn(int num_classes, std::uint64_t seed,
             std::size_t input_len = kEntropyInputLen);

  nn::Tensor forward(const Input& stream);  // [1, input_len] -> logits [C]
  void backward(const nn::Tensor& grad_logits);
  const std::vector<double>& features() const { return features_; }
  std::vector<nn::Tensor*> params();
  std::vector<nn::Tensor*> grads();
  int num_classes() const { return num_classes_; }
  std::size_t input_len() const { return input_len_; }
  std::size_t flat_dim() const;  // channels x length after the conv stack
  std::string arch_tag() const;

  void save(const std::filesystem::path& path) const;
  static EntropyCnn load(const std::filesystem::path& path, int num_classes,
                         std::size_t input_len = kEntropyInputLen);

 private:
  int num_classes_;
  std::size_t input_len_;
  std::mt19937_64 rng_;
  nn::Conv1d conv1_;
  nn::MaxPool1d pool1_;
  nn::Conv1d conv2_;
  nn::MaxPool1d pool2_;
  nn::Conv1d conv3_;
  nn::MaxPool1d pool3_;
  nn::Dense fc1_;
  nn::Dense fc2_;
  nn::Dense fc3_;
  nn::Relu relu1_, relu2_, relu3_, relu4_, relu5_;
  std::vector<double> features_;
};

// Token-sequence net: embedding (dim 4) into three parallel Conv1d branches
// (k = 3, 5, 7; 100 filters each, ReLU) with masked global max-pooling,
// concatenated to 300 (feature layer) and a softmax head.  The last
// embedding row is the pad id; windows touching a pad are excluded from the
// pool.
class NgramCnn {
 public:
  using Input = std::vector<int>;
  static constexpr std::size_t kFeatureDim = 300;

  NgramCnn(std::size_t vocab_rows, int num_classes, std::uint64_t seed);

  int pad_id() const { return static_cast<int>(vocab_rows_) - 1; }
  std::size_t vocab_rows() const { return vocab_rows_; }

  nn::Tensor forward(const Input& ids);  // token ids -> logits [C]
  void backward(const nn::Tensor& grad_logits);
  const std::vector<double>& features() const { return features_; }
  std::vector<nn::Tensor*> params();
  std::vector<nn::Tensor*> grads();
  int num_classes() const { return num_classes_; }
  std::string arch_tag() const;

  void save(const std::filesystem::path& path) const;
  static NgramCnn load(const std::filesystem::path& path,
                       std::size_t vocab_rows, int num_classes);

 private:
  std::size_t vocab_rows_;
  int num_classes_;
  std::mt19937_64 rng_;
  nn::Embedding emb_;
  nn::Conv1d conv3_, conv5_, conv7_;
  nn::Relu relu3_, relu5_, relu7_;
  nn::GlobalMaxPool1d pool3_, pool5_, pool7_;
  nn::Dense fc_;
  std::vector<double> features_;
  std::size_t padded_len_ = 0;
};

// ---------------------------------------------------------------------------
// Training
// ---------------------------------------------------------------------------

struct CnnTrainConfig {
  int epochs = 30;
  int batch_size = 32;
  double lr = 1e-3;
  // Early stopping: when patience > 0 and the dataset is large enough to
  // carve a validation split (floor(val_fraction * n) >= 1), training stops
  // after `patience` epochs without validation-loss improvement and the
  // best-epoch weights are restored.
  int patience = 5;
  double val_fraction = 0.1;
  std::uint64_t seed = 1;
};

struct TrainLog {
  std::vector<double> train_loss;  // mean per epoch over the training split
  std::vector<double> val_loss;    // empty when early stopping is inactive
  int best_epoch = -1;             // epoch whose weights were kept
  std::size_t train_samples = 0;
  std::size_t val_samples = 0;
};

// Minimizes softmax cross-entropy with Adam; gradients are averaged over
// mini-batches of cfg.batch_size.  Deterministic given cfg.seed.  Throws
// on non-finite loss (learning rate too high).
template <typename Model>
TrainLog train_cnn(Model& model,
                   const std::vector<const typename Model::Input*>& inputs,
                   const std::vector<int>& labels, const CnnTrainConfig& cfg);

// Feature rows for a frozen model, one per input.
template <typename Model>
std::vector<std::vector<double>> extract_features(
    Model& model, const std::vector<const typename Model::Input*>& inputs);

// ---------------------------------------------------------------------------
// Out-of-fold extraction
// ---------------------------------------------------------------------------

struct DeepFeatureResult {
  std::string category;
  std::vector<std::string> names;
  std::vector<std::vector<double>> rows;  // one per sample
  // Fold whose model scored each sample; -1 = the full-data model
  // (unlabeled samples).
  std::vector<int> fold_of;
  std::vector<TrainLog> fold_logs;
  TrainLog full_log;
};

// Per-sample deep features without label leakage: labeled sample i is scored
// by the fold model that never trained on i; unlabeled samples are scored by
// a model trained on all labeled data.  Fold assignment is stratified and
// seeded from cfg.seed.  When model_dir is non-empty, fold models are saved
// as <stem>_fold<k>.mfnn and the full model as <stem>_full.mfnn.
template <typename Model>
DeepFeatureResult extract_oof(
    const std::string& category,
    const std::vector<const typename Model::Input*>& inputs,
    const std::vector<int>& labels, int folds, const CnnTrainConfig& cfg,
    const std::function<Model(std::uint64_t seed)>& make_model,
    const std::filesystem::path& model_dir = {},
    const std::string& stem = "model");

}  // namespace malfuse
