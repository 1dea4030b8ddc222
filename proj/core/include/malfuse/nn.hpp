#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <random>
#include <string>
#include <vector>

namespace malfuse::nn {

// ---------------------------------------------------------------------------
// Tensors
// ---------------------------------------------------------------------------

// Dense row-major tensor of doubles.  Computation runs in double throughout;
// serialized weights are stored as little-endian float32.
struct Tensor {
  std::vector<std::size_t> shape;
  std::vector<double> data;

  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> s);

  std::size_t size() const { return data.size(); }
  std::size_t dim(std::size_t i) const { return shape[i]; }
  void fill(double v) { std::fill(data.begin(), data.end(), v); }

  // 3D access [c][h][w] and 2D access [c][l]; bounds are the caller's job.
  double& at3(std::size_t c, std::size_t h, std::size_t w) {
    return data[(c * shape[1] + h) * shape[2] + w];
  }
  double at3(std::size_t c, std::size_t h, std::size_t w) const {
    return data[(c * shape[1] + h) * shape[2] + w];
  }
  double& at2(std::size_t c, std::size_t l) { return data[c * shape[1] + l]; }
  double at2(std::size_t c, std::size_t l) const { return data[c * shape[1] + l]; }
};

std::size_t shape_size(const std::vector<std::size_t>& shape);

// Portable uniform double in [0, 1): top 53 bits of a mt19937_64 draw.
double uniform01(std::mt19937_64& rng);

// He-uniform initialization: uniform(-limit, limit), limit = sqrt(6/fan_in).
void he_uniform_init(Tensor& t, std::size_t fan_in, std::mt19937_64& rng);

// ---------------------------------------------------------------------------
// Layers
//
// Single-sample layers: forward caches whatever backward needs; backward
// consumes the gradient w.r.t. the output, accumulates parameter gradients
// (+=) and returns the gradient w.r.t. the input.  Call zero_grads() between
// optimizer steps.
// ---------------------------------------------------------------------------

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Tensor forward(const Tensor& x) = 0;
  virtual Tensor backward(const Tensor& grad_out) = 0;
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
};

// 2D convolution, valid padding, stride 1.  Input [Cin, H, W], output
// [Cout, H-kh+1, W-kw+1].
class Conv2d final : public Layer {
 public:
  Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh, std::size_t kw,
         std::mt19937_64& rng);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&weight, &bias}; }
  std::vector<Tensor*> grads() override { return {&grad_weight, &grad_bias}; }

  Tensor weight;  // [Cout, Cin, kh, kw]
  Tensor bias;    // [Cout]
  Tensor grad_weight, grad_bias;

 private:
  std::size_t in_ch_, out_ch_, kh_, kw_;
  Tensor input_;
};

// 1D convolution, valid padding, stride 1.  Input [Cin, L], output
// [Cout, L-k+1].
class Conv1d final : public Layer {
 public:
  Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
         std::mt19937_64& rng);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&weight, &bias}; }
  std::vector<Tensor*> grads() override { return {&grad_weight, &grad_bias}; }
  std::size_t kernel() const { return k_; }

  Tensor weight;  // [Cout, Cin, k]
  Tensor bias;    // [Cout]
  Tensor grad_weight, grad_bias;

 private:
  std::size_t in_ch_, out_ch_, k_;
  Tensor input_;
};

// 2x2 max pooling with stride 2 (output dims floor(in/2); a trailing odd
// row/column is dropped).  Ties pick the earliest element in scan order.
class MaxPool2d final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

// Length-2 max pooling with stride 2 over [C, L].
class MaxPool1d final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  std::vector<std::size_t> argmax_;
  std::vector<std::size_t> in_shape_;
};

class Relu final : public Layer {
 public:
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;

 private:
  Tensor input_;
};

// Normalizes across the channel axis at every spatial position (eps 1e-5),
// then applies a per-channel affine transform.  Works on [C, H, W], [C, L]
// and [C] tensors.
class LayerNorm final : public Layer {
 public:
  explicit LayerNorm(std::size_t channels);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&gamma, &beta}; }
  std::vector<Tensor*> grads() override { return {&grad_gamma, &grad_beta}; }

  Tensor gamma, beta;
  Tensor grad_gamma, grad_beta;

 private:
  std::size_t channels_;
  Tensor input_, normed_;
  std::vector<double> inv_std_;
};

// Fully connected layer on a flat input [In] -> [Out].
class Dense final : public Layer {
 public:
  Dense(std::size_t in, std::size_t out, std::mt19937_64& rng);
  Tensor forward(const Tensor& x) override;
  Tensor backward(const Tensor& grad_out) override;
  std::vector<Tensor*> params() override { return {&weight, &bias}; }
  std::vector<Tensor*> grads() override { return {&grad_weight, &grad_bias}; }

  Tensor weight;  // [Out, In]
  Tensor bias;    // [Out]
  Tensor grad_weight, grad_bias;

 private:
  std::size_t in_, out_;
  Tensor input_;
};

// Token embedding: ids -> [dim, L] feature map (channel-major so Conv1d can
// consume it directly).  Not a Layer because its input is integer ids.
class Embedding {
 public:
  Embedding(std::size_t rows, std::size_t dim, std::mt19937_64& rng);
  Tensor forward(const std::vector<int>& ids);
  void backward(const Tensor& grad_out);  // accumulates into grad_weight
  std::vector<Tensor*> params() { return {&weight}; }
  std::vector<Tensor*> grads() { return {&grad_weight}; }
  std::size_t rows() const { return rows_; }
  std::size_t dim() const { return dim_; }

  Tensor weight;  // [rows, dim]
  Tensor grad_weight;

 private:
  std::size_t rows_, dim_;
  std::vector<int> ids_;
};

// Max over the length axis of [C, L], restricted to positions where
// valid[l] is true.  With no valid position the output (and the gradient)
// is zero.  Not a generic Layer because of the mask argument.
class GlobalMaxPool1d {
 public:
  Tensor forward(const Tensor& x, const std::vector<char>& valid);
  Tensor backward(const Tensor& grad_out);

 private:
  std::vector<long> argmax_;  // -1 when no valid position
  std::vector<std::size_t> in_shape_;
};

// ---------------------------------------------------------------------------
// Loss and optimizer
// ---------------------------------------------------------------------------

// Softmax cross-entropy on logits.  Probabilities are clipped to 1e-15
// before the log; the gradient is (softmax - onehot).
struct SoftmaxLoss {
  double loss = 0.0;
  std::vector<double> probs;
  Tensor grad;  // same shape as the logits
};
SoftmaxLoss softmax_cross_entropy(const Tensor& logits, int target);

std::vector<double> softmax(const std::vector<double>& logits);

class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8);
  // Registers parameter/gradient pairs; call once after the model is built.
  void attach(const std::vector<Tensor*>& params,
              const std::vector<Tensor*>& grads);
  // Applies one update from the accumulated gradients (scaled by `grad_scale`,
  // e.g. 1/batch for mean gradients), then zeroes them.
  void step(double grad_scale = 1.0);

 private:
  double lr_, beta1_, beta2_, eps_;
  std::uint64_t t_ = 0;
  std::vector<Tensor*> params_, grads_;
  std::vector<std::vector<double>> m_, v_;
};

// ---------------------------------------------------------------------------
// Weight serialization
// ---------------------------------------------------------------------------

// Binary container: magic "MFNN", a format version, an architecture tag and
// every parameter tensor (shape + float32 little-endian data).  Loading
// validates the tag and all shapes.
void save_weights(const std::filesystem::path& path, const std::string& arch_tag,
                  const std::vector<const Tensor*>& tensors);
void load_weights(const std::filesystem::path& path, const std::string& arch_tag,
                  const std::vector<Tensor*>& tensors);

}  // namespace malfuse::nn
