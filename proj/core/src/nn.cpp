#include "malfuse/nn.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "malfuse/errors.hpp"

namespace malfuse::nn {

Tensor::Tensor(std::vector<std::size_t> s) : shape(std::move(s)) {
  data.assign(shape_size(shape), 0.0);
}

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return shape.empty() ? 0 : n;
}

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void he_uniform_init(Tensor& t, std::size_t fan_in, std::mt19937_64& rng) {
  const double limit = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& v : t.data) v = (2.0 * uniform01(rng) - 1.0) * limit;
}

namespace {

void require(bool cond, const char* msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::size_t in_ch, std::size_t out_ch, std::size_t kh,
               std::size_t kw, std::mt19937_64& rng)
    : weight({out_ch, in_ch, kh, kw}),
      bias({out_ch}),
      grad_weight({out_ch, in_ch, kh, kw}),
      grad_bias({out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      kh_(kh),
      kw_(kw) {
  he_uniform_init(weight, in_ch * kh * kw, rng);
}

Tensor Conv2d::forward(const Tensor& x) {
  require(x.shape.size() == 3 && x.shape[0] == in_ch_,
          "conv2d: bad input shape");
  require(x.shape[1] >= kh_ && x.shape[2] >= kw_,
          "conv2d: input smaller than kernel");
  input_ = x;
  const std::size_t oh = x.shape[1] - kh_ + 1, ow = x.shape[2] - kw_ + 1;
  Tensor out({out_ch_, oh, ow});
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (long ocl = 0; ocl < static_cast<long>(out_ch_); ++ocl) {
    const auto oc = static_cast<std::size_t>(ocl);
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        double acc = bias.data[oc];
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          for (std::size_t a = 0; a < kh_; ++a) {
            const double* xrow = &x.data[(ic * x.shape[1] + r + a) * x.shape[2] + c];
            const double* wrow =
                &weight.data[((oc * in_ch_ + ic) * kh_ + a) * kw_];
            for (std::size_t b = 0; b < kw_; ++b) acc += wrow[b] * xrow[b];
          }
        }
        out.at3(oc, r, c) = acc;
      }
    }
  }
  return out;
}

Tensor Conv2d::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  const std::size_t oh = grad_out.shape[1], ow = grad_out.shape[2];
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (long ocl = 0; ocl < static_cast<long>(out_ch_); ++ocl) {
    const auto oc = static_cast<std::size_t>(ocl);
    double gb = 0.0;
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t c = 0; c < ow; ++c) {
        const double go = grad_out.at3(oc, r, c);
        gb += go;
        for (std::size_t ic = 0; ic < in_ch_; ++ic) {
          for (std::size_t a = 0; a < kh_; ++a) {
            const double* xrow = &x.data[(ic * x.shape[1] + r + a) * x.shape[2] + c];
            double* gwrow =
                &grad_weight.data[((oc * in_ch_ + ic) * kh_ + a) * kw_];
            for (std::size_t b = 0; b < kw_; ++b) gwrow[b] += go * xrow[b];
          }
        }
      }
    }
    grad_bias.data[oc] += gb;
  }

  Tensor grad_in(x.shape);
#if defined(_OPENMP)
#pragma omp parallel for schedule(static)
#endif
  for (long icl = 0; icl < static_cast<long>(in_ch_); ++icl) {
    const auto ic = static_cast<std::size_t>(icl);
    for (std::size_t oc = 0; oc < out_ch_; ++oc) {
      for (std::size_t r = 0; r < oh; ++r) {
        for (std::size_t c = 0; c < ow; ++c) {
          const double go = grad_out.at3(oc, r, c);
          if (go == 0.0) continue;
          for (std::size_t a = 0; a < kh_; ++a) {
            double* girow =
                &grad_in.data[(ic * x.shape[1] + r + a) * x.shape[2] + c];
            const double* wrow =
                &weight.data[((oc * in_ch_ + ic) * kh_ + a) * kw_];
            for (std::size_t b = 0; b < kw_; ++b) girow[b] += go * wrow[b];
          }
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Conv1d
// ---------------------------------------------------------------------------

Conv1d::Conv1d(std::size_t in_ch, std::size_t out_ch, std::size_t k,
               std::mt19937_64& rng)
    : weight({out_ch, in_ch, k}),
      bias({out_ch}),
      grad_weight({out_ch, in_ch, k}),
      grad_bias({out_ch}),
      in_ch_(in_ch),
      out_ch_(out_ch),
      k_(k) {
  he_uniform_init(weight, in_ch * k, rng);
}

Tensor Conv1d::forward(const Tensor& x) {
  require(x.shape.size() == 2 && x.shape[0] == in_ch_,
          "conv1d: bad input shape");
  require(x.shape[1] >= k_, "conv1d: input shorter than kernel");
  input_ = x;
  const std::size_t ol = x.shape[1] - k_ + 1;
  Tensor out({out_ch_, ol});
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    for (std::size_t t = 0; t < ol; ++t) {
      double acc = bias.data[oc];
      for (std::size_t ic = 0; ic < in_ch_; ++ic) {
        const double* xrow = &x.data[ic * x.shape[1] + t];
        const double* wrow = &weight.data[(oc * in_ch_ + ic) * k_];
        for (std::size_t b = 0; b < k_; ++b) acc += wrow[b] * xrow[b];
      }
      out.at2(oc, t) = acc;
    }
  }
  return out;
}

Tensor Conv1d::backward(const Tensor& grad_out) {
  const Tensor& x = input_;
  const std::size_t ol = grad_out.shape[1];
  Tensor grad_in(x.shape);
  for (std::size_t oc = 0; oc < out_ch_; ++oc) {
    for (std::size_t t = 0; t < ol; ++t) {
      const double go = grad_out.at2(oc, t);
      if (go == 0.0) continue;
      grad_bias.data[oc] += go;
      for (std::size_t ic = 0; ic < in_ch_; ++ic) {
        const double* xrow = &x.data[ic * x.shape[1] + t];
        double* girow = &grad_in.data[ic * x.shape[1] + t];
        double* gwrow = &grad_weight.data[(oc * in_ch_ + ic) * k_];
        const double* wrow = &weight.data[(oc * in_ch_ + ic) * k_];
        for (std::size_t b = 0; b < k_; ++b) {
          gwrow[b] += go * xrow[b];
          girow[b] += go * wrow[b];
        }
      }
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Pooling
// ---------------------------------------------------------------------------

Tensor MaxPool2d::forward(const Tensor& x) {
  require(x.shape.size() == 3, "maxpool2d: expected [C,H,W]");
  require(x.shape[1] >= 2 && x.shape[2] >= 2, "maxpool2d: input too small");
  in_shape_ = x.shape;
  const std::size_t C = x.shape[0], oh = x.shape[1] / 2, ow = x.shape[2] / 2;
  Tensor out({C, oh, ow});
  argmax_.assign(out.size(), 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t r = 0; r < oh; ++r) {
      for (std::size_t q = 0; q < ow; ++q) {
        double best = -1.0;
        std::size_t best_idx = 0;
        bool first = true;
        for (std::size_t a = 0; a < 2; ++a) {
          for (std::size_t b = 0; b < 2; ++b) {
            const std::size_t idx =
                (c * x.shape[1] + 2 * r + a) * x.shape[2] + 2 * q + b;
            if (first || x.data[idx] > best) {
              best = x.data[idx];
              best_idx = idx;
              first = false;
            }
          }
        }
        const std::size_t o = (c * oh + r) * ow + q;
        out.data[o] = best;
        argmax_[o] = best_idx;
      }
    }
  }
  return out;
}

Tensor MaxPool2d::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in.data[argmax_[o]] += grad_out.data[o];
  }
  return grad_in;
}

Tensor MaxPool1d::forward(const Tensor& x) {
  require(x.shape.size() == 2, "maxpool1d: expected [C,L]");
  require(x.shape[1] >= 2, "maxpool1d: input too small");
  in_shape_ = x.shape;
  const std::size_t C = x.shape[0], ol = x.shape[1] / 2;
  Tensor out({C, ol});
  argmax_.assign(out.size(), 0);
  for (std::size_t c = 0; c < C; ++c) {
    for (std::size_t t = 0; t < ol; ++t) {
      const std::size_t i0 = c * x.shape[1] + 2 * t;
      const std::size_t best = x.data[i0] >= x.data[i0 + 1] ? i0 : i0 + 1;
      out.at2(c, t) = x.data[best];
      argmax_[c * ol + t] = best;
    }
  }
  return out;
}

Tensor MaxPool1d::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  for (std::size_t o = 0; o < grad_out.size(); ++o) {
    grad_in.data[argmax_[o]] += grad_out.data[o];
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Relu
// ---------------------------------------------------------------------------

Tensor Relu::forward(const Tensor& x) {
  input_ = x;
  Tensor out = x;
  for (double& v : out.data) v = v > 0.0 ? v : 0.0;
  return out;
}

Tensor Relu::backward(const Tensor& grad_out) {
  Tensor grad_in = grad_out;
  for (std::size_t i = 0; i < grad_in.size(); ++i) {
    if (input_.data[i] <= 0.0) grad_in.data[i] = 0.0;
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// LayerNorm
// ---------------------------------------------------------------------------

LayerNorm::LayerNorm(std::size_t channels)
    : gamma({channels}),
      beta({channels}),
      grad_gamma({channels}),
      grad_beta({channels}),
      channels_(channels) {
  gamma.fill(1.0);
}

Tensor LayerNorm::forward(const Tensor& x) {
  require(!x.shape.empty() && x.shape[0] == channels_,
          "layernorm: channel mismatch");
  input_ = x;
  const std::size_t C = channels_, P = x.size() / C;
  constexpr double kEps = 1e-5;
  Tensor out(x.shape);
  normed_ = Tensor(x.shape);
  inv_std_.assign(P, 0.0);
  for (std::size_t p = 0; p < P; ++p) {
    double mean = 0.0;
    for (std::size_t c = 0; c < C; ++c) mean += x.data[c * P + p];
    mean /= static_cast<double>(C);
    double var = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double d = x.data[c * P + p] - mean;
      var += d * d;
    }
    var /= static_cast<double>(C);
    const double inv_std = 1.0 / std::sqrt(var + kEps);
    inv_std_[p] = inv_std;
    for (std::size_t c = 0; c < C; ++c) {
      const double xhat = (x.data[c * P + p] - mean) * inv_std;
      normed_.data[c * P + p] = xhat;
      out.data[c * P + p] = gamma.data[c] * xhat + beta.data[c];
    }
  }
  return out;
}

Tensor LayerNorm::backward(const Tensor& grad_out) {
  const std::size_t C = channels_, P = input_.size() / C;
  Tensor grad_in(input_.shape);
  for (std::size_t p = 0; p < P; ++p) {
    double mean_gxhat = 0.0, mean_gxhat_xhat = 0.0;
    for (std::size_t c = 0; c < C; ++c) {
      const double go = grad_out.data[c * P + p];
      const double xhat = normed_.data[c * P + p];
      grad_gamma.data[c] += go * xhat;
      grad_beta.data[c] += go;
      const double gxhat = go * gamma.data[c];
      mean_gxhat += gxhat;
      mean_gxhat_xhat += gxhat * xhat;
    }
    mean_gxhat /= static_cast<double>(C);
    mean_gxhat_xhat /= static_cast<double>(C);
    for (std::size_t c = 0; c < C; ++c) {
      const double gxhat = grad_out.data[c * P + p] * gamma.data[c];
      const double xhat = normed_.data[c * P + p];
      grad_in.data[c * P + p] =
          inv_std_[p] * (gxhat - mean_gxhat - xhat * mean_gxhat_xhat);
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(std::size_t in, std::size_t out, std::mt19937_64& rng)
    : weight({out, in}),
      bias({out}),
      grad_weight({out, in}),
      grad_bias({out}),
      in_(in),
      out_(out) {
  he_uniform_init(weight, in, rng);
}

Tensor Dense::forward(const Tensor& x) {
  require(x.size() == in_, "dense: bad input size");
  input_ = x;
  Tensor out({out_});
  for (std::size_t o = 0; o < out_; ++o) {
    double acc = bias.data[o];
    const double* wrow = &weight.data[o * in_];
    for (std::size_t i = 0; i < in_; ++i) acc += wrow[i] * x.data[i];
    out.data[o] = acc;
  }
  return out;
}

Tensor Dense::backward(const Tensor& grad_out) {
  Tensor grad_in({in_});
  for (std::size_t o = 0; o < out_; ++o) {
    const double go = grad_out.data[o];
    grad_bias.data[o] += go;
    if (go == 0.0) continue;
    double* gwrow = &grad_weight.data[o * in_];
    const double* wrow = &weight.data[o * in_];
    for (std::size_t i = 0; i < in_; ++i) {
      gwrow[i] += go * input_.data[i];
      grad_in.data[i] += go * wrow[i];
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

Embedding::Embedding(std::size_t rows, std::size_t dim, std::mt19937_64& rng)
    : weight({rows, dim}), grad_weight({rows, dim}), rows_(rows), dim_(dim) {
  for (double& v : weight.data) v = (2.0 * uniform01(rng) - 1.0) * 0.05;
}

Tensor Embedding::forward(const std::vector<int>& ids) {
  ids_ = ids;
  Tensor out({dim_, ids.size()});
  for (std::size_t l = 0; l < ids.size(); ++l) {
    const auto id = static_cast<std::size_t>(ids[l]);
    require(id < rows_, "embedding: id out of range");
    for (std::size_t d = 0; d < dim_; ++d) {
      out.at2(d, l) = weight.data[id * dim_ + d];
    }
  }
  return out;
}

void Embedding::backward(const Tensor& grad_out) {
  for (std::size_t l = 0; l < ids_.size(); ++l) {
    const auto id = static_cast<std::size_t>(ids_[l]);
    for (std::size_t d = 0; d < dim_; ++d) {
      grad_weight.data[id * dim_ + d] += grad_out.at2(d, l);
    }
  }
}

// ---------------------------------------------------------------------------
// GlobalMaxPool1d
// ---------------------------------------------------------------------------

Tensor GlobalMaxPool1d::forward(const Tensor& x, const std::vector<char>& valid) {
  require(x.shape.size() == 2, "globalmaxpool: expected [C,L]");
  require(valid.size() == x.shape[1], "globalmaxpool: mask length mismatch");
  in_shape_ = x.shape;
  const std::size_t C = x.shape[0], L = x.shape[1];
  Tensor out({C});
  argmax_.assign(C, -1);
  for (std::size_t c = 0; c < C; ++c) {
    double best = 0.0;
    long best_idx = -1;
    for (std::size_t l = 0; l < L; ++l) {
      if (!valid[l]) continue;
      const double v = x.at2(c, l);
      if (best_idx < 0 || v > best) {
        best = v;
        best_idx = static_cast<long>(c * L + l);
      }
    }
    out.data[c] = best_idx < 0 ? 0.0 : best;
    argmax_[c] = best_idx;
  }
  return out;
}

Tensor GlobalMaxPool1d::backward(const Tensor& grad_out) {
  Tensor grad_in(in_shape_);
  for (std::size_t c = 0; c < grad_out.size(); ++c) {
    if (argmax_[c] >= 0) {
      grad_in.data[static_cast<std::size_t>(argmax_[c])] += grad_out.data[c];
    }
  }
  return grad_in;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

std::vector<double> softmax(const std::vector<double>& logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    sum += p[i];
  }
  for (double& v : p) v /= sum;
  return p;
}

SoftmaxLoss softmax_cross_entropy(const Tensor& logits, int target) {
  require(target >= 0 && static_cast<std::size_t>(target) < logits.size(),
          "softmax loss: target out of range");
  SoftmaxLoss result;
  result.probs = softmax(logits.data);
  result.loss = -std::log(std::max(result.probs[static_cast<std::size_t>(target)],
                                   1e-15));
  result.grad = Tensor(logits.shape);
  for (std::size_t i = 0; i < result.probs.size(); ++i) {
    result.grad.data[i] = result.probs[i];
  }
  result.grad.data[static_cast<std::size_t>(target)] -= 1.0;
  return result;
}

// ---------------------------------------------------------------------------
// Adam
// ---------------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::attach(const std::vector<Tensor*>& params,
                  const std::vector<Tensor*>& grads) {
  require(params.size() == grads.size(), "adam: params/grads size mismatch");
  params_ = params;
  grads_ = grads;
  m_.clear();
  v_.clear();
  for (const Tensor* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

void Adam::step(double grad_scale) {
  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t k = 0; k < params_.size(); ++k) {
    Tensor& p = *params_[k];
    Tensor& g = *grads_[k];
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double grad = g.data[i] * grad_scale;
      m_[k][i] = beta1_ * m_[k][i] + (1.0 - beta1_) * grad;
      v_[k][i] = beta2_ * v_[k][i] + (1.0 - beta2_) * grad * grad;
      const double mhat = m_[k][i] / bc1;
      const double vhat = v_[k][i] / bc2;
      p.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
    }
    g.fill(0.0);
  }
}

// ---------------------------------------------------------------------------
// Serialization
// ---------------------------------------------------------------------------

namespace {

constexpr char kMagic[4] = {'M', 'F', 'N', 'N'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

template <typename T>
T read_pod(std::istream& in) {
  T v{};
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string read_string(std::istream& in) {
  const auto n = read_pod<std::uint32_t>(in);
  std::string s(n, '\0');
  in.read(s.data(), n);
  return s;
}

}  // namespace

void save_weights(const std::filesystem::path& path, const std::string& arch_tag,
                  const std::vector<const Tensor*>& tensors) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(kMagic, 4);
  write_pod(out, kVersion);
  write_string(out, arch_tag);
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(tensors.size()));
  for (const Tensor* t : tensors) {
    write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(t->shape.size()));
    for (std::size_t d : t->shape) {
      write_pod<std::uint64_t>(out, static_cast<std::uint64_t>(d));
    }
    for (double v : t->data) {
      write_pod<float>(out, static_cast<float>(v));
    }
  }
  if (!out) throw IoError("write failed: " + path.string());
}

void load_weights(const std::filesystem::path& path, const std::string& arch_tag,
                  const std::vector<Tensor*>& tensors) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw ParseError(path.string() + ": not a weights file");
  }
  if (read_pod<std::uint32_t>(in) != kVersion) {
    throw ParseError(path.string() + ": unsupported weights version");
  }
  const std::string tag = read_string(in);
  if (tag != arch_tag) {
    throw ValidationError(path.string() + ": architecture mismatch: file has '" +
                          tag + "', expected '" + arch_tag + "'");
  }
  const auto count = read_pod<std::uint32_t>(in);
  if (count != tensors.size()) {
    throw ValidationError(path.string() + ": tensor count mismatch");
  }
  for (Tensor* t : tensors) {
    const auto ndims = read_pod<std::uint32_t>(in);
    std::vector<std::size_t> shape(ndims);
    for (auto& d : shape) d = static_cast<std::size_t>(read_pod<std::uint64_t>(in));
    if (shape != t->shape) {
      throw ValidationError(path.string() + ": tensor shape mismatch");
    }
    for (double& v : t->data) v = static_cast<double>(read_pod<float>(in));
    if (!in) throw ParseError(path.string() + ": truncated weights file");
  }
}

}  // namespace malfuse::nn
