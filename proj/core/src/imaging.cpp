#include "malfuse/imaging.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numbers>

#include "malfuse/errors.hpp"

namespace malfuse {

std::size_t image_width_for(std::size_t n_bytes) {
  const std::size_t kb = 1024;
  if (n_bytes < 10 * kb) return 32;
  if (n_bytes < 30 * kb) return 64;
  if (n_bytes < 60 * kb) return 128;
  if (n_bytes < 100 * kb) return 256;
  if (n_bytes < 200 * kb) return 384;
  if (n_bytes < 500 * kb) return 512;
  if (n_bytes < 1000 * kb) return 768;
  return 1024;
}

GrayImage bytes_to_image(const std::vector<std::uint8_t>& bytes,
                         std::size_t width) {
  GrayImage img;
  img.width = width != 0 ? width : image_width_for(bytes.size());
  img.height = std::max<std::size_t>(1, (bytes.size() + img.width - 1) / img.width);
  img.pixels.assign(img.height * img.width, 0.0);
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    img.pixels[i] = static_cast<double>(bytes[i]);
  }
  return img;
}

GrayImage bytes_to_image(const HexDump& dump, std::size_t width) {
  std::vector<std::uint8_t> bytes(dump.bytes.size());
  for (std::size_t i = 0; i < dump.bytes.size(); ++i) {
    bytes[i] = dump.bytes[i] == kUndefinedByte
                   ? 0
                   : static_cast<std::uint8_t>(dump.bytes[i]);
  }
  return bytes_to_image(bytes, width);
}

namespace {

double sinc(double x) {
  if (x == 0.0) return 1.0;
  const double px = std::numbers::pi * x;
  return std::sin(px) / px;
}

double lanczos3(double x) {
  if (x <= -3.0 || x >= 3.0) return 0.0;
  return sinc(x) * sinc(x / 3.0);
}

struct KernelRow {
  std::size_t first = 0;           // first input index with nonzero weight
  std::vector<double> weights;     // normalized to sum 1
};

// One normalized clipped kernel per output position along one axis.
std::vector<KernelRow> precompute_kernels(std::size_t in_size,
                                          std::size_t out_size) {
  const double scale = static_cast<double>(in_size) / static_cast<double>(out_size);
  const double filterscale = std::max(scale, 1.0);
  const double support = 3.0 * filterscale;

  std::vector<KernelRow> rows(out_size);
  for (std::size_t i = 0; i < out_size; ++i) {
    const double center = (static_cast<double>(i) + 0.5) * scale;
    long lo = static_cast<long>(center - support + 0.5);
    long hi = static_cast<long>(center + support + 0.5);
    lo = std::max(lo, 0L);
    hi = std::min(hi, static_cast<long>(in_size));
    KernelRow row;
    row.first = static_cast<std::size_t>(lo);
    row.weights.resize(static_cast<std::size_t>(hi - lo));
    double sum = 0.0;
    for (long j = lo; j < hi; ++j) {
      const double w =
          lanczos3((static_cast<double>(j) + 0.5 - center) / filterscale);
      row.weights[static_cast<std::size_t>(j - lo)] = w;
      sum += w;
    }
    if (sum != 0.0) {
      for (double& w : row.weights) w /= sum;
    }
    rows[i] = std::move(row);
  }
  return rows;
}

}  // namespace

GrayImage resize_lanczos(const GrayImage& src, std::size_t out_height,
                         std::size_t out_width) {
  if (src.height == 0 || src.width == 0 || out_height == 0 || out_width == 0) {
    throw ValidationError("resize_lanczos: empty image or zero target size");
  }
  const auto kx = precompute_kernels(src.width, out_width);
  const auto ky = precompute_kernels(src.height, out_height);

  // Horizontal pass.
  GrayImage mid;
  mid.height = src.height;
  mid.width = out_width;
  mid.pixels.assign(mid.height * mid.width, 0.0);
  for (std::size_t r = 0; r < src.height; ++r) {
    for (std::size_t c = 0; c < out_width; ++c) {
      const KernelRow& k = kx[c];
      double acc = 0.0;
      for (std::size_t t = 0; t < k.weights.size(); ++t) {
        acc += k.weights[t] * src.at(r, k.first + t);
      }
      mid.at(r, c) = acc;
    }
  }

  // Vertical pass.
  GrayImage out;
  out.height = out_height;
  out.width = out_width;
  out.pixels.assign(out.height * out.width, 0.0);
  for (std::size_t r = 0; r < out_height; ++r) {
    const KernelRow& k = ky[r];
    for (std::size_t c = 0; c < out_width; ++c) {
      double acc = 0.0;
      for (std::size_t t = 0; t < k.weights.size(); ++t) {
        acc += k.weights[t] * mid.at(k.first + t, c);
      }
      out.at(r, c) = acc;
    }
  }
  return out;
}

std::vector<std::uint8_t> quantize_u8(const GrayImage& img) {
  std::vector<std::uint8_t> out(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const long long v = std::llround(img.pixels[i]);
    out[i] = static_cast<std::uint8_t>(std::clamp<long long>(v, 0, 255));
  }
  return out;
}

void write_pgm(const GrayImage& img, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write " + path.string());
  out << "P5\n" << img.width << " " << img.height << "\n255\n";
  const auto bytes = quantize_u8(img);
  out.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
  if (!out) throw IoError("write failed: " + path.string());
}

// ---------------------------------------------------------------------------
// Haralick
// ---------------------------------------------------------------------------

namespace {

double xlog2(double v) { return v > 0.0 ? std::log2(v) : 0.0; }

// Symmetric normalized co-occurrence matrix for one offset, or an empty
// vector when the offset produced no pairs.
std::vector<double> cooccurrence(const std::vector<int>& q, std::size_t h,
                                 std::size_t w, int levels, int dr, int dc) {
  std::vector<double> P(static_cast<std::size_t>(levels) * levels, 0.0);
  double total = 0.0;
  for (std::size_t r = 0; r < h; ++r) {
    for (std::size_t c = 0; c < w; ++c) {
      const long r2 = static_cast<long>(r) + dr;
      const long c2 = static_cast<long>(c) + dc;
      if (r2 < 0 || c2 < 0 || r2 >= static_cast<long>(h) ||
          c2 >= static_cast<long>(w)) {
        continue;
      }
      const int a = q[r * w + c];
      const int b = q[static_cast<std::size_t>(r2) * w +
                      static_cast<std::size_t>(c2)];
      P[static_cast<std::size_t>(a) * levels + b] += 1.0;
      P[static_cast<std::size_t>(b) * levels + a] += 1.0;  // symmetrize
      total += 2.0;
    }
  }
  if (total == 0.0) return {};
  for (double& p : P) p /= total;
  return P;
}

std::vector<double> haralick_one(const std::vector<double>& P, int levels) {
  const auto L = static_cast<std::size_t>(levels);
  std::vector<double> px(L, 0.0), py(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      px[i] += P[i * L + j];
      py[j] += P[i * L + j];
    }
  }
  double mux = 0.0, muy = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    mux += static_cast<double>(i) * px[i];
    muy += static_cast<double>(i) * py[i];
  }
  double vx = 0.0, vy = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    vx += (static_cast<double>(i) - mux) * (static_cast<double>(i) - mux) * px[i];
    vy += (static_cast<double>(i) - muy) * (static_cast<double>(i) - muy) * py[i];
  }
  const double sx = std::sqrt(vx), sy = std::sqrt(vy);

  double energy = 0.0, contrast = 0.0, idm = 0.0, entropy = 0.0;
  double cross = 0.0, variance = 0.0;
  std::vector<double> psum(2 * L - 1, 0.0), pdiff(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double p = P[i * L + j];
      const double di = static_cast<double>(i) - static_cast<double>(j);
      energy += p * p;
      contrast += di * di * p;
      idm += p / (1.0 + di * di);
      entropy -= p * xlog2(p);
      cross += static_cast<double>(i) * static_cast<double>(j) * p;
      variance += (static_cast<double>(i) - mux) *
                  (static_cast<double>(i) - mux) * p;
      psum[i + j] += p;
      pdiff[static_cast<std::size_t>(std::abs(static_cast<long>(i) -
                                              static_cast<long>(j)))] += p;
    }
  }
  const double correlation =
      (sx == 0.0 || sy == 0.0) ? 0.0 : (cross - mux * muy) / (sx * sy);

  double sum_avg = 0.0;
  for (std::size_t k = 0; k < psum.size(); ++k) {
    sum_avg += static_cast<double>(k) * psum[k];
  }
  double sum_var = 0.0, sum_ent = 0.0;
  for (std::size_t k = 0; k < psum.size(); ++k) {
    sum_var += (static_cast<double>(k) - sum_avg) *
               (static_cast<double>(k) - sum_avg) * psum[k];
    sum_ent -= psum[k] * xlog2(psum[k]);
  }
  double mud = 0.0;
  for (std::size_t k = 0; k < pdiff.size(); ++k) {
    mud += static_cast<double>(k) * pdiff[k];
  }
  double diff_var = 0.0, diff_ent = 0.0;
  for (std::size_t k = 0; k < pdiff.size(); ++k) {
    diff_var += (static_cast<double>(k) - mud) * (static_cast<double>(k) - mud) *
                pdiff[k];
    diff_ent -= pdiff[k] * xlog2(pdiff[k]);
  }

  double hx = 0.0, hy = 0.0, hxy1 = 0.0, hxy2 = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    hx -= px[i] * xlog2(px[i]);
    hy -= py[i] * xlog2(py[i]);
  }
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double q = px[i] * py[j];
      hxy1 -= P[i * L + j] * xlog2(q);
      hxy2 -= q * xlog2(q);
    }
  }
  const double denom = std::max(hx, hy);
  const double imc1 = denom == 0.0 ? 0.0 : (entropy - hxy1) / denom;
  const double imc2 =
      std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));

  return {energy,   contrast, correlation, variance, idm,
          sum_avg,  sum_var,  sum_ent,     entropy,  diff_var,
          diff_ent, imc1,     imc2};
}

}  // namespace

std::vector<double> haralick_features(const GrayImage& img,
                                      const HaralickParams& params) {
  if (params.levels < 2 || params.levels > 256) {
    throw ValidationError("haralick levels must be in [2, 256]");
  }
  if (params.offsets.empty()) {
    throw ValidationError("haralick needs at least one offset");
  }
  std::vector<int> q(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    const long long v =
        std::clamp<long long>(std::llround(img.pixels[i]), 0, 255);
    q[i] = static_cast<int>(v * params.levels / 256);
  }
  std::vector<double> acc(13, 0.0);
  for (const auto& [dr, dc] : params.offsets) {
    const auto P = cooccurrence(q, img.height, img.width, params.levels, dr, dc);
    if (P.empty()) continue;  // offset larger than the image: contributes zeros
    const auto f = haralick_one(P, params.levels);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
  }
  for (double& v : acc) v /= static_cast<double>(params.offsets.size());
  return acc;
}

std::vector<double> lbp_histogram(const GrayImage& img) {
  std::vector<double> hist(256, 0.0);
  if (img.height < 3 || img.width < 3) return hist;
  // Clockwise from the top-left neighbor.
  static constexpr int kDr[8] = {-1, -1, -1, 0, 1, 1, 1, 0};
  static constexpr int kDc[8] = {-1, 0, 1, 1, 1, 0, -1, -1};
  double count = 0.0;
  for (std::size_t r = 1; r + 1 < img.height; ++r) {
    for (std::size_t c = 1; c + 1 < img.width; ++c) {
      const double center = img.at(r, c);
      unsigned code = 0;
      for (int k = 0; k < 8; ++k) {
        const auto rr = static_cast<std::size_t>(static_cast<long>(r) + kDr[k]);
        const auto cc = static_cast<std::size_t>(static_cast<long>(c) + kDc[k]);
        code = (code << 1) | (img.at(rr, cc) >= center ? 1u : 0u);
      }
      hist[code] += 1.0;
      count += 1.0;
    }
  }
  for (double& h : hist) h /= count;
  return hist;
}

FeatureBlock byte_haralick(const HexDump& dump, const HaralickParams& params) {
  FeatureBlock block;
  block.category = "BYTE_HARALICK";
  block.names = {"har_energy",       "har_contrast",  "har_correlation",
                 "har_variance",     "har_homogeneity", "har_sum_average",
                 "har_sum_variance", "har_sum_entropy", "har_entropy",
                 "har_diff_variance", "har_diff_entropy", "har_imc1",
                 "har_imc2"};
  block.values = haralick_features(bytes_to_image(dump), params);
  return block;
}

FeatureBlock byte_lbp(const HexDump& dump) {
  FeatureBlock block;
  block.category = "BYTE_LBP";
  block.names.reserve(256);
  for (int v = 0; v < 256; ++v) {
    char name[8];
    std::snprintf(name, sizeof(name), "lbp_%02x", v);
    block.names.emplace_back(name);
  }
  block.values = lbp_histogram(bytes_to_image(dump));
  return block;
}

FeatureBlock asm_pixels(const std::filesystem::path& asm_path,
                        std::size_t count) {
  if (count == 0) throw ValidationError("asm_pixels count must be positive");
  std::ifstream in(asm_path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + asm_path.string());
  std::vector<char> buf(count, 0);
  in.read(buf.data(), static_cast<std::streamsize>(count));

  FeatureBlock block;
  block.category = "ASM_PIXEL";
  block.names.reserve(count);
  block.values.reserve(count);
  const auto got = static_cast<std::size_t>(in.gcount());
  for (std::size_t i = 0; i < count; ++i) {
    char name[16];
    std::snprintf(name, sizeof(name), "pix_%03zu", i);
    block.names.emplace_back(name);
    block.values.push_back(
        i < got ? static_cast<double>(static_cast<unsigned char>(buf[i])) : 0.0);
  }
  return block;
}

}  // namespace malfuse
