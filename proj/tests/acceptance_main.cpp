// Acceptance checks: ten end-to-end properties of the toolkit, each printed
// as one "C<n> <label>: PASS|FAIL|SKIPPED (<detail>) [<t> s]" line.  The
// process exits nonzero when any check fails.
//
// C1 compares the numeric kernels against brute-force reimplementations
// written from the textbook formulas (below, namespace `oracle`), on random
// fixtures.  The remaining checks assert bounds, gradients, learnability,
// training invariants, layout contracts, cross-validation hygiene, selection
// optimality, bitwise determinism and (when the real dataset is mounted) a
// headline cross-validation score.  All tolerances are pinned here.

#include <unistd.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "malfuse/asmfeat.hpp"
#include "malfuse/corpus.hpp"
#include "malfuse/deepfeat.hpp"
#include "malfuse/eval.hpp"
#include "malfuse/featsel.hpp"
#include "malfuse/fusion.hpp"
#include "malfuse/gbt.hpp"
#include "malfuse/hexfeat.hpp"
#include "malfuse/imaging.hpp"
#include "malfuse/nn.hpp"
#include "malfuse/pipeline.hpp"
#include "malfuse/synth.hpp"
#include "malfuse/vocab.hpp"

#include "grad_check.hpp"
#include "temp_dir.hpp"

namespace {

namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

// Pinned tolerances.
constexpr double kOracleTol = 1e-9;   // entropy, LBP, Haralick, chi2, ANOVA F
constexpr double kTightTol = 1e-12;   // logloss, mutual information
constexpr double kGradTol = 1e-4;     // max relative error at h = 1e-4
constexpr double kGradStep = 1e-4;
constexpr double kEtaZeroTol = 1e-9;  // eta = 0 logloss vs ln 3
constexpr double kMinCnnTestAcc = 0.95;
constexpr double kMinDatasetCvAcc = 0.98;
constexpr double kMaxOracleSecs = 60.0;
constexpr double kMaxGradSecs = 120.0;
constexpr double kMaxDeterminismSecs = 600.0;

// ---------------------------------------------------------------------------
// Check framework
// ---------------------------------------------------------------------------

struct Failure : std::runtime_error {
  explicit Failure(const std::string& what) : std::runtime_error(what) {}
};
struct Skipped : std::runtime_error {
  explicit Skipped(const std::string& why) : std::runtime_error(why) {}
};

void expect(bool ok, const std::string& what) {
  if (!ok) throw Failure(what);
}

std::string num(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.3g", v);
  return buf;
}

int run_check(const char* id, const char* label,
              const std::function<std::string()>& body) {
  const auto t0 = Clock::now();
  std::string status;
  std::string detail;
  int failed = 0;
  try {
    detail = body();
    status = "PASS";
  } catch (const Skipped& s) {
    status = "SKIPPED";
    detail = s.what();
  } catch (const std::exception& e) {
    status = "FAIL";
    detail = e.what();
    failed = 1;
  }
  const double secs =
      std::chrono::duration<double>(Clock::now() - t0).count();
  std::printf("%s %s: %s", id, label, status.c_str());
  if (!detail.empty()) std::printf(" (%s)", detail.c_str());
  std::printf(" [%.1f s]\n", secs);
  std::fflush(stdout);
  return failed;
}

double urand(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * malfuse::nn::uniform01(rng);
}

std::size_t pick(std::mt19937_64& rng, std::size_t lo, std::size_t hi) {
  return lo + static_cast<std::size_t>(rng() % (hi - lo + 1));
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  expect(static_cast<bool>(in), "cannot read " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

// ---------------------------------------------------------------------------
// Brute-force oracles (C1).  Reimplemented from the definitions, organized
// differently from the library (nested containers, count maps, base-e logs
// rescaled to bits) so a shared bug would have to be coded twice.
// ---------------------------------------------------------------------------

namespace oracle {

double log2_of(double v) { return std::log(v) / std::log(2.0); }

double entropy_bits(const std::vector<std::uint8_t>& chunk) {
  if (chunk.empty()) return 0.0;
  std::map<int, long> counts;
  for (std::uint8_t b : chunk) ++counts[b];
  double h = 0.0;
  for (const auto& [value, count] : counts) {
    (void)value;
    const double p =
        static_cast<double>(count) / static_cast<double>(chunk.size());
    h -= p * log2_of(p);
  }
  return h;
}

std::vector<double> lbp(const malfuse::GrayImage& img) {
  std::vector<double> hist(256, 0.0);
  if (img.height < 3 || img.width < 3) return hist;
  long interior = 0;
  for (std::size_t r = 1; r + 1 < img.height; ++r) {
    for (std::size_t c = 1; c + 1 < img.width; ++c) {
      // Clockwise ring starting at the top-left neighbor; the first
      // comparison lands in the most significant bit.
      const double ring[8] = {img.at(r - 1, c - 1), img.at(r - 1, c),
                              img.at(r - 1, c + 1), img.at(r, c + 1),
                              img.at(r + 1, c + 1), img.at(r + 1, c),
                              img.at(r + 1, c - 1), img.at(r, c - 1)};
      int code = 0;
      for (int k = 0; k < 8; ++k) {
        if (ring[k] >= img.at(r, c)) code += 1 << (7 - k);
      }
      hist[static_cast<std::size_t>(code)] += 1.0;
      ++interior;
    }
  }
  for (double& v : hist) v /= static_cast<double>(interior);
  return hist;
}

// The 13 co-occurrence statistics for one normalized symmetric GLCM.
std::vector<double> haralick_stats(const std::vector<std::vector<double>>& P) {
  const std::size_t L = P.size();
  const auto lg = [](double v) { return v > 0.0 ? log2_of(v) : 0.0; };

  std::vector<double> px(L, 0.0), py(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      px[i] += P[i][j];
      py[j] += P[i][j];
    }
  }
  double mu_x = 0.0, mu_y = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    mu_x += static_cast<double>(i) * px[i];
    mu_y += static_cast<double>(i) * py[i];
  }
  double var_x = 0.0, var_y = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    const double di = static_cast<double>(i);
    var_x += (di - mu_x) * (di - mu_x) * px[i];
    var_y += (di - mu_y) * (di - mu_y) * py[i];
  }

  double energy = 0.0, contrast = 0.0, homogeneity = 0.0, entropy = 0.0;
  double cross = 0.0;
  std::vector<double> p_sum(2 * L - 1, 0.0), p_diff(L, 0.0);
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double p = P[i][j];
      const double d = static_cast<double>(i) - static_cast<double>(j);
      energy += p * p;
      contrast += d * d * p;
      homogeneity += p / (1.0 + d * d);
      entropy -= p * lg(p);
      cross += static_cast<double>(i) * static_cast<double>(j) * p;
      p_sum[i + j] += p;
      p_diff[static_cast<std::size_t>(d < 0 ? -d : d)] += p;
    }
  }
  const double sd_x = std::sqrt(var_x), sd_y = std::sqrt(var_y);
  const double correlation =
      (sd_x == 0.0 || sd_y == 0.0) ? 0.0 : (cross - mu_x * mu_y) / (sd_x * sd_y);
  double variance = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    variance += (static_cast<double>(i) - mu_x) *
                (static_cast<double>(i) - mu_x) * px[i];
  }

  double sum_avg = 0.0;
  for (std::size_t k = 0; k < p_sum.size(); ++k) {
    sum_avg += static_cast<double>(k) * p_sum[k];
  }
  double sum_var = 0.0, sum_ent = 0.0;
  for (std::size_t k = 0; k < p_sum.size(); ++k) {
    sum_var += (static_cast<double>(k) - sum_avg) *
               (static_cast<double>(k) - sum_avg) * p_sum[k];
    sum_ent -= p_sum[k] * lg(p_sum[k]);
  }
  double mu_d = 0.0;
  for (std::size_t k = 0; k < p_diff.size(); ++k) {
    mu_d += static_cast<double>(k) * p_diff[k];
  }
  double diff_var = 0.0, diff_ent = 0.0;
  for (std::size_t k = 0; k < p_diff.size(); ++k) {
    diff_var += (static_cast<double>(k) - mu_d) * (static_cast<double>(k) - mu_d) *
                p_diff[k];
    diff_ent -= p_diff[k] * lg(p_diff[k]);
  }

  double hx = 0.0, hy = 0.0, hxy1 = 0.0, hxy2 = 0.0;
  for (std::size_t i = 0; i < L; ++i) {
    hx -= px[i] * lg(px[i]);
    hy -= py[i] * lg(py[i]);
  }
  for (std::size_t i = 0; i < L; ++i) {
    for (std::size_t j = 0; j < L; ++j) {
      const double q = px[i] * py[j];
      hxy1 -= P[i][j] * lg(q);
      hxy2 -= q * lg(q);
    }
  }
  const double denom = std::max(hx, hy);
  const double imc1 = denom == 0.0 ? 0.0 : (entropy - hxy1) / denom;
  const double imc2 =
      std::sqrt(std::max(0.0, 1.0 - std::exp(-2.0 * (hxy2 - entropy))));

  return {energy,   contrast, correlation, variance, homogeneity,
          sum_avg,  sum_var,  sum_ent,     entropy,  diff_var,
          diff_ent, imc1,     imc2};
}

std::vector<double> haralick(const malfuse::GrayImage& img, int levels,
                             const std::vector<std::pair<int, int>>& offsets) {
  std::vector<int> q(img.pixels.size());
  for (std::size_t i = 0; i < img.pixels.size(); ++i) {
    long long v = std::llround(img.pixels[i]);
    if (v < 0) v = 0;
    if (v > 255) v = 255;
    q[i] = static_cast<int>(v * levels / 256);
  }
  std::vector<double> acc(13, 0.0);
  for (const auto& [dr, dc] : offsets) {
    std::vector<std::vector<double>> P(
        static_cast<std::size_t>(levels),
        std::vector<double>(static_cast<std::size_t>(levels), 0.0));
    double pairs = 0.0;
    for (long r = 0; r < static_cast<long>(img.height); ++r) {
      for (long c = 0; c < static_cast<long>(img.width); ++c) {
        const long r2 = r + dr, c2 = c + dc;
        if (r2 < 0 || c2 < 0 || r2 >= static_cast<long>(img.height) ||
            c2 >= static_cast<long>(img.width)) {
          continue;
        }
        const int a = q[static_cast<std::size_t>(r) * img.width +
                        static_cast<std::size_t>(c)];
        const int b = q[static_cast<std::size_t>(r2) * img.width +
                        static_cast<std::size_t>(c2)];
        P[static_cast<std::size_t>(a)][static_cast<std::size_t>(b)] += 1.0;
        P[static_cast<std::size_t>(b)][static_cast<std::size_t>(a)] += 1.0;
        pairs += 2.0;
      }
    }
    if (pairs == 0.0) continue;  // offset larger than the image
    for (auto& row : P) {
      for (double& p : row) p /= pairs;
    }
    const std::vector<double> f = haralick_stats(P);
    for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += f[i];
  }
  for (double& v : acc) v /= static_cast<double>(offsets.size());
  return acc;
}

double chi2(const std::vector<double>& x, const std::vector<int>& y,
            int classes) {
  const std::size_t n = x.size();
  const double lowest = *std::min_element(x.begin(), x.end());
  const double shift = lowest < 0.0 ? -lowest : 0.0;
  std::vector<double> observed(static_cast<std::size_t>(classes), 0.0);
  std::vector<long> members(static_cast<std::size_t>(classes), 0);
  for (std::size_t i = 0; i < n; ++i) {
    observed[static_cast<std::size_t>(y[i])] += x[i] + shift;
    ++members[static_cast<std::size_t>(y[i])];
  }
  double total = 0.0;
  for (double o : observed) total += o;
  if (total <= 0.0) return 0.0;
  double stat = 0.0;
  for (int c = 0; c < classes; ++c) {
    const double expected = total *
                            static_cast<double>(members[
                                static_cast<std::size_t>(c)]) /
                            static_cast<double>(n);
    if (expected <= 0.0) continue;
    const double d = observed[static_cast<std::size_t>(c)] - expected;
    stat += d * d / expected;
  }
  return stat;
}

double anova_f(const std::vector<double>& x, const std::vector<int>& y,
               int classes) {
  const std::size_t n = x.size();
  std::vector<double> sum(static_cast<std::size_t>(classes), 0.0);
  std::vector<long> count(static_cast<std::size_t>(classes), 0);
  double grand = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sum[static_cast<std::size_t>(y[i])] += x[i];
    ++count[static_cast<std::size_t>(y[i])];
    grand += x[i];
  }
  grand /= static_cast<double>(n);
  int groups = 0;
  double ssb = 0.0;
  for (int c = 0; c < classes; ++c) {
    const auto uc = static_cast<std::size_t>(c);
    if (count[uc] == 0) continue;
    ++groups;
    const double mean = sum[uc] / static_cast<double>(count[uc]);
    ssb += static_cast<double>(count[uc]) * (mean - grand) * (mean - grand);
  }
  double ssw = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const auto uc = static_cast<std::size_t>(y[i]);
    const double mean = sum[uc] / static_cast<double>(count[uc]);
    ssw += (x[i] - mean) * (x[i] - mean);
  }
  if (groups < 2 || n <= static_cast<std::size_t>(groups)) return 0.0;
  if (ssw == 0.0) return ssb == 0.0 ? 0.0 : malfuse::kInfiniteSeparationF;
  return (ssb / static_cast<double>(groups - 1)) /
         (ssw / static_cast<double>(n - static_cast<std::size_t>(groups)));
}

double mutual_info(const std::vector<double>& x, const std::vector<int>& y,
                   int classes, int bins) {
  const std::size_t n = x.size();
  const double lo = *std::min_element(x.begin(), x.end());
  const double hi = *std::max_element(x.begin(), x.end());
  if (!(hi > lo)) return 0.0;
  // The bin of a value is part of the scoring contract, so the assignment
  // expression is shared; the information sum below is not.
  std::map<std::pair<int, int>, long> joint;
  std::map<int, long> per_bin;
  std::map<int, long> per_class;
  for (std::size_t i = 0; i < n; ++i) {
    int b = static_cast<int>((x[i] - lo) / (hi - lo) *
                             static_cast<double>(bins));
    b = std::min(b, bins - 1);
    ++joint[{b, y[i]}];
    ++per_bin[b];
    ++per_class[y[i]];
  }
  (void)classes;
  double mi = 0.0;
  for (const auto& [key, count] : joint) {
    const double pxy = static_cast<double>(count) / static_cast<double>(n);
    const double px =
        static_cast<double>(per_bin[key.first]) / static_cast<double>(n);
    const double py =
        static_cast<double>(per_class[key.second]) / static_cast<double>(n);
    mi += pxy * std::log(pxy / (px * py));
  }
  return std::max(mi, 0.0);
}

double logloss(const std::vector<int>& truth,
               const std::vector<std::vector<double>>& probs) {
  long double total = 0.0L;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    double p = probs[i][static_cast<std::size_t>(truth[i])];
    if (p < 1e-15) p = 1e-15;
    if (p > 1.0 - 1e-15) p = 1.0 - 1e-15;
    total += -std::log(p);
  }
  return static_cast<double>(total / static_cast<long double>(truth.size()));
}

}  // namespace oracle

// Random labeled matrix for the univariate scorers: one category, `cols`
// columns of assorted shapes (signed, non-negative, constant, perfectly
// separating, discrete, all-zero).  Returns the raw columns for the oracle.
malfuse::FeatureMatrix score_fixture(std::mt19937_64& rng, std::size_t rows,
                                     int classes, std::size_t cols,
                                     std::vector<std::vector<double>>* raw,
                                     std::vector<int>* labels_out) {
  std::vector<int> labels(rows);
  for (std::size_t i = 0; i < rows; ++i) {
    labels[i] = static_cast<int>(i % static_cast<std::size_t>(classes));
  }
  raw->assign(cols, std::vector<double>(rows, 0.0));
  for (std::size_t c = 0; c < cols; ++c) {
    const std::size_t style = rng() % 6;
    const double constant = static_cast<double>(rng() % 6);
    for (std::size_t r = 0; r < rows; ++r) {
      double v = 0.0;
      switch (style) {
        case 0: v = urand(rng, -1.0, 2.0); break;
        case 1: v = urand(rng, 0.0, 3.0); break;
        case 2: v = constant; break;
        case 3: v = static_cast<double>(labels[r]); break;
        case 4: v = 0.5 * static_cast<double>(rng() % 3); break;
        default: v = 0.0; break;
      }
      (*raw)[c][r] = v;
    }
  }
  malfuse::FeatureRegistry reg;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) names.push_back("c" + std::to_string(c));
  reg.add("BYTE_1G", names);
  std::vector<std::string> ids;
  for (std::size_t r = 0; r < rows; ++r) ids.push_back("r" + std::to_string(r));
  malfuse::FeatureMatrix m(std::move(reg), std::move(ids), labels);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) m.set(r, c, (*raw)[c][r]);
  }
  *labels_out = labels;
  return m;
}

malfuse::GrayImage random_image(std::mt19937_64& rng, std::size_t h,
                                std::size_t w, double lo, double hi) {
  malfuse::GrayImage img;
  img.height = h;
  img.width = w;
  img.pixels.resize(h * w);
  for (double& p : img.pixels) p = urand(rng, lo, hi);
  return img;
}

// ---------------------------------------------------------------------------
// C1: oracle equivalence
// ---------------------------------------------------------------------------

std::string check_oracle_equivalence() {
  const auto t0 = Clock::now();
  std::mt19937_64 rng(20240901);

  // Entropy: 120 random chunks of varying length and alphabet.
  double entropy_err = 0.0;
  for (int t = 0; t < 120; ++t) {
    const std::size_t len = pick(rng, 1, 4096);
    const std::size_t alphabet = pick(rng, 1, 256);
    const std::size_t base = rng() % (257 - alphabet);
    std::vector<std::uint8_t> chunk(len);
    for (auto& b : chunk) {
      b = static_cast<std::uint8_t>(base + rng() % alphabet);
    }
    const double got = malfuse::shannon_entropy(chunk.data(), chunk.size());
    entropy_err = std::max(entropy_err,
                           std::abs(got - oracle::entropy_bits(chunk)));
  }
  expect(entropy_err < kOracleTol, "entropy deviates from the oracle by " +
                                       num(entropy_err));

  // LBP: 100 images, including degenerate sizes and integer-valued ties.
  double lbp_err = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t h = pick(rng, 1, 16);
    const std::size_t w = pick(rng, 1, 16);
    malfuse::GrayImage img = random_image(rng, h, w, 0.0, 256.0);
    if (t % 3 == 0) {
      for (double& p : img.pixels) p = std::floor(p / 32.0) * 32.0;
    }
    const std::vector<double> got = malfuse::lbp_histogram(img);
    const std::vector<double> want = oracle::lbp(img);
    for (std::size_t i = 0; i < 256; ++i) {
      lbp_err = std::max(lbp_err, std::abs(got[i] - want[i]));
    }
  }
  expect(lbp_err < kOracleTol,
         "LBP histogram deviates from the oracle by " + num(lbp_err));

  // Haralick: 100 fixtures over sizes, level counts, clamped pixel ranges
  // and offset sets (including offsets larger than the image).
  double haralick_err = 0.0;
  const int level_choices[5] = {2, 4, 8, 16, 32};
  for (int t = 0; t < 100; ++t) {
    const std::size_t h = pick(rng, 1, 24);
    const std::size_t w = pick(rng, 1, 24);
    const double lo = t % 4 == 0 ? -40.0 : 0.0;
    const double hi = t % 4 == 0 ? 296.0 : 256.0;
    const malfuse::GrayImage img = random_image(rng, h, w, lo, hi);
    malfuse::HaralickParams params;
    params.levels = level_choices[rng() % 5];
    if (t % 5 == 0) {
      params.offsets = {{0, 1},
                        {static_cast<int>(pick(rng, 1, 40)), 0},
                        {-1, 1}};
    }
    const std::vector<double> got = malfuse::haralick_features(img, params);
    const std::vector<double> want =
        oracle::haralick(img, params.levels, params.offsets);
    for (std::size_t i = 0; i < 13; ++i) {
      haralick_err = std::max(haralick_err, std::abs(got[i] - want[i]));
    }
  }
  expect(haralick_err < kOracleTol,
         "Haralick features deviate from the oracle by " + num(haralick_err));

  // Univariate scorers: 13 random matrices x 8 columns each (104 columns per
  // scorer) plus one tiny matrix exercising the degenerate ANOVA branch.
  double chi2_err = 0.0, anova_err = 0.0, mi_err = 0.0;
  for (int t = 0; t < 14; ++t) {
    const std::size_t rows = t == 13 ? 3 : pick(rng, 12, 60);
    const int classes = t == 13 ? 3 : static_cast<int>(pick(rng, 2, 5));
    const int bins = static_cast<int>(pick(rng, 2, 32));
    std::vector<std::vector<double>> raw;
    std::vector<int> labels;
    const malfuse::FeatureMatrix m =
        score_fixture(rng, rows, classes, 8, &raw, &labels);
    const malfuse::ScoreReport chi = malfuse::chi2_scores(m);
    const malfuse::ScoreReport ano = malfuse::anova_f_scores(m);
    const malfuse::ScoreReport mi = malfuse::mutual_info_scores(m, bins);
    for (std::size_t c = 0; c < raw.size(); ++c) {
      chi2_err = std::max(
          chi2_err, std::abs(chi.scores[c] - oracle::chi2(raw[c], labels,
                                                          classes)));
      anova_err = std::max(
          anova_err, std::abs(ano.scores[c] - oracle::anova_f(raw[c], labels,
                                                              classes)));
      mi_err = std::max(
          mi_err, std::abs(mi.scores[c] - oracle::mutual_info(raw[c], labels,
                                                              classes, bins)));
    }
  }
  expect(chi2_err < kOracleTol,
         "chi-square deviates from the oracle by " + num(chi2_err));
  expect(anova_err < kOracleTol,
         "ANOVA F deviates from the oracle by " + num(anova_err));
  expect(mi_err < kTightTol,
         "mutual information deviates from the oracle by " + num(mi_err));

  // Logloss: 110 fixtures with random class counts, a few hard 0/1
  // probabilities (clamped on both sides) and one exactly-uniform table.
  double logloss_err = 0.0;
  for (int t = 0; t < 110; ++t) {
    const std::size_t n = pick(rng, 3, 32);
    const int classes = static_cast<int>(pick(rng, 2, 9));
    std::vector<int> truth(n);
    std::vector<std::vector<double>> probs(
        n, std::vector<double>(static_cast<std::size_t>(classes), 0.0));
    for (std::size_t i = 0; i < n; ++i) {
      truth[i] = static_cast<int>(rng() % static_cast<std::size_t>(classes));
      if (t == 0) {
        for (double& p : probs[i]) p = 1.0 / static_cast<double>(classes);
        continue;
      }
      if (i < 2 && t % 3 == 0) {
        probs[i][static_cast<std::size_t>(rng() %
                                          static_cast<std::size_t>(classes))] =
            1.0;  // one-hot: the true class holds either 0 or 1
        continue;
      }
      double total = 0.0;
      for (double& p : probs[i]) {
        p = 0.05 + malfuse::nn::uniform01(rng);
        total += p;
      }
      for (double& p : probs[i]) p /= total;
    }
    const double got = malfuse::multiclass_logloss(truth, probs, classes);
    logloss_err =
        std::max(logloss_err, std::abs(got - oracle::logloss(truth, probs)));
  }
  expect(logloss_err < kTightTol,
         "logloss deviates from the oracle by " + num(logloss_err));

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  expect(secs < kMaxOracleSecs,
         "oracle comparison took " + num(secs) + " s (budget 60 s)");

  return "max |delta|: entropy " + num(entropy_err) + ", lbp " + num(lbp_err) +
         ", haralick " + num(haralick_err) + ", chi2 " + num(chi2_err) +
         ", anova-f " + num(anova_err) + ", mutual-info " + num(mi_err) +
         ", logloss " + num(logloss_err) + "; 748 fixtures";
}

// ---------------------------------------------------------------------------
// C2: entropy bounds
// ---------------------------------------------------------------------------

std::string check_entropy_bounds() {
  std::mt19937_64 rng(404);
  for (int t = 0; t < 10000; ++t) {
    const std::size_t len = pick(rng, 1, 2048);
    const std::size_t alphabet = pick(rng, 1, 256);
    std::vector<std::uint8_t> chunk(len);
    for (auto& b : chunk) b = static_cast<std::uint8_t>(rng() % alphabet);
    const double h = malfuse::shannon_entropy(chunk.data(), chunk.size());
    expect(h >= 0.0 && h <= 8.0,
           "entropy " + num(h) + " outside [0, 8] at trial " +
               std::to_string(t));
  }

  const std::vector<std::uint8_t> constant(1000, 0x41);
  const double h0 = malfuse::shannon_entropy(constant.data(), constant.size());
  expect(h0 == 0.0, "constant chunk entropy is " + num(h0) + ", want 0");

  std::vector<std::uint8_t> permutation(256);
  for (std::size_t i = 0; i < 256; ++i) {
    permutation[i] = static_cast<std::uint8_t>(i);
  }
  for (std::size_t i = 255; i > 0; --i) {
    std::swap(permutation[i], permutation[rng() % (i + 1)]);
  }
  const double h8 =
      malfuse::shannon_entropy(permutation.data(), permutation.size());
  expect(h8 == 8.0,
         "full-range permutation entropy is " + num(h8) + ", want exactly 8");

  return "10000 random chunks in [0, 8]; constant = 0; permutation = 8";
}

// ---------------------------------------------------------------------------
// C3: gradient checks
// ---------------------------------------------------------------------------

std::string check_gradients() {
  const auto t0 = Clock::now();
  namespace nn = malfuse::nn;
  using malfuse::test::check_layer_gradients;
  using malfuse::test::fd_grad;
  using malfuse::test::random_input;
  using malfuse::test::rel_err;

  std::vector<std::pair<std::string, double>> worst;
  const auto record = [&](const std::string& name, double err) {
    worst.emplace_back(name, err);
    expect(err < kGradTol,
           name + " max relative gradient error " + num(err) + " >= 1e-4");
  };

  {  // Conv2d
    std::mt19937_64 srng(101);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t in = pick(srng, 1, 3), out = pick(srng, 1, 4);
      const std::size_t kh = pick(srng, 1, 3), kw = pick(srng, 1, 3);
      const std::size_t h = kh + srng() % 5, w = kw + srng() % 5;
      std::mt19937_64 wrng(1000 + t);
      nn::Conv2d layer(in, out, kh, kw, wrng);
      err = std::max(err, check_layer_gradients(
                              layer, random_input({in, h, w}, 2000 + t),
                              3000 + t, kGradStep)
                              .max_rel_err);
    }
    record("conv2d", err);
  }
  {  // Conv1d
    std::mt19937_64 srng(102);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t in = pick(srng, 1, 3), out = pick(srng, 1, 4);
      const std::size_t k = pick(srng, 1, 5);
      const std::size_t len = k + srng() % 8;
      std::mt19937_64 wrng(1100 + t);
      nn::Conv1d layer(in, out, k, wrng);
      err = std::max(err, check_layer_gradients(
                              layer, random_input({in, len}, 2100 + t),
                              3100 + t, kGradStep)
                              .max_rel_err);
    }
    record("conv1d", err);
  }
  {  // Dense
    std::mt19937_64 srng(103);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t in = pick(srng, 1, 20), out = pick(srng, 1, 8);
      std::mt19937_64 wrng(1200 + t);
      nn::Dense layer(in, out, wrng);
      err = std::max(err,
                     check_layer_gradients(layer, random_input({in}, 2200 + t),
                                           3200 + t, kGradStep)
                         .max_rel_err);
    }
    record("dense", err);
  }
  {  // Relu
    std::mt19937_64 srng(104);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      std::vector<std::size_t> shape;
      const std::size_t rank = pick(srng, 1, 3);
      for (std::size_t d = 0; d < rank; ++d) shape.push_back(pick(srng, 1, 6));
      nn::Relu layer;
      err = std::max(err,
                     check_layer_gradients(layer, random_input(shape, 2300 + t),
                                           3300 + t, kGradStep)
                         .max_rel_err);
    }
    record("relu", err);
  }
  {  // MaxPool2d
    std::mt19937_64 srng(105);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t c = pick(srng, 1, 3);
      const std::size_t h = pick(srng, 2, 7), w = pick(srng, 2, 7);
      nn::MaxPool2d layer;
      err = std::max(err, check_layer_gradients(
                              layer, random_input({c, h, w}, 2400 + t),
                              3400 + t, kGradStep)
                              .max_rel_err);
    }
    record("maxpool2d", err);
  }
  {  // MaxPool1d
    std::mt19937_64 srng(106);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t c = pick(srng, 1, 4);
      const std::size_t len = pick(srng, 2, 10);
      nn::MaxPool1d layer;
      err = std::max(err, check_layer_gradients(
                              layer, random_input({c, len}, 2500 + t),
                              3500 + t, kGradStep)
                              .max_rel_err);
    }
    record("maxpool1d", err);
  }
  {  // LayerNorm over [C], [C,L] and [C,H,W]
    std::mt19937_64 srng(107);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t c = pick(srng, 2, 8);
      std::vector<std::size_t> shape = {c};
      if (t % 3 == 1) shape = {c, pick(srng, 1, 6)};
      if (t % 3 == 2) shape = {c, pick(srng, 1, 4), pick(srng, 1, 4)};
      nn::LayerNorm layer(c);
      err = std::max(err,
                     check_layer_gradients(layer, random_input(shape, 2600 + t),
                                           3600 + t, kGradStep)
                         .max_rel_err);
    }
    record("layernorm", err);
  }
  {  // Embedding: finite differences on the table, analytic via backward.
    std::mt19937_64 srng(108);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t rows = pick(srng, 3, 10), dim = pick(srng, 1, 4);
      const std::size_t len = pick(srng, 1, 6);
      std::mt19937_64 wrng(1700 + t);
      nn::Embedding emb(rows, dim, wrng);
      std::vector<int> ids(len);
      for (int& id : ids) id = static_cast<int>(srng() % rows);
      nn::Tensor out = emb.forward(ids);
      nn::Tensor proj(out.shape);
      std::mt19937_64 prng(2700 + t);
      for (double& v : proj.data) v = 2.0 * nn::uniform01(prng) - 1.0;
      const auto loss = [&]() {
        const nn::Tensor y = emb.forward(ids);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          acc += y.data[i] * proj.data[i];
        }
        return acc;
      };
      emb.grad_weight.fill(0.0);
      emb.forward(ids);
      emb.backward(proj);
      for (std::size_t i = 0; i < emb.weight.size(); ++i) {
        const double fd = fd_grad(loss, &emb.weight.data[i], kGradStep);
        err = std::max(err, rel_err(emb.grad_weight.data[i], fd));
      }
    }
    record("embedding", err);
  }
  {  // GlobalMaxPool1d: masked input gradient, values spaced clear of ties.
    std::mt19937_64 srng(109);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t c = pick(srng, 1, 3), len = pick(srng, 2, 8);
      nn::Tensor x({c, len});
      std::vector<std::size_t> order(c * len);
      for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
      for (std::size_t i = order.size() - 1; i > 0; --i) {
        std::swap(order[i], order[srng() % (i + 1)]);
      }
      for (std::size_t i = 0; i < x.size(); ++i) {
        x.data[i] = 0.25 * static_cast<double>(order[i] + 1);
      }
      std::vector<char> valid(len);
      for (auto& v : valid) v = srng() % 4 != 0 ? 1 : 0;
      if (t == 0) std::fill(valid.begin(), valid.end(), 0);  // empty mask
      if (t == 1) std::fill(valid.begin(), valid.end(), 1);
      nn::GlobalMaxPool1d pool;
      nn::Tensor out = pool.forward(x, valid);
      nn::Tensor proj(out.shape);
      std::mt19937_64 prng(2800 + t);
      for (double& v : proj.data) v = 2.0 * nn::uniform01(prng) - 1.0;
      const auto loss = [&]() {
        const nn::Tensor y = pool.forward(x, valid);
        double acc = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) {
          acc += y.data[i] * proj.data[i];
        }
        return acc;
      };
      pool.forward(x, valid);
      const nn::Tensor grad_in = pool.backward(proj);
      for (std::size_t i = 0; i < x.size(); ++i) {
        const double fd = fd_grad(loss, &x.data[i], kGradStep);
        err = std::max(err, rel_err(grad_in.data[i], fd));
      }
    }
    record("globalmaxpool1d", err);
  }
  {  // Softmax cross-entropy: loss gradient w.r.t. the logits.
    std::mt19937_64 srng(110);
    double err = 0.0;
    for (int t = 0; t < 20; ++t) {
      const std::size_t classes = pick(srng, 2, 10);
      nn::Tensor logits({classes});
      std::mt19937_64 vrng(2900 + t);
      for (double& v : logits.data) v = urand(vrng, -3.0, 3.0);
      const int target = static_cast<int>(srng() % classes);
      const auto loss = [&]() {
        return nn::softmax_cross_entropy(logits, target).loss;
      };
      const nn::SoftmaxLoss sl = nn::softmax_cross_entropy(logits, target);
      for (std::size_t i = 0; i < logits.size(); ++i) {
        const double fd = fd_grad(loss, &logits.data[i], kGradStep);
        err = std::max(err, rel_err(sl.grad.data[i], fd));
      }
    }
    record("softmax-xent", err);
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  expect(secs < kMaxGradSecs,
         "gradient checks took " + num(secs) + " s (budget 120 s)");

  double overall = 0.0;
  for (const auto& [name, err] : worst) overall = std::max(overall, err);
  return "10 ops x 20 shapes, worst relative error " + num(overall);
}

// ---------------------------------------------------------------------------
// C4: CNN learnability and deep feature widths
// ---------------------------------------------------------------------------

std::string check_cnn_learnability() {
  // Three classes, each marked by a unique planted trigram over a 22-token
  // vocabulary (fillers 0..12, class triples 13..21, pad id 22).
  const int triples[3][3] = {{13, 14, 15}, {16, 17, 18}, {19, 20, 21}};
  std::mt19937_64 rng(515);
  const auto make_seq = [&](int cls) {
    std::vector<int> seq(40);
    for (int& v : seq) v = static_cast<int>(rng() % 13);
    for (int rep = 0; rep < 2; ++rep) {
      const std::size_t pos = rng() % (seq.size() - 2);
      seq[pos] = triples[cls][0];
      seq[pos + 1] = triples[cls][1];
      seq[pos + 2] = triples[cls][2];
    }
    return seq;
  };

  std::vector<std::vector<int>> train_seqs, test_seqs;
  std::vector<int> train_labels, test_labels;
  for (int cls = 0; cls < 3; ++cls) {
    for (int i = 0; i < 20; ++i) {
      train_seqs.push_back(make_seq(cls));
      train_labels.push_back(cls);
    }
    for (int i = 0; i < 10; ++i) {
      test_seqs.push_back(make_seq(cls));
      test_labels.push_back(cls);
    }
  }
  std::vector<const std::vector<int>*> train_ptrs;
  for (const auto& s : train_seqs) train_ptrs.push_back(&s);

  malfuse::NgramCnn model(23, 3, 9);
  malfuse::CnnTrainConfig tc;
  tc.epochs = 30;
  tc.batch_size = 8;
  tc.lr = 1e-3;
  tc.patience = 0;  // no validation carve-out: train on all 60
  tc.seed = 9;
  const malfuse::TrainLog log =
      malfuse::train_cnn(model, train_ptrs, train_labels, tc);
  expect(log.train_samples == 60,
         "expected 60 training samples, got " +
             std::to_string(log.train_samples));

  int correct = 0;
  for (std::size_t i = 0; i < test_seqs.size(); ++i) {
    const malfuse::nn::Tensor logits = model.forward(test_seqs[i]);
    if (malfuse::argmax_class(logits.data) == test_labels[i]) ++correct;
  }
  const double acc =
      static_cast<double>(correct) / static_cast<double>(test_seqs.size());
  expect(acc >= kMinCnnTestAcc, "held-out accuracy " + num(acc) +
                                    " after 30 epochs, want >= 0.95");
  expect(malfuse::NgramCnn::kFeatureDim == 300 &&
             model.features().size() == 300,
         "token-sequence feature block is " +
             std::to_string(model.features().size()) + "-wide, want 300");

  std::mt19937_64 img_rng(77);
  malfuse::GrayscaleCnn gray(3, 11);
  malfuse::nn::Tensor image({1, 255, 255});
  for (double& v : image.data) v = malfuse::nn::uniform01(img_rng);
  gray.forward(image);
  expect(malfuse::GrayscaleCnn::kFeatureDim == 256 &&
             gray.features().size() == 256,
         "grayscale feature block is " + std::to_string(gray.features().size()) +
             "-wide, want 256");

  malfuse::EntropyCnn ent(3, 12);
  malfuse::nn::Tensor stream({1, malfuse::kEntropyInputLen});
  for (double& v : stream.data) v = 8.0 * malfuse::nn::uniform01(img_rng);
  ent.forward(stream);
  expect(malfuse::EntropyCnn::kFeatureDim == 300 &&
             ent.features().size() == 300,
         "entropy feature block is " + std::to_string(ent.features().size()) +
             "-wide, want 300");

  return "held-out accuracy " + num(acc) +
         " on 60/30 planted-trigram split; blocks 300/256/300";
}

// ---------------------------------------------------------------------------
// C5: boosted-tree training invariants
// ---------------------------------------------------------------------------

std::string check_gbt_correctness() {
  // 90 rows, 3 classes in disjoint axis-aligned bands of feature 0; feature 1
  // is noise.  A depth-2 tree can already separate the bands.
  std::mt19937_64 rng(660);
  const std::size_t rows = 90;
  std::vector<int> labels(rows);
  malfuse::FeatureRegistry reg;
  reg.add("BYTE_MD", {"f0", "f1"});
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows; ++i) {
    labels[i] = static_cast<int>(i % 3);
    ids.push_back("r" + std::to_string(i));
  }
  malfuse::FeatureMatrix m(std::move(reg), std::move(ids), labels);
  for (std::size_t i = 0; i < rows; ++i) {
    m.set(i, 0, static_cast<double>(labels[i]) + 0.5 * malfuse::nn::uniform01(rng));
    m.set(i, 1, malfuse::nn::uniform01(rng));
  }

  malfuse::GbtParams base;  // library defaults are the documented baseline
  base.num_rounds = 20;
  std::vector<malfuse::RoundMetrics> history;
  const malfuse::GbtModel model =
      malfuse::train_gbt(m, 3, base, nullptr, &history);

  const double train_acc = malfuse::accuracy(labels, model.predict_class(m));
  expect(train_acc == 1.0,
         "training accuracy " + num(train_acc) + " after 20 rounds, want 1.0");

  expect(history.size() == 20, "expected 20 history rounds, got " +
                                   std::to_string(history.size()));
  for (std::size_t i = 1; i < history.size(); ++i) {
    expect(history[i].train_logloss <= history[i - 1].train_logloss + 1e-12,
           "training logloss rose at round " + std::to_string(i + 1) + ": " +
               num(history[i - 1].train_logloss) + " -> " +
               num(history[i].train_logloss));
  }

  malfuse::GbtParams frozen = base;
  frozen.eta = 0.0;
  const malfuse::GbtModel idle = malfuse::train_gbt(m, 3, frozen);
  const double idle_ll =
      malfuse::multiclass_logloss(labels, idle.predict_proba(m), 3);
  expect(std::abs(idle_ll - std::log(3.0)) <= kEtaZeroTol,
         "eta = 0 logloss " + num(idle_ll) + " differs from ln 3 by " +
             num(std::abs(idle_ll - std::log(3.0))));

  malfuse::GbtParams shallow = base;
  shallow.max_depth = 2;
  shallow.num_rounds = 8;
  const malfuse::GbtModel stub = malfuse::train_gbt(m, 3, shallow);
  const auto max_tree_depth = [](const malfuse::GbtModel& mod) {
    int deepest = 0;
    for (const malfuse::Tree& tree : mod.trees()) {
      deepest = std::max(deepest, tree.depth());
    }
    return deepest;
  };
  expect(max_tree_depth(model) <= base.max_depth,
         "a tree exceeds the configured depth " +
             std::to_string(base.max_depth));
  expect(max_tree_depth(idle) <= frozen.max_depth,
         "an eta-0 tree exceeds the configured depth");
  expect(max_tree_depth(stub) <= shallow.max_depth,
         "a tree exceeds the configured depth 2");

  return "accuracy 1.0 in 20 rounds; logloss monotone " +
         num(history.front().train_logloss) + " -> " +
         num(history.back().train_logloss) + "; eta-0 logloss " +
         num(idle_ll) + " = ln 3; depths within bounds";
}

// ---------------------------------------------------------------------------
// C6: feature-count contracts
// ---------------------------------------------------------------------------

std::string check_feature_counts() {
  malfuse::test::TempDir td("acc_layout");
  const std::string listing_text = malfuse::synth::asm_listing_text(0, 99);
  const fs::path asm_path = td.path() / "sample.asm";
  {
    std::ofstream out(asm_path, std::ios::binary);
    out << listing_text;
  }
  std::istringstream hex_in(malfuse::synth::hex_dump_text(0, 99));
  const malfuse::HexDump dump = malfuse::parse_hex_dump(hex_in);
  std::istringstream asm_in(listing_text);
  const malfuse::AsmListing listing = malfuse::parse_asm_listing(asm_in);

  malfuse::FeatureRegistry reg;
  const auto add = [&reg](const malfuse::FeatureBlock& block) {
    reg.add(block.category, block.names);
  };
  add(malfuse::byte_metadata(dump));
  add(malfuse::byte_unigrams(dump));
  add(malfuse::byte_entropy(dump));
  add(malfuse::byte_haralick(dump));
  add(malfuse::byte_lbp(dump));
  reg.add("BYTE_IMG_CNN",
          malfuse::hidden_feature_names(malfuse::GrayscaleCnn::kFeatureDim));
  reg.add("BYTE_ENT_CNN",
          malfuse::hidden_feature_names(malfuse::EntropyCnn::kFeatureDim));
  reg.add("BYTE_NGRAMS_CNN",
          malfuse::hidden_feature_names(malfuse::NgramCnn::kFeatureDim));
  add(malfuse::asm_metadata(listing));
  add(malfuse::asm_opcode_counts(listing));
  add(malfuse::asm_pixels(asm_path));
  add(malfuse::asm_register_counts(listing));
  add(malfuse::asm_symbol_counts(listing));
  add(malfuse::asm_api_counts(listing));
  add(malfuse::asm_data_define(listing));
  add(malfuse::asm_sections(listing));
  add(malfuse::asm_keywords(listing));
  reg.add("ASM_NGRAMS_CNN",
          malfuse::hidden_feature_names(malfuse::NgramCnn::kFeatureDim));

  const std::vector<std::pair<std::string, std::size_t>> contracts = {
      {"ASM_NGRAMS_CNN", 300}, {"ASM_PIXEL", 800}, {"BYTE_IMG_CNN", 256},
      {"ASM_API", 794},        {"ASM_OPC", 93},    {"ASM_MD", 2},
      {"ASM_REG", 38},         {"ASM_DD", 24},     {"ASM_SEC", 24},
      {"ASM_SYM", 7},          {"BYTE_1G", 256},   {"ASM_MISC", 95},
  };
  for (const auto& [category, want] : contracts) {
    expect(reg.has(category), "registry is missing " + category);
    const std::size_t got = reg.span(category).dim();
    expect(got == want, category + " spans " + std::to_string(got) +
                            " columns, want " + std::to_string(want));
  }
  expect(reg.dim() == 3574, "full registry spans " + std::to_string(reg.dim()) +
                                " columns, want 3574");

  return "12 category widths as contracted; full layout 3574 columns";
}

// ---------------------------------------------------------------------------
// C7: cross-validation harness hygiene
// ---------------------------------------------------------------------------

std::string check_cv_harness() {
  std::mt19937_64 rng(771);
  const std::size_t labeled = 27, unlabeled = 3;
  std::vector<int> labels;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labeled + unlabeled; ++i) {
    labels.push_back(i < labeled ? static_cast<int>(i % 3) : -1);
    ids.push_back("s" + std::to_string(i));
  }
  malfuse::FeatureRegistry reg;
  reg.add("BYTE_MD", {"f0", "f1"});
  malfuse::FeatureMatrix m(std::move(reg), ids, labels);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    m.set(i, 0, urand(rng, -1.0, 1.0));
    m.set(i, 1, urand(rng, -1.0, 1.0));
  }

  std::set<std::string> labeled_ids, unlabeled_ids;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    (labels[i] >= 0 ? labeled_ids : unlabeled_ids).insert(ids[i]);
  }

  std::vector<std::set<std::string>> train_sets, eval_sets;
  const malfuse::TrainPredictFn uniform =
      [&](const malfuse::FeatureMatrix& train,
          const malfuse::FeatureMatrix& eval_set) {
        train_sets.emplace_back(train.ids().begin(), train.ids().end());
        eval_sets.emplace_back(eval_set.ids().begin(), eval_set.ids().end());
        return std::vector<std::vector<double>>(
            eval_set.rows(), std::vector<double>(3, 1.0 / 3.0));
      };
  const malfuse::CvReport rep = malfuse::cross_validate(m, 3, 123, 3, uniform);

  expect(rep.folds.size() == 3 && train_sets.size() == 3,
         "expected 3 folds, got " + std::to_string(rep.folds.size()));
  std::set<std::string> eval_union;
  for (std::size_t f = 0; f < 3; ++f) {
    for (const std::string& id : eval_sets[f]) {
      expect(train_sets[f].count(id) == 0,
             "sample " + id + " is in both splits of fold " +
                 std::to_string(f));
      expect(eval_union.insert(id).second,
             "sample " + id + " is evaluated in two folds");
    }
    std::set<std::string> fold_all = train_sets[f];
    fold_all.insert(eval_sets[f].begin(), eval_sets[f].end());
    expect(fold_all == labeled_ids,
           "fold " + std::to_string(f) +
               " does not cover every labeled sample exactly once");
    for (const std::string& id : unlabeled_ids) {
      expect(train_sets[f].count(id) == 0 && eval_sets[f].count(id) == 0,
             "unlabeled sample " + id + " leaked into fold " +
                 std::to_string(f));
    }
  }
  expect(eval_union == labeled_ids,
         "held-out folds do not partition the labeled samples");

  expect(rep.mean_logloss == std::log(3.0),
         "uniform-predictor logloss " + num(rep.mean_logloss) +
             " is not exactly ln 3");
  for (const malfuse::FoldMetrics& fm : rep.folds) {
    expect(fm.logloss == std::log(3.0),
           "fold " + std::to_string(fm.fold) + " logloss " + num(fm.logloss) +
               " is not exactly ln 3");
  }

  // Stratification with uneven classes: 9/8/7 into 3 folds.
  std::vector<int> uneven;
  for (int i = 0; i < 9; ++i) uneven.push_back(0);
  for (int i = 0; i < 8; ++i) uneven.push_back(1);
  for (int i = 0; i < 7; ++i) uneven.push_back(2);
  uneven.push_back(-1);
  uneven.push_back(-1);
  const malfuse::KFoldPlan plan = malfuse::kfold_plan(uneven, 3, 77, true);
  long counts[3][3] = {};
  for (std::size_t i = 0; i < uneven.size(); ++i) {
    if (uneven[i] < 0) {
      expect(plan.fold_of[i] == -1, "unlabeled sample got a fold");
      continue;
    }
    expect(plan.fold_of[i] >= 0 && plan.fold_of[i] < 3, "fold out of range");
    ++counts[uneven[i]][plan.fold_of[i]];
  }
  for (int cls = 0; cls < 3; ++cls) {
    const long lo = std::min({counts[cls][0], counts[cls][1], counts[cls][2]});
    const long hi = std::max({counts[cls][0], counts[cls][1], counts[cls][2]});
    expect(hi - lo <= 1, "class " + std::to_string(cls) +
                             " fold counts spread by " + std::to_string(hi - lo));
  }

  return "folds partition 27 labeled ids; uniform logloss = ln 3 exactly; "
         "9/8/7 strata balanced within 1";
}

// ---------------------------------------------------------------------------
// C8: stepwise selection vs exhaustive search
// ---------------------------------------------------------------------------

std::string check_stepwise_selection() {
  // One informative category (feature tracks the label) and two constant
  // noise categories, so the informative set is the unique optimum and every
  // superset ties with it exactly.
  const std::size_t rows = 30;
  std::vector<int> labels(rows);
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < rows; ++i) {
    labels[i] = static_cast<int>(i % 3);
    ids.push_back("s" + std::to_string(i));
  }
  malfuse::FeatureRegistry reg;
  reg.add("ASM_MD", {"size", "lines"});
  reg.add("BYTE_MD", {"n0", "n1", "n2"});
  reg.add("BYTE_1G", {"z0", "z1", "z2", "z3", "z4"});
  malfuse::FeatureMatrix m(std::move(reg), ids, labels);
  const malfuse::CategorySpan& info = m.registry().span("ASM_MD");
  const malfuse::CategorySpan& ones = m.registry().span("BYTE_1G");
  for (std::size_t i = 0; i < rows; ++i) {
    m.set(i, info.offset, static_cast<double>(labels[i]) +
                              0.003 * static_cast<double>(i));
    m.set(i, info.offset + 1, 1.0);
    for (std::size_t j = 0; j < ones.dim(); ++j) m.set(i, ones.offset + j, 1.0);
    // BYTE_MD stays all-zero.
  }

  malfuse::GbtParams trainer;
  trainer.num_rounds = 20;
  trainer.max_depth = 3;
  trainer.eta = 0.3;
  trainer.min_child_weight = 0.0;
  const int folds = 3;
  const std::uint64_t seed = 5;

  const std::vector<std::string> candidates = {"BYTE_MD", "ASM_MD", "BYTE_1G"};
  const malfuse::StepwiseTrace trace =
      malfuse::forward_stepwise(m, candidates, folds, trainer, 3, seed);
  expect(trace.warnings.empty(), "stepwise skipped candidates: " +
                                     (trace.warnings.empty()
                                          ? std::string()
                                          : trace.warnings.front()));
  expect(trace.steps.size() == 1,
         "trace has " + std::to_string(trace.steps.size()) +
             " steps, want exactly 1");
  expect(trace.steps[0].category == "ASM_MD",
         "first added category is " + trace.steps[0].category +
             ", want ASM_MD");
  expect(trace.stop_reason == "no_improvement",
         "stop reason is " + trace.stop_reason + ", want no_improvement");

  // Exhaustive sweep over all non-empty category subsets with the same
  // folds, seed and trainer; ties prefer fewer columns.
  const auto cv_logloss = [&](const std::vector<std::string>& cats) {
    const malfuse::FeatureMatrix sub = m.select_categories(cats);
    return std::make_pair(
        malfuse::cross_validate(
            sub, folds, seed, 3,
            [&](const malfuse::FeatureMatrix& train,
                const malfuse::FeatureMatrix& eval_set) {
              return malfuse::train_gbt(train, 3, trainer)
                  .predict_proba(eval_set);
            })
            .mean_logloss,
        sub.dim());
  };
  double best_loss = std::numeric_limits<double>::infinity();
  std::size_t best_dim = 0;
  std::vector<std::string> best_set;
  for (unsigned mask = 1; mask < 8; ++mask) {
    std::vector<std::string> subset;
    for (unsigned bit = 0; bit < 3; ++bit) {
      if (mask & (1u << bit)) subset.push_back(candidates[bit]);
    }
    const auto [loss, dim] = cv_logloss(subset);
    if (loss < best_loss || (loss == best_loss && dim < best_dim)) {
      best_loss = loss;
      best_dim = dim;
      best_set = subset;
    }
  }
  expect(best_set == std::vector<std::string>{"ASM_MD"},
         "exhaustive search prefers a different subset of " +
             std::to_string(best_set.size()) + " categories");
  expect(best_loss == trace.steps[0].cv_logloss,
         "exhaustive optimum " + num(best_loss) +
             " differs from the trace value " + num(trace.steps[0].cv_logloss));

  return "adds ASM_MD first, stops after it; exhaustive optimum matches at "
         "logloss " + num(best_loss);
}

// ---------------------------------------------------------------------------
// C9: end-to-end determinism
// ---------------------------------------------------------------------------

std::map<std::string, std::string> snapshot_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& entry : fs::recursive_directory_iterator(root)) {
    if (!entry.is_regular_file()) continue;
    files[fs::relative(entry.path(), root).generic_string()] =
        read_file(entry.path());
  }
  return files;
}

std::string check_determinism() {
  const auto t0 = Clock::now();
  malfuse::test::TempDir td("acc_determinism");
  const fs::path manifest =
      malfuse::synth::write_corpus(td.path() / "corpus", {});  // 30 samples

  const auto run_once = [&](const fs::path& out) {
    malfuse::PipelineConfig cfg;
    cfg.manifest = manifest;
    cfg.store = out / "features.mfm";
    cfg.model_dir = out / "models";
    cfg.num_classes = 3;
    cfg.entropy_chunk = 64;
    cfg.cnn_epochs = 6;
    cfg.cnn_batch = 8;
    cfg.cnn_patience = 0;
    cfg.cnn_folds = 2;
    cfg.entropy_len = 64;
    cfg.byte_seq_cap = 2048;
    cfg.opcode_seq_cap = 512;
    cfg.gbt.num_rounds = 30;
    cfg.gbt.max_depth = 3;
    cfg.gbt.min_child_weight = 0.0;  // tiny folds: default would veto splits
    cfg.eval_folds = 3;
    cfg.select_bins = 8;
    cfg.k_grid = {20, 50};
    cfg.stepwise_folds = 3;
    cfg.validate();

    std::ostringstream log;
    const malfuse::ExtractStats stats = malfuse::run_extract(cfg, log);
    expect(stats.extracted == 30 && stats.skipped.empty(),
           "extraction covered " + std::to_string(stats.extracted) +
               "/30 samples");
    for (const char* category :
         {"ASM_NGRAMS_CNN", "BYTE_NGRAMS_CNN", "BYTE_ENT_CNN"}) {
      malfuse::run_train_cnn(cfg, category, log);
    }
    const std::vector<std::string> final_cats =
        malfuse::preset_categories("final");
    const fs::path model = malfuse::run_train_gbt(cfg, "final", final_cats, log);
    malfuse::run_evaluate(cfg, "final", final_cats, log);
    std::vector<std::string> select_cats = malfuse::hand_crafted_categories();
    select_cats.insert(select_cats.end(),
                       {"BYTE_ENT_CNN", "BYTE_NGRAMS_CNN", "ASM_NGRAMS_CNN"});
    malfuse::run_select(cfg, malfuse::ScoreMethod::kMutualInfo, select_cats,
                        log);
    malfuse::run_stepwise(
        cfg, {"ASM_OPC", "BYTE_1G", "ASM_API", "BYTE_ENT", "ASM_MISC"}, log);
    malfuse::run_predict(cfg, model, out / "predictions.csv", log);
    malfuse::run_importance(cfg, model, malfuse::ImportanceKind::kGain, false,
                            out / "importance.csv", log);
  };

  run_once(td.path() / "out1");
  run_once(td.path() / "out2");

  const auto first = snapshot_tree(td.path() / "out1");
  const auto second = snapshot_tree(td.path() / "out2");
  expect(!first.empty(), "first run produced no artifacts");
  expect(first.size() == second.size(),
         "runs produced " + std::to_string(first.size()) + " vs " +
             std::to_string(second.size()) + " files");
  std::size_t total_bytes = 0;
  for (const auto& [rel, bytes] : first) {
    const auto it = second.find(rel);
    expect(it != second.end(), "second run is missing " + rel);
    expect(it->second == bytes, rel + " differs between runs");
    total_bytes += bytes.size();
  }

  const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
  expect(secs < kMaxDeterminismSecs,
         "two pipeline runs took " + num(secs) + " s (budget 600 s)");

  return std::to_string(first.size()) + " artifacts (" +
         std::to_string(total_bytes) + " bytes) byte-identical across runs";
}

// ---------------------------------------------------------------------------
// C10: real-dataset cross-validation (conditional)
// ---------------------------------------------------------------------------

std::string check_dataset_cv() {
  const char* env = std::getenv("MALFUSE_KAGGLE_DIR");
  if (env == nullptr || *env == '\0') {
    throw Skipped("set MALFUSE_KAGGLE_DIR to the dataset root to enable");
  }
  const fs::path root(env);
  const fs::path labels_csv = root / "trainLabels.csv";
  const fs::path train_dir = root / "train";
  if (!fs::exists(labels_csv) || !fs::is_directory(train_dir)) {
    throw Skipped("no trainLabels.csv/train under " + root.string());
  }

  std::ifstream in(labels_csv);
  expect(static_cast<bool>(in), "cannot read " + labels_csv.string());
  std::string line;
  std::getline(in, line);  // header
  std::vector<std::pair<std::string, int>> entries;
  std::size_t missing_files = 0;
  while (std::getline(in, line)) {
    while (!line.empty() && (line.back() == '\r' || line.back() == '\n')) {
      line.pop_back();
    }
    if (line.empty()) continue;
    const std::size_t comma = line.rfind(',');
    expect(comma != std::string::npos, "malformed label row: " + line);
    std::string id = line.substr(0, comma);
    id.erase(std::remove(id.begin(), id.end(), '"'), id.end());
    const int cls = std::stoi(line.substr(comma + 1));
    expect(cls >= 1 && cls <= 9, "label " + std::to_string(cls) +
                                     " out of range for " + id);
    if (!fs::exists(train_dir / (id + ".bytes")) ||
        !fs::exists(train_dir / (id + ".asm"))) {
      ++missing_files;
      continue;
    }
    entries.emplace_back(id, cls - 1);
  }
  expect(!entries.empty(), "no usable samples listed in trainLabels.csv");

  malfuse::test::TempDir td("acc_dataset");
  const fs::path manifest = td.path() / "manifest.csv";
  {
    std::ofstream out(manifest);
    out << "id,label,hex_path,asm_path\n";
    for (const auto& [id, label] : entries) {
      out << id << "," << label << ","
          << (train_dir / (id + ".bytes")).string() << ","
          << (train_dir / (id + ".asm")).string() << "\n";
    }
  }

  malfuse::PipelineConfig cfg;
  cfg.manifest = manifest;
  cfg.store = td.path() / "features.mfm";
  cfg.model_dir = td.path() / "models";
  cfg.num_classes = 9;
  cfg.extract_categories = {"ASM_MISC"};
  cfg.validate();  // boosting params stay at the documented baseline

  std::ostringstream log;
  const malfuse::ExtractStats stats = malfuse::run_extract(cfg, log);
  expect(stats.extracted > 0, "extraction produced no rows");
  const malfuse::CvReport rep =
      malfuse::run_evaluate(cfg, "asm_misc", {"ASM_MISC"}, log);
  expect(rep.mean_accuracy >= kMinDatasetCvAcc,
         "ASM_MISC 10-fold accuracy " + num(rep.mean_accuracy) +
             ", want >= 0.98");

  return "ASM_MISC 10-fold accuracy " + num(rep.mean_accuracy) + " over " +
         std::to_string(stats.extracted) + " samples (" +
         std::to_string(missing_files) + " listed files missing)";
}

}  // namespace

int main() {
  int failures = 0;
  failures += run_check("C1", "oracle equivalence", check_oracle_equivalence);
  failures += run_check("C2", "entropy bounds", check_entropy_bounds);
  failures += run_check("C3", "gradient checks", check_gradients);
  failures += run_check("C4", "cnn learnability", check_cnn_learnability);
  failures += run_check("C5", "gbt correctness", check_gbt_correctness);
  failures += run_check("C6", "feature counts", check_feature_counts);
  failures += run_check("C7", "cv harness", check_cv_harness);
  failures += run_check("C8", "stepwise selection", check_stepwise_selection);
  failures += run_check("C9", "pipeline determinism", check_determinism);
  failures += run_check("C10", "dataset cross-validation", check_dataset_cv);
  if (failures > 0) {
    std::printf("acceptance: %d check(s) failed\n", failures);
    return 1;
  }
  std::printf("acceptance: all checks passed\n");
  return 0;
}
