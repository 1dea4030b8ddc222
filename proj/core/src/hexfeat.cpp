#include "malfuse/hexfeat.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>

#include "malfuse/errors.hpp"

namespace malfuse {

FeatureBlock byte_metadata(const HexDump& dump) {
  FeatureBlock block;
  block.category = "BYTE_MD";
  block.names = {"file_size", "start_address"};
  block.values = {static_cast<double>(dump.file_size_bytes),
                  static_cast<double>(dump.start_address)};
  return block;
}

FeatureBlock byte_unigrams(const HexDump& dump) {
  FeatureBlock block;
  block.category = "BYTE_1G";
  block.names.reserve(256);
  for (int v = 0; v < 256; ++v) {
    char name[8];
    std::snprintf(name, sizeof(name), "byte_%02x", v);
    block.names.emplace_back(name);
  }
  block.values.assign(256, 0.0);
  for (std::uint16_t b : dump.bytes) {
    if (b != kUndefinedByte) block.values[b] += 1.0;
  }
  return block;
}

double shannon_entropy(const std::uint8_t* data, std::size_t n) {
  if (n == 0) return 0.0;
  std::array<std::uint32_t, 256> counts{};
  for (std::size_t i = 0; i < n; ++i) ++counts[data[i]];
  double h = 0.0;
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::uint32_t c : counts) {
    if (c == 0) continue;
    const double p = static_cast<double>(c) * inv_n;
    h -= p * std::log2(p);
  }
  return h;
}

std::vector<double> entropy_stream(const std::vector<std::uint8_t>& bytes,
                                   const EntropyParams& params) {
  if (params.chunk_size < 2) {
    throw ValidationError("entropy chunk_size must be >= 2");
  }
  std::vector<double> stream;
  stream.reserve(bytes.size() / params.chunk_size + 1);
  for (std::size_t off = 0; off < bytes.size(); off += params.chunk_size) {
    const std::size_t n = std::min(params.chunk_size, bytes.size() - off);
    if (n < 2) break;  // degenerate final chunk
    stream.push_back(shannon_entropy(bytes.data() + off, n));
  }
  return stream;
}

std::vector<double> entropy_stream(const HexDump& dump,
                                   const EntropyParams& params) {
  return entropy_stream(dump.defined_bytes(), params);
}

namespace {

double percentile(const std::vector<double>& sorted, double p) {
  const double rank = (p / 100.0) * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(rank));
  const std::size_t hi = static_cast<std::size_t>(std::ceil(rank));
  return sorted[lo] + (rank - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

}  // namespace

FeatureBlock entropy_stats(const std::vector<double>& stream) {
  FeatureBlock block;
  block.category = "BYTE_ENT";
  block.names = {"ent_mean", "ent_var", "ent_median", "ent_max", "ent_min",
                 "ent_p10",  "ent_p20", "ent_p30",    "ent_p40", "ent_p50",
                 "ent_p60",  "ent_p70", "ent_p80",    "ent_p90"};
  block.values.assign(block.names.size(), 0.0);
  if (stream.empty()) return block;

  const double n = static_cast<double>(stream.size());
  double mean = 0.0;
  for (double v : stream) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : stream) var += (v - mean) * (v - mean);
  var /= n;

  std::vector<double> sorted(stream);
  std::sort(sorted.begin(), sorted.end());

  block.values[0] = mean;
  block.values[1] = var;
  block.values[2] = percentile(sorted, 50.0);
  block.values[3] = sorted.back();
  block.values[4] = sorted.front();
  for (int i = 0; i < 9; ++i) {
    block.values[5 + i] = percentile(sorted, 10.0 * (i + 1));
  }
  return block;
}

FeatureBlock byte_entropy(const HexDump& dump, const EntropyParams& params) {
  return entropy_stats(entropy_stream(dump, params));
}

}  // namespace malfuse
