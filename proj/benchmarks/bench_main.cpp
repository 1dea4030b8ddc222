// Microbenchmarks for the hot paths: dump/listing parsing, byte statistics,
// texture features, the boosted-tree trainer and the CNN forward passes.
// Inputs are synthetic and seeded, so numbers are comparable across runs.

#include <benchmark/benchmark.h>

#include <cstdint>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "malfuse/asmfeat.hpp"
#include "malfuse/corpus.hpp"
#include "malfuse/deepfeat.hpp"
#include "malfuse/featsel.hpp"
#include "malfuse/fusion.hpp"
#include "malfuse/gbt.hpp"
#include "malfuse/hexfeat.hpp"
#include "malfuse/imaging.hpp"
#include "malfuse/nn.hpp"
#include "malfuse/synth.hpp"

namespace {

std::vector<std::uint8_t> random_bytes(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<std::uint8_t> bytes(n);
  for (auto& b : bytes) b = static_cast<std::uint8_t>(rng());
  return bytes;
}

const std::string& hex_text() {
  static const std::string text = [] {
    std::string acc;
    for (int i = 0; i < 8; ++i) {
      acc += malfuse::synth::hex_dump_text(i % 3, 100 + i);
    }
    return acc;
  }();
  return text;
}

const std::string& asm_text() {
  static const std::string text = [] {
    std::string acc;
    for (int i = 0; i < 8; ++i) {
      acc += malfuse::synth::asm_listing_text(i % 3, 200 + i);
    }
    return acc;
  }();
  return text;
}

const malfuse::HexDump& parsed_dump() {
  static const malfuse::HexDump dump = [] {
    std::istringstream in(hex_text());
    return malfuse::parse_hex_dump(in);
  }();
  return dump;
}

const malfuse::AsmListing& parsed_listing() {
  static const malfuse::AsmListing listing = [] {
    std::istringstream in(asm_text());
    return malfuse::parse_asm_listing(in);
  }();
  return listing;
}

// Labeled random matrix for trainer/scorer benchmarks.
malfuse::FeatureMatrix random_matrix(std::size_t rows, std::size_t cols,
                                     int classes, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  malfuse::FeatureRegistry reg;
  std::vector<std::string> names;
  for (std::size_t c = 0; c < cols; ++c) names.push_back("f" + std::to_string(c));
  reg.add("BYTE_1G", names);
  std::vector<std::string> ids;
  std::vector<int> labels;
  for (std::size_t r = 0; r < rows; ++r) {
    ids.push_back("r" + std::to_string(r));
    labels.push_back(static_cast<int>(r % static_cast<std::size_t>(classes)));
  }
  malfuse::FeatureMatrix m(std::move(reg), std::move(ids), labels);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) {
      double v = malfuse::nn::uniform01(rng);
      if (c < 4) v += static_cast<double>(r % static_cast<std::size_t>(classes));
      m.set(r, c, v);
    }
  }
  return m;
}

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

void BM_ParseHexDump(benchmark::State& state) {
  const std::string& text = hex_text();
  for (auto _ : state) {
    std::istringstream in(text);
    benchmark::DoNotOptimize(malfuse::parse_hex_dump(in));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ParseHexDump)->Unit(benchmark::kMillisecond);

void BM_ParseAsmListing(benchmark::State& state) {
  const std::string& text = asm_text();
  for (auto _ : state) {
    std::istringstream in(text);
    benchmark::DoNotOptimize(malfuse::parse_asm_listing(in));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          static_cast<int64_t>(text.size()));
}
BENCHMARK(BM_ParseAsmListing)->Unit(benchmark::kMillisecond);

// ---------------------------------------------------------------------------
// Byte statistics
// ---------------------------------------------------------------------------

void BM_ShannonEntropy(benchmark::State& state) {
  const auto bytes =
      random_bytes(static_cast<std::size_t>(state.range(0)), 42);
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::shannon_entropy(bytes.data(), bytes.size()));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_ShannonEntropy)->Arg(1 << 12)->Arg(1 << 16)->Arg(1 << 20);

void BM_EntropyStream(benchmark::State& state) {
  const auto bytes = random_bytes(1 << 18, 43);
  const malfuse::EntropyParams params;
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::entropy_stream(bytes, params));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) * (1 << 18));
}
BENCHMARK(BM_EntropyStream)->Unit(benchmark::kMillisecond);

void BM_ByteUnigrams(benchmark::State& state) {
  const malfuse::HexDump& dump = parsed_dump();
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::byte_unigrams(dump));
  }
}
BENCHMARK(BM_ByteUnigrams)->Unit(benchmark::kMicrosecond);

// ---------------------------------------------------------------------------
// Texture features
// ---------------------------------------------------------------------------

void BM_HaralickFeatures(benchmark::State& state) {
  const auto bytes =
      random_bytes(static_cast<std::size_t>(state.range(0)), 44);
  const malfuse::GrayImage img = malfuse::bytes_to_image(bytes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::haralick_features(img));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_HaralickFeatures)->Arg(1 << 14)->Arg(1 << 17)
    ->Unit(benchmark::kMillisecond);

void BM_LbpHistogram(benchmark::State& state) {
  const auto bytes =
      random_bytes(static_cast<std::size_t>(state.range(0)), 45);
  const malfuse::GrayImage img = malfuse::bytes_to_image(bytes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::lbp_histogram(img));
  }
  state.SetBytesProcessed(static_cast<int64_t>(state.iterations()) *
                          state.range(0));
}
BENCHMARK(BM_LbpHistogram)->Arg(1 << 14)->Arg(1 << 17)
    ->Unit(benchmark::kMillisecond);

void BM_ResizeLanczos(benchmark::State& state) {
  const auto bytes = random_bytes(1 << 17, 46);
  const malfuse::GrayImage img = malfuse::bytes_to_image(bytes);
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::resize_lanczos(img, 255, 255));
  }
}
BENCHMARK(BM_ResizeLanczos)->Unit(benchmark::kMillisecond);

// ---------------------------------------------------------------------------
// Listing features
// ---------------------------------------------------------------------------

void BM_AsmOpcodeCounts(benchmark::State& state) {
  const malfuse::AsmListing& listing = parsed_listing();
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::asm_opcode_counts(listing));
  }
}
BENCHMARK(BM_AsmOpcodeCounts)->Unit(benchmark::kMicrosecond);

void BM_AsmApiCounts(benchmark::State& state) {
  const malfuse::AsmListing& listing = parsed_listing();
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::asm_api_counts(listing));
  }
}
BENCHMARK(BM_AsmApiCounts)->Unit(benchmark::kMicrosecond);

// ---------------------------------------------------------------------------
// Selection scorers
// ---------------------------------------------------------------------------

void BM_MutualInfoScores(benchmark::State& state) {
  const malfuse::FeatureMatrix m = random_matrix(256, 512, 3, 47);
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::mutual_info_scores(m, 16));
  }
}
BENCHMARK(BM_MutualInfoScores)->Unit(benchmark::kMillisecond);

// ---------------------------------------------------------------------------
// Boosted trees
// ---------------------------------------------------------------------------

void BM_GbtTrain(benchmark::State& state) {
  const malfuse::FeatureMatrix m = random_matrix(
      static_cast<std::size_t>(state.range(0)), 64, 3, 48);
  malfuse::GbtParams params;
  params.num_rounds = 20;
  params.max_depth = 4;
  for (auto _ : state) {
    benchmark::DoNotOptimize(malfuse::train_gbt(m, 3, params));
  }
}
BENCHMARK(BM_GbtTrain)->Arg(128)->Arg(512)->Unit(benchmark::kMillisecond);

void BM_GbtPredict(benchmark::State& state) {
  const malfuse::FeatureMatrix m = random_matrix(512, 64, 3, 49);
  malfuse::GbtParams params;
  params.num_rounds = 20;
  params.max_depth = 4;
  const malfuse::GbtModel model = malfuse::train_gbt(m, 3, params);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.predict_proba(m));
  }
  state.SetItemsProcessed(static_cast<int64_t>(state.iterations()) * 512);
}
BENCHMARK(BM_GbtPredict)->Unit(benchmark::kMillisecond);

// ---------------------------------------------------------------------------
// CNN forward passes
// ---------------------------------------------------------------------------

void BM_NgramCnnForward(benchmark::State& state) {
  malfuse::NgramCnn model(96, 3, 50);
  std::mt19937_64 rng(51);
  std::vector<int> seq(512);
  for (int& v : seq) v = static_cast<int>(rng() % 95);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(seq));
  }
}
BENCHMARK(BM_NgramCnnForward)->Unit(benchmark::kMillisecond);

void BM_EntropyCnnForward(benchmark::State& state) {
  malfuse::EntropyCnn model(3, 52);
  std::mt19937_64 rng(53);
  malfuse::nn::Tensor stream({1, malfuse::kEntropyInputLen});
  for (double& v : stream.data) v = 8.0 * malfuse::nn::uniform01(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(stream));
  }
}
BENCHMARK(BM_EntropyCnnForward)->Unit(benchmark::kMillisecond);

void BM_GrayscaleCnnForward(benchmark::State& state) {
  malfuse::GrayscaleCnn model(3, 54);
  std::mt19937_64 rng(55);
  malfuse::nn::Tensor image({1, 255, 255});
  for (double& v : image.data) v = malfuse::nn::uniform01(rng);
  for (auto _ : state) {
    benchmark::DoNotOptimize(model.forward(image));
  }
}
BENCHMARK(BM_GrayscaleCnnForward)->Unit(benchmark::kMillisecond)
    ->Iterations(3);

}  // namespace

BENCHMARK_MAIN();
