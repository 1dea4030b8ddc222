#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

namespace malfuse::synth {

// Deterministic synthetic corpus for tests, fixtures and benchmarks.  Each
// class has a distinct byte-alphabet size (separating unigram and entropy
// features), a planted opcode trigram, and its own API/keyword flavor, so
// both hand-crafted and sequence models can tell the classes apart.  All
// content is a pure function of (cls, seed).

// Textual hex view: 16 bytes per line with an 8-digit uppercase address,
// a sparse scattering of "??" placeholders included.
std::string hex_dump_text(int cls, std::uint64_t seed);

// IDA-style listing: .text instruction lines (bytes column + mnemonic +
// operands), a .data block with db/dd lines, and comment lines carrying
// class-flavored keywords.
std::string asm_listing_text(int cls, std::uint64_t seed);

struct CorpusSpec {
  int num_classes = 3;
  std::size_t labeled_per_class = 9;
  std::size_t unlabeled = 3;
  std::uint64_t seed = 7;
};

// Writes hex/<id>.hex, asm/<id>.asm and manifest.csv under `dir` (created
// if needed) and returns the manifest path.  Sample ids are fix000, fix001,
// ... labeled block first, then unlabeled samples with an empty label field.
std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const CorpusSpec& spec);

}  // namespace malfuse::synth
