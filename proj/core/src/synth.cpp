#include "malfuse/synth.hpp"

#include <array>
#include <cstdio>
#include <fstream>
#include <vector>

#include "malfuse/errors.hpp"

namespace malfuse::synth {

namespace {

// Local LCG so fixture bytes do not depend on any standard-library
// distribution implementation.
struct Rng {
  std::uint64_t state;
  std::uint64_t next() {
    state = state * 6364136223846793005ull + 1442695040888963407ull;
    return state >> 11;
  }
  std::uint64_t below(std::uint64_t n) { return next() % n; }
};

std::string hex_addr(std::uint64_t address) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08llX",
                static_cast<unsigned long long>(address));
  return buf;
}

std::string hex_byte(unsigned value) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "%02X", value & 0xffu);
  return buf;
}

// Per-class building blocks.  Entries must exist in the default
// vocabularies; synth_test cross-checks them.
const std::array<std::array<const char*, 3>, 3> kTrigrams = {{
    {"rol", "ror", "mul"},
    {"shl", "shr", "div"},
    {"inc", "dec", "neg"},
}};
const std::array<const char*, 8> kFillerOps = {
    "mov", "push", "pop", "lea", "cmp", "test", "xor", "add"};
const std::array<const char*, 8> kRegisters = {
    "eax", "ebx", "ecx", "edx", "esi", "edi", "ebp", "esp"};
const std::array<std::array<const char*, 2>, 3> kApis = {{
    {"ReadFile", "CloseHandle"},
    {"WriteFile", "CreateThread"},
    {"VirtualAlloc", "ExitProcess"},
}};
const std::array<const char*, 3> kKeywords = {"kernel32", "user32",
                                              "advapi32"};

int profile(int cls) { return ((cls % 3) + 3) % 3; }

}  // namespace

std::string hex_dump_text(int cls, std::uint64_t seed) {
  Rng rng{seed * 2654435761ull + static_cast<std::uint64_t>(cls) + 1};
  int p = profile(cls);
  // Alphabet size drives both the unigram histogram and the entropy level.
  unsigned alphabet = 4u << (2 * p);  // 4, 16, 64 distinct byte values
  std::size_t n = 1200 + static_cast<std::size_t>(rng.below(800));
  std::uint64_t address = 0x00401000 + 0x1000 * static_cast<std::uint64_t>(p);

  std::string out;
  out.reserve(n * 3 + (n / 16) * 10);
  std::size_t emitted = 0;
  unsigned run_value = 0;
  std::size_t run_left = 0;
  while (emitted < n) {
    out += hex_addr(address);
    std::size_t line_len = std::min<std::size_t>(16, n - emitted);
    for (std::size_t j = 0; j < line_len; ++j) {
      out += ' ';
      if ((emitted + j) % 53 == 17) {
        out += "??";
        continue;
      }
      if (run_left == 0) {
        run_value = static_cast<unsigned>(rng.below(alphabet)) * (256 / alphabet);
        // Low-entropy classes repeat values in short runs.
        run_left = p == 0 ? 3 + rng.below(4) : 1;
      }
      out += hex_byte(run_value);
      --run_left;
    }
    out += '\n';
    emitted += line_len;
    address += 16;
  }
  return out;
}

std::string asm_listing_text(int cls, std::uint64_t seed) {
  Rng rng{seed * 976686449ull + static_cast<std::uint64_t>(cls) + 13};
  int p = profile(cls);
  std::uint64_t address = 0x00401000;
  std::string out;

  auto text_line = [&](const std::string& body) {
    out += ".text:" + hex_addr(address) + " " + body + "\n";
    address += 1 + rng.below(6);
  };

  std::size_t blocks = 24 + rng.below(16);
  for (std::size_t b = 0; b < blocks; ++b) {
    // A few filler instructions...
    std::size_t fill = 2 + rng.below(4);
    for (std::size_t i = 0; i < fill; ++i) {
      const char* op = kFillerOps[rng.below(kFillerOps.size())];
      const char* ra = kRegisters[rng.below(kRegisters.size())];
      const char* rb = kRegisters[rng.below(kRegisters.size())];
      text_line(hex_byte(static_cast<unsigned>(rng.below(256))) + " " +
                std::string(op) + " " + ra + ", " + rb);
    }
    // ... then the planted class trigram, uninterrupted.
    for (const char* op : kTrigrams[static_cast<std::size_t>(p)]) {
      const char* ra = kRegisters[rng.below(kRegisters.size())];
      text_line(hex_byte(static_cast<unsigned>(rng.below(256))) + " " +
                std::string(op) + " " + ra);
    }
    if (b % 5 == 1) {
      text_line("FF 15 call ds:" +
                std::string(kApis[static_cast<std::size_t>(p)][b % 2]));
    }
    if (b % 7 == 2) {
      text_line("90 nop ; imports " +
                std::string(kKeywords[static_cast<std::size_t>(p)]) + ".dll");
    }
  }

  // Data block: db/dd density differs per class via the block count above.
  std::uint64_t data_address = 0x00410000;
  std::size_t data_lines = 6 + static_cast<std::size_t>(p) * 4 + rng.below(4);
  for (std::size_t i = 0; i < data_lines; ++i) {
    std::string body;
    if (i % 3 == 0) {
      body = "dd " + std::to_string(rng.below(100000)) + "h";
    } else {
      body = "db " + std::to_string(rng.below(2) == 0
                                        ? 0
                                        : 1 + rng.below(255));
    }
    out += ".data:" + hex_addr(data_address) + " " + body + "\n";
    data_address += 4;
  }
  out += ".rsrc:" + hex_addr(0x00420000) + " db 0\n";
  return out;
}

std::filesystem::path write_corpus(const std::filesystem::path& dir,
                                   const CorpusSpec& spec) {
  if (spec.num_classes < 2 || spec.num_classes > 9) {
    throw ValidationError("corpus needs 2..9 classes");
  }
  if (spec.labeled_per_class == 0) {
    throw ValidationError("corpus needs at least one labeled sample per class");
  }
  std::filesystem::create_directories(dir / "hex");
  std::filesystem::create_directories(dir / "asm");

  auto write_file = [](const std::filesystem::path& path,
                       const std::string& content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    out << content;
    if (!out) throw IoError("failed to write " + path.string());
  };

  std::string manifest = "id,label,hex_path,asm_path\n";
  std::size_t index = 0;
  auto add_sample = [&](int cls, bool labeled) {
    char idbuf[16];
    std::snprintf(idbuf, sizeof(idbuf), "fix%03zu", index);
    std::string id(idbuf);
    std::uint64_t sample_seed = spec.seed + 1000 * index;
    write_file(dir / "hex" / (id + ".hex"), hex_dump_text(cls, sample_seed));
    write_file(dir / "asm" / (id + ".asm"),
               asm_listing_text(cls, sample_seed));
    manifest += id + "," + (labeled ? std::to_string(cls) : std::string()) +
                ",hex/" + id + ".hex,asm/" + id + ".asm\n";
    ++index;
  };

  for (std::size_t i = 0; i < spec.labeled_per_class; ++i) {
    for (int cls = 0; cls < spec.num_classes; ++cls) add_sample(cls, true);
  }
  for (std::size_t i = 0; i < spec.unlabeled; ++i) {
    add_sample(static_cast<int>(i) % spec.num_classes, false);
  }

  std::filesystem::path manifest_path = dir / "manifest.csv";
  write_file(manifest_path, manifest);
  return manifest_path;
}

}  // namespace malfuse::synth
