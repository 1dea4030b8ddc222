#pragma once

#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

namespace malfuse {

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

// One dataset entry.  Either path may be empty when that modality is missing;
// extractors that need the missing file report a per-sample failure instead
// of aborting the run.
struct SampleRef {
  std::string id;
  int label = -1;  // -1 = unlabeled
  std::filesystem::path hex_path;
  std::filesystem::path asm_path;

  bool labeled() const { return label >= 0; }
};

struct Manifest {
  std::vector<SampleRef> samples;
  int num_classes = 0;
};

// Loads a manifest CSV with header `id,label,hex_path,asm_path`.  Relative
// paths are resolved against the manifest's directory.  Throws ParseError on
// malformed rows (with line numbers), ValidationError on duplicate ids or
// labels outside [0, num_classes), and IoError when a referenced file does
// not exist.
Manifest load_manifest(const std::filesystem::path& path, int num_classes = 9);

// ---------------------------------------------------------------------------
// Hex dumps
// ---------------------------------------------------------------------------

// Sentinel for a "??" token: a byte that exists in the address space but has
// no defined value.  Valid bytes are 0..255.
inline constexpr std::uint16_t kUndefinedByte = 0x100;

struct HexDump {
  std::vector<std::uint16_t> bytes;  // 0..255, or kUndefinedByte
  std::uint64_t start_address = 0;   // address of the first line
  std::uint64_t file_size_bytes = 0; // size of the dump file on disk
  std::vector<std::string> warnings;

  std::size_t defined_count() const;
  // Defined bytes only, in order, as 0..255 values.
  std::vector<std::uint8_t> defined_bytes() const;
};

// Parses a hex dump: one line per 1..16 bytes, formatted as an uppercase or
// lowercase hex address followed by hex byte tokens ("00".."FF") or "??" for
// undefined bytes.  Non-monotonic line addresses are recorded as warnings,
// not errors.  Throws ParseError with a line number on malformed content.
HexDump parse_hex_dump(std::istream& in);
HexDump parse_hex_dump(const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Disassembly listings
// ---------------------------------------------------------------------------

struct AsmLine {
  std::string section;    // "UNKNOWN" when the line has no section:address prefix
  std::uint64_t address = 0;
  std::string text;       // everything after the section:address prefix
};

struct AsmListing {
  std::vector<AsmLine> lines;
  std::uint64_t file_size_bytes = 0;
  std::vector<std::string> warnings;
};

// Parses a disassembly listing of the form `.text:00401000 <bytes> <mnemonic>
// <operands> ; comment`.  Input is treated as raw bytes (listings routinely
// contain non-UTF-8 data); lines without a recognizable prefix land in
// section "UNKNOWN".  Never throws on content: this format is too messy for
// strictness, so anything unrecognized degrades gracefully.
AsmListing parse_asm_listing(std::istream& in);
AsmListing parse_asm_listing(const std::filesystem::path& path);

// Splits a line body into whitespace-separated tokens, dropping everything
// from the first token that starts a ';' comment.
std::vector<std::string> tokenize_asm_text(const std::string& text);

// Extracts the instruction mnemonic from a line body: the first token made of
// lowercase letters only, after skipping the leading hex byte-pair columns
// that IDA prints ("55", "8B", ...).  Returns "" when no mnemonic is found
// (labels, directives in uppercase, data definitions are found — "db"/"dd"
// count as mnemonics here).
std::string extract_opcode(const std::vector<std::string>& tokens);

// Remainder of the line after the extracted opcode token (operands and, if
// present, everything up to a ';' comment), trimmed.  Empty when `opcode` is
// empty or absent.
std::string operand_text(const std::string& text, const std::string& opcode);

}  // namespace malfuse
