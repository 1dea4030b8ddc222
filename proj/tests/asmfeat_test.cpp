#include "malfuse/asmfeat.hpp"

#include <doctest.h>

#include <fstream>
#include <numeric>
#include <sstream>

#include "malfuse/errors.hpp"
#include "malfuse/vocab.hpp"
#include "temp_dir.hpp"

using namespace malfuse;

namespace {

AsmListing listing_from(const std::string& text) {
  std::istringstream in(text);
  return parse_asm_listing(in);
}

double value_of(const FeatureBlock& block, const std::string& name) {
  for (std::size_t i = 0; i < block.names.size(); ++i) {
    if (block.names[i] == name) return block.values[i];
  }
  FAIL("no feature named " << name);
  return 0.0;
}

}  // namespace

TEST_CASE("load_vocab parses headers, comments and terms") {
  test::TempDir dir("vocab");
  const auto p = dir.path() / "v.txt";
  {
    std::ofstream out(p);
    out << "# a comment\n#category: ASM_OPC\nmov\npush\n\n# more\npop\n";
  }
  const Vocab v = load_vocab(p);
  CHECK(v.category() == "ASM_OPC");
  REQUIRE(v.size() == 3);
  CHECK(v.terms()[0] == "mov");
  CHECK(v.index_of("pop") == 2);
  CHECK_FALSE(v.index_of("nop").has_value());
  CHECK(v.contains("push"));
}

TEST_CASE("load_vocab rejects malformed files") {
  test::TempDir dir("vocab_bad");
  auto write = [&](const std::string& body) {
    std::ofstream out(dir.path() / "v.txt");
    out << body;
  };
  SUBCASE("missing category header") {
    write("mov\n");
    CHECK_THROWS_AS(load_vocab(dir.path() / "v.txt"), ParseError);
  }
  SUBCASE("term before header") {
    write("mov\n#category: X\n");
    CHECK_THROWS_AS(load_vocab(dir.path() / "v.txt"), ParseError);
  }
  SUBCASE("duplicate term") {
    write("#category: X\nmov\nmov\n");
    CHECK_THROWS_AS(load_vocab(dir.path() / "v.txt"), ParseError);
  }
  SUBCASE("duplicate header") {
    write("#category: X\n#category: Y\nmov\n");
    CHECK_THROWS_AS(load_vocab(dir.path() / "v.txt"), ParseError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS(load_vocab(dir.path() / "missing.txt"), IoError);
  }
}

TEST_CASE("default vocabularies have the contracted sizes") {
  CHECK(default_opcode_vocab().size() == 93);
  CHECK(default_opcode_vocab().category() == "ASM_OPC");
  CHECK(default_opcode_vocab().contains("mov"));
  CHECK(default_api_vocab().size() == 794);
  CHECK(default_api_vocab().category() == "ASM_API");
  CHECK(default_api_vocab().contains("CreateFileA"));
  CHECK(default_keyword_vocab().size() == 95);
  CHECK(default_keyword_vocab().category() == "ASM_MISC");
}

TEST_CASE("default vocabularies match the files in data/vocab") {
  const std::filesystem::path data_dir(MALFUSE_DATA_DIR);
  const struct {
    const char* file;
    const Vocab& vocab;
  } cases[] = {
      {"asm_opc.txt", default_opcode_vocab()},
      {"asm_api.txt", default_api_vocab()},
      {"asm_misc.txt", default_keyword_vocab()},
  };
  for (const auto& c : cases) {
    const Vocab loaded = load_vocab(data_dir / "vocab" / c.file);
    CHECK(loaded.category() == c.vocab.category());
    CHECK(loaded.terms() == c.vocab.terms());
  }
}

TEST_CASE("asm_metadata reports size and line count") {
  const std::string text =
      ".text:00401000 55 push ebp\n.text:00401001 C3 retn\n";
  const AsmListing listing = listing_from(text);
  const FeatureBlock block = asm_metadata(listing);
  CHECK(block.category == "ASM_MD");
  CHECK(value_of(block, "file_size") == double(text.size()));
  CHECK(value_of(block, "num_lines") == 2.0);
}

TEST_CASE("asm_opcode_counts counts one mnemonic per line") {
  const AsmListing listing = listing_from(
      ".text:00401000 55 push ebp\n"
      ".text:00401001 8B EC mov ebp, esp\n"
      ".text:00401003 8B C1 mov eax, ecx ; mov in comment ignored\n"
      ".text:00401005 loc_5: ; no mnemonic\n"
      ".text:00401006 FF 15 frobnicate eax ; unknown mnemonic\n");
  const FeatureBlock block = asm_opcode_counts(listing);
  CHECK(block.category == "ASM_OPC");
  REQUIRE(block.dim() == 93);
  CHECK(value_of(block, "push") == 1.0);
  CHECK(value_of(block, "mov") == 2.0);
  CHECK(std::accumulate(block.values.begin(), block.values.end(), 0.0) == 3.0);
}

TEST_CASE("asm_register_counts normalizes operands") {
  const AsmListing listing = listing_from(
      ".text:00401000 8B mov eax, ebx\n"
      ".text:00401002 8B mov eax, [ecx]\n"
      ".text:00401004 FF push EAX ; case-insensitive\n"
      ".text:00401006 8B mov edx, es:bx\n"
      ".text:00401008 8D lea esi, [eax+4] ; compound, not counted\n"
      ".text:0040100A 1E push ds\n");
  const FeatureBlock block = asm_register_counts(listing);
  REQUIRE(block.dim() == 38);
  CHECK(value_of(block, "eax") == 3.0);  // eax, EAX, [ecx] line's eax
  CHECK(value_of(block, "ebx") == 1.0);
  CHECK(value_of(block, "ecx") == 1.0);
  CHECK(value_of(block, "bx") == 1.0);   // es: prefix stripped
  CHECK(value_of(block, "es") == 0.0);   // prefix does not count as es
  CHECK(value_of(block, "ds") == 1.0);   // bare segment register does
  CHECK(value_of(block, "esi") == 1.0);
}

TEST_CASE("asm_symbol_counts tallies the seven symbols") {
  const AsmListing listing = listing_from(
      ".text:00401000 8D lea eax, [ebx+ecx*2-8] ; a+b\n"
      ".text:00401004 ?? ?? db ?\n"
      ".text:00401008 E8 call sub@4\n");
  const FeatureBlock block = asm_symbol_counts(listing);
  REQUIRE(block.dim() == 7);
  // line 1: [ ] + * - and comment "+": + appears twice
  CHECK(value_of(block, "sym_lbracket") == 1.0);
  CHECK(value_of(block, "sym_rbracket") == 1.0);
  CHECK(value_of(block, "sym_plus") == 2.0);
  CHECK(value_of(block, "sym_star") == 1.0);
  CHECK(value_of(block, "sym_minus") == 1.0);
  // line 2: "?? ?? ?" = 5 question marks
  CHECK(value_of(block, "sym_question") == 5.0);
  CHECK(value_of(block, "sym_at") == 1.0);
}

TEST_CASE("asm_api_counts is case-sensitive and strips decorations") {
  const AsmListing listing = listing_from(
      ".text:00401000 FF call CreateFileA\n"
      ".text:00401006 FF call ds:CreateFileA\n"
      ".text:0040100C FF call [CreateFileA]\n"
      ".text:00401012 FF call __imp_CreateFileA\n"
      ".text:00401018 FF call createfilea ; wrong case\n"
      ".text:0040101E FF call CreateFileW,\n");
  const FeatureBlock block = asm_api_counts(listing);
  REQUIRE(block.dim() == 794);
  CHECK(value_of(block, "CreateFileA") == 4.0);
  CHECK(value_of(block, "CreateFileW") == 1.0);
}

namespace {

// Thirteen-line listing with hand-counted data-definition statistics.
const char* kDataDefListing =
    ".text:00401000 55 push ebp\n"
    ".text:00401004 00 db 0\n"
    ".data:00403000 dd 1, 2, 3, 4\n"
    ".rdata:00404000 db 5\n"
    ".rdata:00404004 dd 0\n"
    ".text:00401008 dd 1,2,3,4,5\n"
    ".idata:00405000 db 3 dup(0)\n"
    ".data:00403004 db 7, 0\n"
    "free-form line\n"
    ".text:0040100C dw 1\n"
    ".tls:00408000 dc 9\n"
    ".text:00401010 dd 1,2,3,4,5,6\n"
    ".bss:00406000 dd 0,0,0,0\n";

}  // namespace

TEST_CASE("asm_data_define matches a hand-counted listing") {
  const FeatureBlock block = asm_data_define(listing_from(kDataDefListing));
  CHECK(block.category == "ASM_DD");
  REQUIRE(block.dim() == 24);

  CHECK(value_of(block, "db_por") == doctest::Approx(4.0 / 13));
  CHECK(value_of(block, "dd_por") == doctest::Approx(5.0 / 13));
  CHECK(value_of(block, "dw_por") == doctest::Approx(1.0 / 13));
  CHECK(value_of(block, "dc_por") == doctest::Approx(1.0 / 13));
  CHECK(value_of(block, "db0_por") == doctest::Approx(0.5));   // db 0, dup(0)
  CHECK(value_of(block, "dbN0_por") == doctest::Approx(0.5));
  CHECK(value_of(block, "db_text") == 1.0);
  CHECK(value_of(block, "db3_rdata") == 1.0);
  CHECK(value_of(block, "db3_data") == 1.0);   // "db 7, 0" has one nonzero
  CHECK(value_of(block, "db3_idata") == 0.0);
  CHECK(value_of(block, "db3_all") == 2.0);
  CHECK(value_of(block, "db3_NdNt") == 1.0);   // the .rdata one
  CHECK(value_of(block, "db3_zero_all") == 1.0);  // 2 zero : 2 nonzero
  CHECK(value_of(block, "dd_text") == 2.0);
  CHECK(value_of(block, "dd_rdata") == 1.0);
  CHECK(value_of(block, "dd4") == 0.0);
  CHECK(value_of(block, "dd5") == 1.0);
  CHECK(value_of(block, "dd6") == 1.0);
  CHECK(value_of(block, "dd4_all") == 2.0);
  CHECK(value_of(block, "dd5_all") == 1.0);
  CHECK(value_of(block, "dd6_all") == 1.0);
  CHECK(value_of(block, "dd4_NdNt") == 1.0);   // the .bss one
  CHECK(value_of(block, "dd5_NdNt") == 0.0);
  CHECK(value_of(block, "dd6_NdNt") == 0.0);
}

TEST_CASE("asm_data_define zero-operand forms") {
  const FeatureBlock block = asm_data_define(listing_from(
      ".data:00403000 db 0\n"
      ".data:00403001 db 00h\n"
      ".data:00403002 db ?\n"
      ".data:00403003 db 4 dup(?)\n"
      ".data:00403004 db 0FFh\n"
      ".data:00403005 db '0'\n"));  // character literal is not numeric zero
  CHECK(value_of(block, "db0_por") == doctest::Approx(4.0 / 6));
  CHECK(value_of(block, "dbN0_por") == doctest::Approx(2.0 / 6));
  CHECK(value_of(block, "db3_zero_all") == doctest::Approx(2.0));
}

TEST_CASE("asm_data_define on an empty listing is all zeros") {
  const FeatureBlock block = asm_data_define(listing_from(""));
  for (double v : block.values) CHECK(v == 0.0);
}

TEST_CASE("asm_sections matches a hand-counted listing") {
  const FeatureBlock block = asm_sections(listing_from(kDataDefListing));
  CHECK(block.category == "ASM_SEC");
  REQUIRE(block.dim() == 24);

  CHECK(value_of(block, "sec_bss") == 1.0);
  CHECK(value_of(block, "sec_data") == 2.0);
  CHECK(value_of(block, "sec_edata") == 0.0);
  CHECK(value_of(block, "sec_idata") == 1.0);
  CHECK(value_of(block, "sec_rdata") == 2.0);
  CHECK(value_of(block, "sec_rsrc") == 0.0);
  CHECK(value_of(block, "sec_text") == 5.0);
  CHECK(value_of(block, "sec_tls") == 1.0);
  CHECK(value_of(block, "sec_reloc") == 0.0);
  CHECK(value_of(block, "sec_text_por") == doctest::Approx(5.0 / 13));
  CHECK(value_of(block, "sec_bss_por") == doctest::Approx(1.0 / 13));
  CHECK(value_of(block, "num_section") == 7.0);        // incl. UNKNOWN
  CHECK(value_of(block, "unknown_sections") == 1.0);
  CHECK(value_of(block, "known_sections_lines") == 12.0);
  CHECK(value_of(block, "unknown_sections_lines") == 1.0);
  CHECK(value_of(block, "known_sections_por") == doctest::Approx(6.0 / 7));
  CHECK(value_of(block, "unknown_sections_por") == doctest::Approx(1.0 / 7));
}

TEST_CASE("asm_keywords counts overlapping case-insensitive substrings") {
  test::TempDir dir("kw");
  {
    std::ofstream out(dir.path() / "kw.txt");
    out << "#category: ASM_MISC\nkernel32\naa\n.dll\n";
  }
  const Vocab vocab = load_vocab(dir.path() / "kw.txt");
  const AsmListing listing = listing_from(
      ".text:00401000 call Kernel32_thunk ; KERNEL32.DLL\n"
      ".text:00401008 db 'aaaa'\n");
  const FeatureBlock block = asm_keywords(listing, vocab);
  CHECK(value_of(block, "kernel32") == 2.0);
  CHECK(value_of(block, "aa") == 3.0);  // overlapping matches in "aaaa"
  CHECK(value_of(block, ".dll") == 1.0);
}

TEST_CASE("asm_keywords agrees with a quadratic oracle") {
  const AsmListing listing = listing_from(
      ".text:00401000 mov eax, offset kernel32_kernel32\n"
      ".data:00403000 db 'http://www.example.com',0\n"
      ".idata:00405000 extrn CreateFileA:dword\n");
  const Vocab& vocab = default_keyword_vocab();
  const FeatureBlock block = asm_keywords(listing, vocab);

  auto lower = [](std::string s) {
    for (char& c : s) c = char(std::tolower((unsigned char)c));
    return s;
  };
  for (std::size_t k = 0; k < vocab.size(); ++k) {
    const std::string kw = lower(vocab.terms()[k]);
    double want = 0.0;
    for (const AsmLine& line : listing.lines) {
      const std::string text = lower(line.text);
      if (text.size() < kw.size()) continue;
      for (std::size_t i = 0; i + kw.size() <= text.size(); ++i) {
        if (text.compare(i, kw.size(), kw) == 0) want += 1.0;
      }
    }
    CHECK(block.values[k] == want);
  }
}

TEST_CASE("opcode_id_sequence maps unknown mnemonics to vocab size") {
  const AsmListing listing = listing_from(
      ".text:00401000 55 push ebp\n"
      ".text:00401001 FF frobnicate eax\n"
      ".text:00401003 loc_3:\n"
      ".text:00401004 C3 retn\n");
  const Vocab& vocab = default_opcode_vocab();
  const auto ids = opcode_id_sequence(listing);
  REQUIRE(ids.size() == 3);  // the label line contributes nothing
  CHECK(ids[0] == int(*vocab.index_of("push")));
  CHECK(ids[1] == int(vocab.size()));
  CHECK(ids[2] == int(*vocab.index_of("retn")));
}

TEST_CASE("normalize_operand_token") {
  CHECK(normalize_operand_token("eax,") == "eax");
  CHECK(normalize_operand_token("[ecx]") == "ecx");
  CHECK(normalize_operand_token("ds:CreateFileA") == "CreateFileA");
  CHECK(normalize_operand_token("__imp_ReadFile") == "ReadFile");
  CHECK(normalize_operand_token("[eax+4]") == "eax+4");
  CHECK(normalize_operand_token("plain") == "plain");
}
