#include "malfuse/asmfeat.hpp"

#include <algorithm>
#include <array>
#include <cctype>

namespace malfuse {
namespace {

std::string to_lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) {
    return static_cast<char>(std::tolower(c));
  });
  return s;
}

double safe_div(double num, double den) { return den == 0.0 ? 0.0 : num / den; }

// Comma-split respecting single/double quotes; pieces are trimmed and empty
// pieces dropped.
std::vector<std::string> split_operands(const std::string& text) {
  std::vector<std::string> ops;
  std::string cur;
  char quote = 0;
  auto flush = [&]() {
    const auto b = cur.find_first_not_of(" \t");
    if (b != std::string::npos) {
      const auto e = cur.find_last_not_of(" \t");
      ops.push_back(cur.substr(b, e - b + 1));
    }
    cur.clear();
  };
  for (char c : text) {
    if (quote != 0) {
      if (c == quote) quote = 0;
      cur += c;
    } else if (c == '\'' || c == '"') {
      quote = c;
      cur += c;
    } else if (c == ',') {
      flush();
    } else {
      cur += c;
    }
  }
  flush();
  return ops;
}

// Lexically-zero data operand: "?", a numeric literal equal to zero
// (decimal, 0x-prefixed or h-suffixed hex), or `N dup(<zero operand>)`.
bool is_zero_operand(const std::string& op) {
  if (op == "?") return true;
  const auto dup = op.find("dup(");
  if (dup != std::string::npos && op.back() == ')') {
    return is_zero_operand(
        op.substr(dup + 4, op.size() - dup - 5));
  }
  std::string s = op;
  if (!s.empty() && (s.back() == 'h' || s.back() == 'H')) s.pop_back();
  if (s.rfind("0x", 0) == 0 || s.rfind("0X", 0) == 0) s = s.substr(2);
  if (s.empty()) return false;
  for (char c : s) {
    if (std::isxdigit(static_cast<unsigned char>(c)) == 0) return false;
  }
  return s.find_first_not_of('0') == std::string::npos;
}

}  // namespace

std::string normalize_operand_token(const std::string& token) {
  std::string s = token;
  while (!s.empty() && s.back() == ',') s.pop_back();
  if (s.size() >= 2 && s.front() == '[' && s.back() == ']') {
    s = s.substr(1, s.size() - 2);
  }
  static constexpr std::array<const char*, 6> kSegments = {
      "cs:", "ds:", "es:", "fs:", "gs:", "ss:"};
  for (const char* seg : kSegments) {
    if (s.rfind(seg, 0) == 0) {
      s = s.substr(3);
      break;
    }
  }
  if (s.rfind("__imp_", 0) == 0) s = s.substr(6);
  return s;
}

FeatureBlock asm_metadata(const AsmListing& listing) {
  FeatureBlock block;
  block.category = "ASM_MD";
  block.names = {"file_size", "num_lines"};
  block.values = {static_cast<double>(listing.file_size_bytes),
                  static_cast<double>(listing.lines.size())};
  return block;
}

FeatureBlock asm_opcode_counts(const AsmListing& listing, const Vocab& vocab) {
  FeatureBlock block;
  block.category = "ASM_OPC";
  block.names = vocab.terms();
  block.values.assign(vocab.size(), 0.0);
  for (const AsmLine& line : listing.lines) {
    const std::string op = extract_opcode(tokenize_asm_text(line.text));
    if (op.empty()) continue;
    if (const auto idx = vocab.index_of(op)) block.values[*idx] += 1.0;
  }
  return block;
}

namespace {

const std::vector<std::string>& register_names() {
  static const std::vector<std::string> kRegs = {
      "ax", "cx", "dx", "bx", "sp", "bp", "si", "di",
      "eax", "ecx", "edx", "ebx", "esp", "ebp", "esi", "edi",
      "rax", "rcx", "rdx", "rbx", "rsp", "rbp", "rsi", "rdi",
      "al", "ah", "cl", "ch", "dl", "dh", "bl", "bh",
      "ss", "cs", "ds", "es", "fs", "gs"};
  return kRegs;
}

}  // namespace

FeatureBlock asm_register_counts(const AsmListing& listing) {
  static const Vocab kRegVocab("ASM_REG", register_names());
  FeatureBlock block;
  block.category = "ASM_REG";
  block.names = kRegVocab.terms();
  block.values.assign(kRegVocab.size(), 0.0);
  for (const AsmLine& line : listing.lines) {
    for (const std::string& token : tokenize_asm_text(line.text)) {
      const std::string t = to_lower(normalize_operand_token(token));
      if (const auto idx = kRegVocab.index_of(t)) block.values[*idx] += 1.0;
    }
  }
  return block;
}

FeatureBlock asm_symbol_counts(const AsmListing& listing) {
  static constexpr std::array<char, 7> kSymbols = {'-', '+', '*', ']',
                                                   '[', '?', '@'};
  FeatureBlock block;
  block.category = "ASM_SYM";
  block.names = {"sym_minus",    "sym_plus",     "sym_star", "sym_rbracket",
                 "sym_lbracket", "sym_question", "sym_at"};
  block.values.assign(kSymbols.size(), 0.0);
  for (const AsmLine& line : listing.lines) {
    for (char c : line.text) {
      for (std::size_t i = 0; i < kSymbols.size(); ++i) {
        if (c == kSymbols[i]) {
          block.values[i] += 1.0;
          break;
        }
      }
    }
  }
  return block;
}

FeatureBlock asm_api_counts(const AsmListing& listing, const Vocab& vocab) {
  FeatureBlock block;
  block.category = "ASM_API";
  block.names = vocab.terms();
  block.values.assign(vocab.size(), 0.0);
  for (const AsmLine& line : listing.lines) {
    for (const std::string& token : tokenize_asm_text(line.text)) {
      const std::string t = normalize_operand_token(token);
      if (const auto idx = vocab.index_of(t)) block.values[*idx] += 1.0;
    }
  }
  return block;
}

FeatureBlock asm_data_define(const AsmListing& listing) {
  const double total = static_cast<double>(listing.lines.size());
  double n_db = 0, n_dd = 0, n_dw = 0, n_dc = 0;
  double db0 = 0, db_n0 = 0, db_text = 0;
  double db3_rdata = 0, db3_data = 0, db3_idata = 0, db3_all = 0, db3_ndnt = 0;
  double dd_text = 0, dd_rdata = 0;
  // Operand-count buckets for dd lines: [.text, all sections, outside
  // .data/.text] for 4, 5 and 6 operands.
  double dd_bucket[3][3] = {{0, 0, 0}, {0, 0, 0}, {0, 0, 0}};

  for (const AsmLine& line : listing.lines) {
    const std::string op = extract_opcode(tokenize_asm_text(line.text));
    if (op != "db" && op != "dd" && op != "dw" && op != "dc") continue;
    const bool in_text = line.section == ".text";
    const bool outside_dt = line.section != ".data" && line.section != ".text";
    const auto operands = split_operands(operand_text(line.text, op));
    const std::size_t n_ops = operands.size();
    const std::size_t n_nz = static_cast<std::size_t>(std::count_if(
        operands.begin(), operands.end(),
        [](const std::string& o) { return !is_zero_operand(o); }));

    if (op == "db") {
      ++n_db;
      if (n_nz == 0) ++db0; else ++db_n0;
      if (in_text) ++db_text;
      if (n_nz == 1) {
        ++db3_all;
        if (line.section == ".rdata") ++db3_rdata;
        if (line.section == ".data") ++db3_data;
        if (line.section == ".idata") ++db3_idata;
        if (outside_dt) ++db3_ndnt;
      }
    } else if (op == "dd") {
      ++n_dd;
      if (in_text) ++dd_text;
      if (line.section == ".rdata") ++dd_rdata;
      if (n_ops >= 4 && n_ops <= 6) {
        const std::size_t b = n_ops - 4;
        if (in_text) ++dd_bucket[b][0];
        ++dd_bucket[b][1];
        if (outside_dt) ++dd_bucket[b][2];
      }
    } else if (op == "dw") {
      ++n_dw;
    } else {
      ++n_dc;
    }
  }

  FeatureBlock block;
  block.category = "ASM_DD";
  block.names = {"db_por",    "dd_por",       "dw_por",   "dc_por",
                 "db0_por",   "dbN0_por",     "db_text",  "db3_rdata",
                 "db3_data",  "db3_idata",    "db3_all",  "db3_NdNt",
                 "db3_zero_all", "dd_text",   "dd_rdata", "dd4",
                 "dd5",       "dd6",          "dd4_all",  "dd5_all",
                 "dd6_all",   "dd4_NdNt",     "dd5_NdNt", "dd6_NdNt"};
  block.values = {safe_div(n_db, total),
                  safe_div(n_dd, total),
                  safe_div(n_dw, total),
                  safe_div(n_dc, total),
                  safe_div(db0, n_db),
                  safe_div(db_n0, n_db),
                  db_text,
                  db3_rdata,
                  db3_data,
                  db3_idata,
                  db3_all,
                  db3_ndnt,
                  safe_div(db0, db_n0),
                  dd_text,
                  dd_rdata,
                  dd_bucket[0][0],
                  dd_bucket[1][0],
                  dd_bucket[2][0],
                  dd_bucket[0][1],
                  dd_bucket[1][1],
                  dd_bucket[2][1],
                  dd_bucket[0][2],
                  dd_bucket[1][2],
                  dd_bucket[2][2]};
  return block;
}

FeatureBlock asm_sections(const AsmListing& listing) {
  static const std::vector<std::string> kKnown = {
      ".bss",  ".data", ".edata", ".idata", ".rdata",
      ".rsrc", ".text", ".tls",   ".reloc"};
  const double total = static_cast<double>(listing.lines.size());

  std::vector<double> counts(kKnown.size(), 0.0);
  std::vector<std::string> distinct;
  double known_lines = 0, unknown_lines = 0;
  for (const AsmLine& line : listing.lines) {
    if (std::find(distinct.begin(), distinct.end(), line.section) ==
        distinct.end()) {
      distinct.push_back(line.section);
    }
    const auto it = std::find(kKnown.begin(), kKnown.end(), line.section);
    if (it != kKnown.end()) {
      counts[static_cast<std::size_t>(it - kKnown.begin())] += 1.0;
      known_lines += 1.0;
    } else {
      unknown_lines += 1.0;
    }
  }
  double distinct_known = 0, distinct_unknown = 0;
  for (const std::string& name : distinct) {
    if (std::find(kKnown.begin(), kKnown.end(), name) != kKnown.end()) {
      ++distinct_known;
    } else {
      ++distinct_unknown;
    }
  }
  const double num_sections = static_cast<double>(distinct.size());

  FeatureBlock block;
  block.category = "ASM_SEC";
  for (const std::string& name : kKnown) {
    block.names.push_back("sec_" + name.substr(1));
  }
  for (const std::string& name : kKnown) {
    block.names.push_back("sec_" + name.substr(1) + "_por");
  }
  block.names.insert(block.names.end(),
                     {"num_section", "unknown_sections", "known_sections_lines",
                      "unknown_sections_lines", "known_sections_por",
                      "unknown_sections_por"});
  block.values = counts;
  for (double c : counts) block.values.push_back(safe_div(c, total));
  block.values.insert(block.values.end(),
                      {num_sections, distinct_unknown, known_lines,
                       unknown_lines, safe_div(distinct_known, num_sections),
                       safe_div(distinct_unknown, num_sections)});
  return block;
}

FeatureBlock asm_keywords(const AsmListing& listing, const Vocab& vocab) {
  FeatureBlock block;
  block.category = "ASM_MISC";
  block.names = vocab.terms();
  block.values.assign(vocab.size(), 0.0);
  std::vector<std::string> lowered;
  lowered.reserve(vocab.size());
  for (const std::string& term : vocab.terms()) lowered.push_back(to_lower(term));

  for (const AsmLine& line : listing.lines) {
    const std::string text = to_lower(line.text);
    for (std::size_t i = 0; i < lowered.size(); ++i) {
      const std::string& kw = lowered[i];
      if (kw.empty()) continue;
      for (std::size_t pos = text.find(kw); pos != std::string::npos;
           pos = text.find(kw, pos + 1)) {
        block.values[i] += 1.0;  // overlapping matches count
      }
    }
  }
  return block;
}

std::vector<int> opcode_id_sequence(const AsmListing& listing,
                                    const Vocab& vocab) {
  std::vector<int> ids;
  ids.reserve(listing.lines.size());
  for (const AsmLine& line : listing.lines) {
    const std::string op = extract_opcode(tokenize_asm_text(line.text));
    if (op.empty()) continue;
    const auto idx = vocab.index_of(op);
    ids.push_back(idx ? static_cast<int>(*idx)
                      : static_cast<int>(vocab.size()));
  }
  return ids;
}

}  // namespace malfuse
