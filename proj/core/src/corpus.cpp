#include "malfuse/corpus.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "malfuse/errors.hpp"

namespace malfuse {
namespace {

std::string trim(const std::string& s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_csv_row(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(trim(cur));
      cur.clear();
    } else {
      cur += c;
    }
  }
  fields.push_back(trim(cur));
  return fields;
}

bool is_hex_digit(char c) {
  return std::isxdigit(static_cast<unsigned char>(c)) != 0;
}

bool is_hex_string(const std::string& s) {
  return !s.empty() && std::all_of(s.begin(), s.end(), is_hex_digit);
}

std::string read_all(std::istream& in) {
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::string read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path.string());
  return read_all(in);
}

// Calls `fn(line_number, line)` for every '\n'-separated line, with trailing
// '\r' stripped.  Line numbers start at 1.
template <typename Fn>
void for_each_line(const std::string& content, Fn&& fn) {
  std::size_t pos = 0, line_no = 0;
  while (pos <= content.size()) {
    std::size_t nl = content.find('\n', pos);
    std::size_t end = (nl == std::string::npos) ? content.size() : nl;
    std::size_t len = end - pos;
    if (len > 0 && content[pos + len - 1] == '\r') --len;
    ++line_no;
    fn(line_no, content.substr(pos, len));
    if (nl == std::string::npos) break;
    pos = nl + 1;
  }
}

// Index of the first ';' outside of a quoted string, or s.size().
std::size_t comment_cut(const std::string& s) {
  char quote = 0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    if (quote != 0) {
      if (c == quote) quote = 0;
    } else if (c == '\'' || c == '"') {
      quote = c;
    } else if (c == ';') {
      return i;
    }
  }
  return s.size();
}

std::vector<std::pair<std::size_t, std::size_t>> token_spans(
    const std::string& s, std::size_t cut) {
  std::vector<std::pair<std::size_t, std::size_t>> spans;
  std::size_t i = 0;
  while (i < cut) {
    while (i < cut && std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    std::size_t start = i;
    while (i < cut && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
    if (i > start) spans.emplace_back(start, i - start);
  }
  return spans;
}

bool is_byte_pair(const std::string& t) {
  if (t == "??") return true;
  return t.size() == 2 && is_hex_digit(t[0]) && is_hex_digit(t[1]) &&
         !(std::islower(static_cast<unsigned char>(t[0])) ||
           std::islower(static_cast<unsigned char>(t[1])));
}

bool is_lower_alpha(const std::string& t) {
  return !t.empty() && std::all_of(t.begin(), t.end(), [](char c) {
    return c >= 'a' && c <= 'z';
  });
}

}  // namespace

// ---------------------------------------------------------------------------
// Manifest
// ---------------------------------------------------------------------------

Manifest load_manifest(const std::filesystem::path& path, int num_classes) {
  if (num_classes <= 0) throw ValidationError("num_classes must be positive");
  const std::string content = read_all(path);
  const std::filesystem::path base = path.has_parent_path()
                                         ? path.parent_path()
                                         : std::filesystem::path(".");

  Manifest manifest;
  manifest.num_classes = num_classes;
  std::unordered_set<std::string> seen_ids;
  bool header_seen = false;

  for_each_line(content, [&](std::size_t line_no, const std::string& line) {
    if (trim(line).empty()) return;
    if (!header_seen) {
      if (split_csv_row(line) !=
          std::vector<std::string>{"id", "label", "hex_path", "asm_path"}) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": expected header 'id,label,hex_path,asm_path'");
      }
      header_seen = true;
      return;
    }
    const auto fields = split_csv_row(line);
    if (fields.size() != 4) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": expected 4 fields, got " +
                       std::to_string(fields.size()));
    }
    SampleRef ref;
    ref.id = fields[0];
    if (ref.id.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": empty sample id");
    }
    if (!seen_ids.insert(ref.id).second) {
      throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                            ": duplicate sample id '" + ref.id + "'");
    }
    if (!fields[1].empty()) {
      int label = 0;
      try {
        std::size_t used = 0;
        label = std::stoi(fields[1], &used);
        if (used != fields[1].size()) throw std::invalid_argument("");
      } catch (const std::exception&) {
        throw ParseError(path.string() + ":" + std::to_string(line_no) +
                         ": bad label '" + fields[1] + "'");
      }
      if (label < 0 || label >= num_classes) {
        throw ValidationError(path.string() + ":" + std::to_string(line_no) +
                              ": label " + std::to_string(label) +
                              " outside [0, " + std::to_string(num_classes) +
                              ")");
      }
      ref.label = label;
    }
    auto resolve = [&](const std::string& field) -> std::filesystem::path {
      if (field.empty()) return {};
      std::filesystem::path p(field);
      if (p.is_relative()) p = base / p;
      if (!std::filesystem::exists(p)) {
        throw IoError(path.string() + ":" + std::to_string(line_no) +
                      ": file not found for sample '" + ref.id +
                      "': " + p.string());
      }
      return p;
    };
    ref.hex_path = resolve(fields[2]);
    ref.asm_path = resolve(fields[3]);
    manifest.samples.push_back(std::move(ref));
  });

  if (!header_seen) {
    throw ParseError(path.string() + ": empty manifest");
  }
  return manifest;
}

// ---------------------------------------------------------------------------
// Hex dumps
// ---------------------------------------------------------------------------

std::size_t HexDump::defined_count() const {
  return static_cast<std::size_t>(
      std::count_if(bytes.begin(), bytes.end(),
                    [](std::uint16_t b) { return b != kUndefinedByte; }));
}

std::vector<std::uint8_t> HexDump::defined_bytes() const {
  std::vector<std::uint8_t> out;
  out.reserve(bytes.size());
  for (std::uint16_t b : bytes) {
    if (b != kUndefinedByte) out.push_back(static_cast<std::uint8_t>(b));
  }
  return out;
}

namespace {

HexDump parse_hex_content(const std::string& content, const std::string& origin) {
  HexDump dump;
  dump.file_size_bytes = content.size();
  bool first_line = true;
  std::uint64_t prev_address = 0;

  for_each_line(content, [&](std::size_t line_no, const std::string& line) {
    if (trim(line).empty()) return;
    const auto spans = token_spans(line, line.size());
    const auto tok = [&](std::size_t i) {
      return line.substr(spans[i].first, spans[i].second);
    };
    const std::string addr_tok = tok(0);
    if (!is_hex_string(addr_tok) || addr_tok.size() > 16) {
      throw ParseError(origin + ":" + std::to_string(line_no) +
                       ": bad address token '" + addr_tok + "'");
    }
    const std::uint64_t address = std::stoull(addr_tok, nullptr, 16);
    const std::size_t n_bytes = spans.size() - 1;
    if (n_bytes < 1 || n_bytes > 16) {
      throw ParseError(origin + ":" + std::to_string(line_no) + ": expected " +
                       "1..16 byte tokens, got " + std::to_string(n_bytes));
    }
    for (std::size_t i = 1; i < spans.size(); ++i) {
      const std::string t = tok(i);
      if (t == "??") {
        dump.bytes.push_back(kUndefinedByte);
      } else if (t.size() == 2 && is_hex_digit(t[0]) && is_hex_digit(t[1])) {
        dump.bytes.push_back(static_cast<std::uint16_t>(
            std::stoul(t, nullptr, 16)));
      } else {
        throw ParseError(origin + ":" + std::to_string(line_no) +
                         ": bad byte token '" + t + "'");
      }
    }
    if (first_line) {
      dump.start_address = address;
      first_line = false;
    } else if (address < prev_address) {
      dump.warnings.push_back(origin + ":" + std::to_string(line_no) +
                              ": non-monotonic address");
    }
    prev_address = address;
  });
  return dump;
}

}  // namespace

HexDump parse_hex_dump(std::istream& in) {
  return parse_hex_content(read_all(in), "<stream>");
}

HexDump parse_hex_dump(const std::filesystem::path& path) {
  return parse_hex_content(read_all(path), path.string());
}

// ---------------------------------------------------------------------------
// Disassembly listings
// ---------------------------------------------------------------------------

namespace {

AsmListing parse_asm_content(const std::string& content) {
  AsmListing listing;
  listing.file_size_bytes = content.size();

  for_each_line(content, [&](std::size_t, const std::string& line) {
    if (line.empty()) return;
    AsmLine out;
    // A line normally starts with `section:hexaddress` followed by the body.
    std::size_t head_end = 0;
    while (head_end < line.size() &&
           !std::isspace(static_cast<unsigned char>(line[head_end]))) {
      ++head_end;
    }
    const std::string head = line.substr(0, head_end);
    const std::size_t colon = head.find(':');
    bool has_prefix = false;
    if (colon != std::string::npos && colon > 0 && colon + 1 < head.size()) {
      const std::string addr = head.substr(colon + 1);
      if (is_hex_string(addr) && addr.size() >= 4 && addr.size() <= 16) {
        out.section = head.substr(0, colon);
        out.address = std::stoull(addr, nullptr, 16);
        has_prefix = true;
      }
    }
    if (has_prefix) {
      std::size_t body = head_end;
      while (body < line.size() &&
             std::isspace(static_cast<unsigned char>(line[body]))) {
        ++body;
      }
      out.text = line.substr(body);
    } else {
      out.section = "UNKNOWN";
      out.text = line;
    }
    listing.lines.push_back(std::move(out));
  });
  return listing;
}

}  // namespace

AsmListing parse_asm_listing(std::istream& in) {
  return parse_asm_content(read_all(in));
}

AsmListing parse_asm_listing(const std::filesystem::path& path) {
  return parse_asm_content(read_all(path));
}

std::vector<std::string> tokenize_asm_text(const std::string& text) {
  const std::size_t cut = comment_cut(text);
  std::vector<std::string> tokens;
  for (const auto& [start, len] : token_spans(text, cut)) {
    tokens.push_back(text.substr(start, len));
  }
  return tokens;
}

std::string extract_opcode(const std::vector<std::string>& tokens) {
  for (const auto& t : tokens) {
    if (is_byte_pair(t)) continue;  // leading machine-code byte columns
    return is_lower_alpha(t) ? t : std::string();
  }
  return {};
}

std::string operand_text(const std::string& text, const std::string& opcode) {
  if (opcode.empty()) return {};
  const std::size_t cut = comment_cut(text);
  for (const auto& [start, len] : token_spans(text, cut)) {
    if (text.compare(start, len, opcode) == 0) {
      return trim(text.substr(start + len, cut - (start + len)));
    }
  }
  return {};
}

}  // namespace malfuse
