#include "malfuse/vocab.hpp"

#include <fstream>

#include "malfuse/errors.hpp"

namespace malfuse {

namespace detail {
// Defined in vocab_data.cpp.
extern const char* const kDefaultOpcodes[];
extern const std::size_t kDefaultOpcodeCount;
extern const char* const kDefaultApis[];
extern const std::size_t kDefaultApiCount;
extern const char* const kDefaultKeywords[];
extern const std::size_t kDefaultKeywordCount;
}  // namespace detail

Vocab::Vocab(std::string category, std::vector<std::string> terms)
    : category_(std::move(category)), terms_(std::move(terms)) {
  index_.reserve(terms_.size());
  for (std::size_t i = 0; i < terms_.size(); ++i) {
    if (!index_.emplace(terms_[i], i).second) {
      throw ValidationError("duplicate vocabulary term '" + terms_[i] + "'");
    }
  }
}

bool Vocab::contains(const std::string& term) const {
  return index_.count(term) != 0;
}

std::optional<std::size_t> Vocab::index_of(const std::string& term) const {
  const auto it = index_.find(term);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

Vocab load_vocab(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open vocabulary file: " + path.string());

  std::string category;
  std::vector<std::string> terms;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line[0] == '#') {
      constexpr const char* kHeader = "#category:";
      if (line.rfind(kHeader, 0) == 0) {
        std::string value = line.substr(std::string(kHeader).size());
        const auto b = value.find_first_not_of(" \t");
        const auto e = value.find_last_not_of(" \t");
        if (b == std::string::npos) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": empty category header");
        }
        if (!category.empty()) {
          throw ParseError(path.string() + ":" + std::to_string(line_no) +
                           ": duplicate category header");
        }
        category = value.substr(b, e - b + 1);
      }
      continue;  // other comments are ignored
    }
    if (category.empty()) {
      throw ParseError(path.string() + ":" + std::to_string(line_no) +
                       ": term before '#category:' header");
    }
    terms.push_back(line);
  }
  if (category.empty()) {
    throw ParseError(path.string() + ": missing '#category:' header");
  }
  try {
    return Vocab(category, std::move(terms));
  } catch (const ValidationError& e) {
    throw ParseError(path.string() + ": " + e.what());
  }
}

namespace {

Vocab make_default(const char* category, const char* const* terms,
                   std::size_t count) {
  std::vector<std::string> v(terms, terms + count);
  return Vocab(category, std::move(v));
}

}  // namespace

const Vocab& default_opcode_vocab() {
  static const Vocab vocab = make_default("ASM_OPC", detail::kDefaultOpcodes,
                                          detail::kDefaultOpcodeCount);
  return vocab;
}

const Vocab& default_api_vocab() {
  static const Vocab vocab =
      make_default("ASM_API", detail::kDefaultApis, detail::kDefaultApiCount);
  return vocab;
}

const Vocab& default_keyword_vocab() {
  static const Vocab vocab = make_default(
      "ASM_MISC", detail::kDefaultKeywords, detail::kDefaultKeywordCount);
  return vocab;
}

}  // namespace malfuse
