#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace malfuse {

// An ordered list of terms with O(1) lookup.  Term order defines feature
// order, so it is part of a model's identity.
class Vocab {
 public:
  Vocab() = default;
  Vocab(std::string category, std::vector<std::string> terms);

  const std::string& category() const { return category_; }
  const std::vector<std::string>& terms() const { return terms_; }
  std::size_t size() const { return terms_.size(); }
  bool contains(const std::string& term) const;
  std::optional<std::size_t> index_of(const std::string& term) const;

 private:
  std::string category_;
  std::vector<std::string> terms_;
  std::unordered_map<std::string, std::size_t> index_;
};

// Loads a vocabulary file: one term per line, '#'-prefixed comment lines, and
// a required `#category: NAME` header before the first term.  Duplicate terms
// are rejected.
Vocab load_vocab(const std::filesystem::path& path);

// Built-in defaults, mirrored by the files under data/vocab/.
const Vocab& default_opcode_vocab();   // ASM_OPC, 93 mnemonics
const Vocab& default_api_vocab();      // ASM_API, 794 API names
const Vocab& default_keyword_vocab();  // ASM_MISC, 95 substrings

}  // namespace malfuse
