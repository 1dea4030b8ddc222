#pragma once

#include <string>
#include <vector>

#include "malfuse/corpus.hpp"
#include "malfuse/feature_block.hpp"
#include "malfuse/vocab.hpp"

namespace malfuse {

// ASM_MD: [file_size, num_lines].
FeatureBlock asm_metadata(const AsmListing& listing);

// ASM_OPC: per-mnemonic line counts.  Each line contributes its extracted
// mnemonic once; lines without one are skipped.
FeatureBlock asm_opcode_counts(const AsmListing& listing,
                               const Vocab& vocab = default_opcode_vocab());

// ASM_REG: counts of the 38 x86/x64 register names across operand tokens
// (case-insensitive, after stripping trailing commas, surrounding brackets
// and segment prefixes).  Compound expressions like [eax+4] do not count.
FeatureBlock asm_register_counts(const AsmListing& listing);

// ASM_SYM: counts of the symbols - + * ] [ ? @ over each line's body
// (comments included; "??" placeholder bytes count toward '?').
FeatureBlock asm_symbol_counts(const AsmListing& listing);

// ASM_API: counts of known API names across tokens (case-sensitive, after
// stripping trailing commas, surrounding brackets, segment prefixes and a
// leading __imp_).
FeatureBlock asm_api_counts(const AsmListing& listing,
                            const Vocab& vocab = default_api_vocab());

// ASM_DD: 24 statistics over data-definition lines (db/dd/dw/dc): per-opcode
// line proportions, zero/non-zero operand breakdowns for db, and operand
// count buckets for dd, per section.
FeatureBlock asm_data_define(const AsmListing& listing);

// ASM_SEC: 24 section statistics: line counts and proportions for the nine
// standard PE sections plus distinct/known/unknown roll-ups.
FeatureBlock asm_sections(const AsmListing& listing);

// ASM_MISC: case-insensitive overlapping substring counts of the keyword
// vocabulary over each line's body.
FeatureBlock asm_keywords(const AsmListing& listing,
                          const Vocab& vocab = default_keyword_vocab());

// Strips a token down to the operand it denotes: trailing commas, one pair of
// surrounding brackets, a segment prefix (cs:/ds:/es:/fs:/gs:/ss:) and a
// leading __imp_ are removed.  Used for register and API matching.
std::string normalize_operand_token(const std::string& token);

// Mnemonic id stream for sequence models: one id per line with a mnemonic,
// equal to its vocabulary index, or vocab.size() for unknown mnemonics.
std::vector<int> opcode_id_sequence(const AsmListing& listing,
                                    const Vocab& vocab = default_opcode_vocab());

}  // namespace malfuse
