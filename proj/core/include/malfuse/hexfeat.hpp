#pragma once

#include <cstdint>
#include <vector>

#include "malfuse/corpus.hpp"
#include "malfuse/feature_block.hpp"

namespace malfuse {

// BYTE_MD: [file_size, start_address].
FeatureBlock byte_metadata(const HexDump& dump);

// BYTE_1G: 256 byte-value counts over defined bytes ("??" excluded), named
// byte_00 .. byte_ff.
FeatureBlock byte_unigrams(const HexDump& dump);

struct EntropyParams {
  std::size_t chunk_size = 256;  // bytes per entropy window, must be >= 2
};

// Shannon entropy in bits of one byte window; always in [0, 8].
double shannon_entropy(const std::uint8_t* data, std::size_t n);

// Structural entropy stream: the defined bytes are cut into consecutive
// non-overlapping chunks of `chunk_size`; each chunk contributes one entropy
// value.  A final partial chunk is kept only when it has at least 2 bytes
// (a single byte always gives entropy 0 and would only add noise), so fewer
// than 2 defined bytes yield an empty stream.
std::vector<double> entropy_stream(const std::vector<std::uint8_t>& bytes,
                                   const EntropyParams& params = {});
std::vector<double> entropy_stream(const HexDump& dump,
                                   const EntropyParams& params = {});

// BYTE_ENT: 14 summary statistics of the entropy stream, in order: mean,
// variance (population), median, max, min, p10 .. p90.  Percentiles use
// linear interpolation at rank (p/100)*(n-1).  An empty stream yields all
// zeros.
FeatureBlock entropy_stats(const std::vector<double>& stream);
FeatureBlock byte_entropy(const HexDump& dump,
                          const EntropyParams& params = {});

}  // namespace malfuse
