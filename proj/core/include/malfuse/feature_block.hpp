#pragma once

#include <cstddef>
#include <string>
#include <vector>

namespace malfuse {

// One named group of features for one sample.  Extractors return blocks; the
// fusion layer lines them up into a matrix.  `names` and `values` always have
// the same length, and `names[i]` is unprefixed (the category gets prepended
// when blocks are fused, e.g. "BYTE_1G.byte_3f").
struct FeatureBlock {
  std::string category;
  std::vector<std::string> names;
  std::vector<double> values;

  std::size_t dim() const { return values.size(); }
};

}  // namespace malfuse
