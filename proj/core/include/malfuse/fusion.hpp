#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "malfuse/feature_block.hpp"

namespace malfuse {

// Fixed order in which categories appear in a fused matrix, regardless of
// insertion order.
const std::vector<std::string>& canonical_categories();

// Position of a category in canonical_categories(); throws ValidationError
// for names outside the canonical set.
std::size_t canonical_rank(const std::string& category);

struct CategorySpan {
  std::string category;
  std::vector<std::string> names;  // unprefixed feature names
  std::size_t offset = 0;          // first column of this category

  std::size_t dim() const { return names.size(); }
};

// Ordered layout of feature columns: which categories are present, their
// per-feature names and their column offsets.
class FeatureRegistry {
 public:
  // Appends a category; spans are kept in canonical order and offsets
  // recomputed.  Duplicate categories are rejected.
  void add(const std::string& category, std::vector<std::string> names);

  std::size_t dim() const;
  const std::vector<CategorySpan>& spans() const { return spans_; }
  bool has(const std::string& category) const;
  const CategorySpan& span(const std::string& category) const;
  std::vector<std::string> categories() const;
  // Category-prefixed column names ("BYTE_1G.byte_3f"), in column order.
  std::vector<std::string> prefixed_names() const;

  bool operator==(const FeatureRegistry& other) const;

 private:
  std::vector<CategorySpan> spans_;
};

// Row-major matrix of fused features plus sample ids and labels (-1 for
// unlabeled rows).
class FeatureMatrix {
 public:
  FeatureMatrix() = default;
  FeatureMatrix(FeatureRegistry registry, std::vector<std::string> ids,
                std::vector<int> labels);

  std::size_t rows() const { return ids_.size(); }
  std::size_t dim() const { return registry_.dim(); }
  const FeatureRegistry& registry() const { return registry_; }
  const std::vector<std::string>& ids() const { return ids_; }
  const std::vector<int>& labels() const { return labels_; }

  double at(std::size_t r, std::size_t c) const { return data_[r * dim() + c]; }
  void set(std::size_t r, std::size_t c, double v) { data_[r * dim() + c] = v; }
  const double* row(std::size_t r) const { return &data_[r * dim()]; }
  double* row(std::size_t r) { return &data_[r * dim()]; }
  const std::vector<double>& data() const { return data_; }

  // Fingerprint of the configuration that produced the matrix; carried
  // through save/load so downstream artifacts can detect mismatches.
  std::uint64_t config_hash() const { return config_hash_; }
  void set_config_hash(std::uint64_t h) { config_hash_ = h; }

  // Writes one sample's block into its category columns.  The block must
  // match the registry's names for that category.
  void set_block(std::size_t row, const FeatureBlock& block);

  // Adds a new category with the given per-row values (one vector per row),
  // rebuilding the layout so columns stay in canonical order.
  void insert_category(const std::string& category,
                       std::vector<std::string> names,
                       const std::vector<std::vector<double>>& rows);

  // Projection onto a non-empty subset of present categories (canonical
  // order preserved).
  FeatureMatrix select_categories(const std::vector<std::string>& cats) const;

  // Projection onto explicit column indices.  Columns keep their original
  // category and name; the result is re-laid out in canonical order and
  // categories that lose every column are dropped.  Duplicate or
  // out-of-range indices are rejected.
  FeatureMatrix select_columns(const std::vector<std::size_t>& cols) const;

  FeatureMatrix subset_rows(const std::vector<std::size_t>& row_idx) const;

  // Binary container with checksum; round-trips bit-exactly.
  void save(const std::filesystem::path& path) const;
  static FeatureMatrix load(const std::filesystem::path& path);

  // CSV export: header `id,label,<prefixed feature names...>`.
  void write_csv(const std::filesystem::path& path) const;

 private:
  FeatureRegistry registry_;
  std::vector<std::string> ids_;
  std::vector<int> labels_;
  std::vector<double> data_;
  std::uint64_t config_hash_ = 0;
};

// FNV-1a 64-bit hash; used for matrix checksums and config fingerprints.
std::uint64_t fnv1a64(const void* data, std::size_t len,
                      std::uint64_t seed = 14695981039346656037ull);
std::uint64_t fnv1a64(const std::string& s);

}  // namespace malfuse
