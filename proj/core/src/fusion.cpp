#include "malfuse/fusion.hpp"

#include <algorithm>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "malfuse/errors.hpp"

namespace malfuse {
namespace {

constexpr char kMagic[4] = {'M', 'F', 'F', 'M'};
constexpr std::uint32_t kVersion = 1;

void write_bytes(std::ostream& out, const void* p, std::size_t n) {
  out.write(static_cast<const char*>(p), static_cast<std::streamsize>(n));
}

template <typename T>
void write_pod(std::ostream& out, T v) {
  write_bytes(out, &v, sizeof(v));
}

void write_string(std::ostream& out, const std::string& s) {
  write_pod<std::uint32_t>(out, static_cast<std::uint32_t>(s.size()));
  write_bytes(out, s.data(), s.size());
}

void read_bytes(std::istream& in, void* p, std::size_t n,
                const std::string& what) {
  in.read(static_cast<char*>(p), static_cast<std::streamsize>(n));
  if (static_cast<std::size_t>(in.gcount()) != n) {
    throw ParseError("feature matrix: truncated while reading " + what);
  }
}

template <typename T>
T read_pod(std::istream& in, const std::string& what) {
  T v{};
  read_bytes(in, &v, sizeof(v), what);
  return v;
}

std::string read_string(std::istream& in, const std::string& what) {
  const auto len = read_pod<std::uint32_t>(in, what + " length");
  if (len > (1u << 20)) {
    throw ParseError("feature matrix: implausible string length in " + what);
  }
  std::string s(len, '\0');
  if (len > 0) read_bytes(in, s.data(), len, what);
  return s;
}

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t len, std::uint64_t seed) {
  const auto* p = static_cast<const unsigned char*>(data);
  std::uint64_t h = seed;
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 1099511628211ull;
  }
  return h;
}

std::uint64_t fnv1a64(const std::string& s) {
  return fnv1a64(s.data(), s.size());
}

const std::vector<std::string>& canonical_categories() {
  static const std::vector<std::string> kOrder = {
      "BYTE_MD",       "BYTE_1G",       "BYTE_ENT",     "BYTE_HARALICK",
      "BYTE_LBP",      "BYTE_IMG_CNN",  "BYTE_ENT_CNN", "BYTE_NGRAMS_CNN",
      "ASM_MD",        "ASM_OPC",       "ASM_PIXEL",    "ASM_REG",
      "ASM_SYM",       "ASM_API",       "ASM_DD",       "ASM_SEC",
      "ASM_MISC",      "ASM_NGRAMS_CNN",
  };
  return kOrder;
}

std::size_t canonical_rank(const std::string& category) {
  const auto& order = canonical_categories();
  const auto it = std::find(order.begin(), order.end(), category);
  if (it == order.end()) {
    throw ValidationError("unknown feature category: " + category);
  }
  return static_cast<std::size_t>(it - order.begin());
}

void FeatureRegistry::add(const std::string& category,
                          std::vector<std::string> names) {
  const std::size_t rank = canonical_rank(category);
  if (names.empty()) {
    throw ValidationError("category " + category + " has no feature names");
  }
  if (has(category)) {
    throw ValidationError("duplicate feature category: " + category);
  }
  CategorySpan span;
  span.category = category;
  span.names = std::move(names);
  auto pos = spans_.begin();
  while (pos != spans_.end() && canonical_rank(pos->category) < rank) ++pos;
  spans_.insert(pos, std::move(span));
  std::size_t offset = 0;
  for (auto& s : spans_) {
    s.offset = offset;
    offset += s.names.size();
  }
}

std::size_t FeatureRegistry::dim() const {
  std::size_t d = 0;
  for (const auto& s : spans_) d += s.names.size();
  return d;
}

bool FeatureRegistry::has(const std::string& category) const {
  for (const auto& s : spans_) {
    if (s.category == category) return true;
  }
  return false;
}

const CategorySpan& FeatureRegistry::span(const std::string& category) const {
  for (const auto& s : spans_) {
    if (s.category == category) return s;
  }
  throw ValidationError("category not present in registry: " + category);
}

std::vector<std::string> FeatureRegistry::categories() const {
  std::vector<std::string> out;
  out.reserve(spans_.size());
  for (const auto& s : spans_) out.push_back(s.category);
  return out;
}

std::vector<std::string> FeatureRegistry::prefixed_names() const {
  std::vector<std::string> out;
  out.reserve(dim());
  for (const auto& s : spans_) {
    for (const auto& n : s.names) out.push_back(s.category + "." + n);
  }
  return out;
}

bool FeatureRegistry::operator==(const FeatureRegistry& other) const {
  if (spans_.size() != other.spans_.size()) return false;
  for (std::size_t i = 0; i < spans_.size(); ++i) {
    if (spans_[i].category != other.spans_[i].category) return false;
    if (spans_[i].names != other.spans_[i].names) return false;
    if (spans_[i].offset != other.spans_[i].offset) return false;
  }
  return true;
}

FeatureMatrix::FeatureMatrix(FeatureRegistry registry,
                             std::vector<std::string> ids,
                             std::vector<int> labels)
    : registry_(std::move(registry)),
      ids_(std::move(ids)),
      labels_(std::move(labels)) {
  if (labels_.size() != ids_.size()) {
    throw ValidationError("feature matrix: ids and labels differ in length");
  }
  for (int lab : labels_) {
    if (lab < -1) {
      throw ValidationError("feature matrix: labels must be >= -1");
    }
  }
  data_.assign(ids_.size() * registry_.dim(), 0.0);
}

void FeatureMatrix::set_block(std::size_t r, const FeatureBlock& block) {
  if (r >= rows()) {
    throw ValidationError("feature matrix: row index out of range");
  }
  const CategorySpan& span = registry_.span(block.category);
  if (block.names != span.names) {
    throw ValidationError("feature block " + block.category +
                          " does not match the registry layout");
  }
  if (block.values.size() != span.names.size()) {
    throw ValidationError("feature block " + block.category +
                          " has mismatched value count");
  }
  std::copy(block.values.begin(), block.values.end(), row(r) + span.offset);
}

void FeatureMatrix::insert_category(
    const std::string& category, std::vector<std::string> names,
    const std::vector<std::vector<double>>& values) {
  if (values.size() != rows()) {
    throw ValidationError("insert_category: need one value row per sample");
  }
  for (const auto& v : values) {
    if (v.size() != names.size()) {
      throw ValidationError("insert_category: value row width mismatch");
    }
  }
  FeatureRegistry merged = registry_;
  merged.add(category, std::move(names));

  std::vector<double> next(rows() * merged.dim(), 0.0);
  for (std::size_t r = 0; r < rows(); ++r) {
    for (const auto& span : merged.spans()) {
      double* dst = &next[r * merged.dim() + span.offset];
      if (span.category == category) {
        std::copy(values[r].begin(), values[r].end(), dst);
      } else {
        const CategorySpan& src = registry_.span(span.category);
        std::copy(row(r) + src.offset,
                  row(r) + src.offset + src.dim(), dst);
      }
    }
  }
  registry_ = std::move(merged);
  data_ = std::move(next);
}

FeatureMatrix FeatureMatrix::select_categories(
    const std::vector<std::string>& cats) const {
  if (cats.empty()) {
    throw ValidationError("select_categories: empty category list");
  }
  std::unordered_set<std::string> seen;
  FeatureRegistry sub;
  for (const auto& c : cats) {
    if (!seen.insert(c).second) {
      throw ValidationError("select_categories: duplicate category " + c);
    }
    sub.add(c, registry_.span(c).names);
  }
  FeatureMatrix out(sub, ids_, labels_);
  out.config_hash_ = config_hash_;
  for (std::size_t r = 0; r < rows(); ++r) {
    for (const auto& span : sub.spans()) {
      const CategorySpan& src = registry_.span(span.category);
      std::copy(row(r) + src.offset, row(r) + src.offset + src.dim(),
                out.row(r) + span.offset);
    }
  }
  return out;
}

FeatureMatrix FeatureMatrix::select_columns(
    const std::vector<std::size_t>& cols) const {
  if (cols.empty()) {
    throw ValidationError("select_columns: empty column list");
  }
  std::vector<bool> keep(dim(), false);
  for (std::size_t c : cols) {
    if (c >= dim()) {
      throw ValidationError("select_columns: column index out of range");
    }
    if (keep[c]) {
      throw ValidationError("select_columns: duplicate column index");
    }
    keep[c] = true;
  }
  FeatureRegistry sub;
  std::vector<std::size_t> src_cols;  // source column per output column
  for (const auto& span : registry_.spans()) {
    std::vector<std::string> names;
    for (std::size_t j = 0; j < span.dim(); ++j) {
      if (keep[span.offset + j]) {
        names.push_back(span.names[j]);
        src_cols.push_back(span.offset + j);
      }
    }
    if (!names.empty()) sub.add(span.category, std::move(names));
  }
  FeatureMatrix out(sub, ids_, labels_);
  out.config_hash_ = config_hash_;
  for (std::size_t r = 0; r < rows(); ++r) {
    for (std::size_t j = 0; j < src_cols.size(); ++j) {
      out.set(r, j, at(r, src_cols[j]));
    }
  }
  return out;
}

FeatureMatrix FeatureMatrix::subset_rows(
    const std::vector<std::size_t>& row_idx) const {
  std::vector<std::string> ids;
  std::vector<int> labels;
  ids.reserve(row_idx.size());
  labels.reserve(row_idx.size());
  for (std::size_t r : row_idx) {
    if (r >= rows()) {
      throw ValidationError("subset_rows: row index out of range");
    }
    ids.push_back(ids_[r]);
    labels.push_back(labels_[r]);
  }
  FeatureMatrix out(registry_, std::move(ids), std::move(labels));
  out.config_hash_ = config_hash_;
  for (std::size_t i = 0; i < row_idx.size(); ++i) {
    std::copy(row(row_idx[i]), row(row_idx[i]) + dim(),
              out.row(i));
  }
  return out;
}

void FeatureMatrix::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  write_bytes(out, kMagic, sizeof(kMagic));
  write_pod<std::uint32_t>(out, kVersion);
  write_pod<std::uint64_t>(out, config_hash_);
  write_pod<std::uint32_t>(out,
                           static_cast<std::uint32_t>(registry_.spans().size()));
  for (const auto& span : registry_.spans()) {
    write_string(out, span.category);
    write_pod<std::uint64_t>(out, span.names.size());
    for (const auto& n : span.names) write_string(out, n);
  }
  write_pod<std::uint64_t>(out, rows());
  for (const auto& id : ids_) write_string(out, id);
  for (int lab : labels_) write_pod<std::int32_t>(out, lab);
  write_bytes(out, data_.data(), data_.size() * sizeof(double));

  std::uint64_t checksum = fnv1a64(data_.data(), data_.size() * sizeof(double));
  for (const auto& id : ids_) checksum = fnv1a64(id.data(), id.size(), checksum);
  checksum = fnv1a64(labels_.data(), labels_.size() * sizeof(int), checksum);
  write_pod<std::uint64_t>(out, checksum);
  if (!out) throw IoError("write failed: " + path.string());
}

FeatureMatrix FeatureMatrix::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path.string());
  char magic[4];
  read_bytes(in, magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw ParseError("feature matrix: bad magic in " + path.string());
  }
  const auto version = read_pod<std::uint32_t>(in, "version");
  if (version != kVersion) {
    throw ParseError("feature matrix: unsupported version " +
                     std::to_string(version));
  }
  const auto config_hash = read_pod<std::uint64_t>(in, "config hash");
  const auto n_cats = read_pod<std::uint32_t>(in, "category count");
  FeatureRegistry registry;
  for (std::uint32_t i = 0; i < n_cats; ++i) {
    std::string category = read_string(in, "category name");
    const auto n_names = read_pod<std::uint64_t>(in, "name count");
    std::vector<std::string> names;
    names.reserve(n_names);
    for (std::uint64_t j = 0; j < n_names; ++j) {
      names.push_back(read_string(in, "feature name"));
    }
    registry.add(category, std::move(names));
  }
  const auto n_rows = read_pod<std::uint64_t>(in, "row count");
  std::vector<std::string> ids;
  ids.reserve(n_rows);
  for (std::uint64_t i = 0; i < n_rows; ++i) {
    ids.push_back(read_string(in, "sample id"));
  }
  std::vector<int> labels(n_rows);
  for (auto& lab : labels) lab = read_pod<std::int32_t>(in, "label");

  FeatureMatrix out(std::move(registry), std::move(ids), std::move(labels));
  out.config_hash_ = config_hash;
  read_bytes(in, out.data_.data(), out.data_.size() * sizeof(double), "data");

  const auto stored = read_pod<std::uint64_t>(in, "checksum");
  std::uint64_t checksum =
      fnv1a64(out.data_.data(), out.data_.size() * sizeof(double));
  for (const auto& id : out.ids_) {
    checksum = fnv1a64(id.data(), id.size(), checksum);
  }
  checksum =
      fnv1a64(out.labels_.data(), out.labels_.size() * sizeof(int), checksum);
  if (stored != checksum) {
    throw ParseError("feature matrix: checksum mismatch in " + path.string());
  }
  return out;
}

void FeatureMatrix::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "id,label";
  for (const auto& name : registry_.prefixed_names()) out << ',' << name;
  out << '\n';
  char buf[40];
  for (std::size_t r = 0; r < rows(); ++r) {
    out << ids_[r] << ',' << labels_[r];
    for (std::size_t c = 0; c < dim(); ++c) {
      std::snprintf(buf, sizeof(buf), "%.17g", at(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace malfuse
