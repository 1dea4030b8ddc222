#include "malfuse/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>
#include <sstream>
#include <thread>
#include <unordered_map>
#include <utility>

#include <nlohmann/json.hpp>

#include "malfuse/asmfeat.hpp"
#include "malfuse/corpus.hpp"
#include "malfuse/deepfeat.hpp"
#include "malfuse/errors.hpp"
#include "malfuse/fusion.hpp"
#include "malfuse/hexfeat.hpp"
#include "malfuse/imaging.hpp"
#include "malfuse/vocab.hpp"

namespace malfuse {
namespace {

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

std::string fmt_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::string fmt_hash(std::uint64_t h) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string join(const std::vector<std::string>& items, const char* sep) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += sep;
    out += items[i];
  }
  return out;
}

std::string trim(const std::string& s) {
  std::size_t b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  std::size_t e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& key,
                                    const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream in(value);
  while (std::getline(in, item, ',')) {
    item = trim(item);
    if (item.empty()) {
      throw ValidationError("config key '" + key + "': empty list item");
    }
    out.push_back(item);
  }
  if (out.empty()) {
    throw ValidationError("config key '" + key + "': empty list");
  }
  return out;
}

long long parse_ll(const std::string& key, const std::string& value) {
  long long v = 0;
  const char* b = value.data();
  const char* e = b + value.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw ValidationError("config key '" + key + "': expected an integer, got '" +
                          value + "'");
  }
  return v;
}

int parse_int(const std::string& key, const std::string& value) {
  return static_cast<int>(parse_ll(key, value));
}

std::uint64_t parse_u64(const std::string& key, const std::string& value) {
  std::uint64_t v = 0;
  const char* b = value.data();
  const char* e = b + value.size();
  auto [p, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || p != e) {
    throw ValidationError("config key '" + key +
                          "': expected a non-negative integer, got '" + value +
                          "'");
  }
  return v;
}

std::size_t parse_size(const std::string& key, const std::string& value) {
  return static_cast<std::size_t>(parse_u64(key, value));
}

double parse_fp(const std::string& key, const std::string& value) {
  try {
    std::size_t idx = 0;
    double v = std::stod(value, &idx);
    if (idx != value.size()) throw std::invalid_argument("trailing characters");
    return v;
  } catch (const std::exception&) {
    throw ValidationError("config key '" + key + "': expected a number, got '" +
                          value + "'");
  }
}

std::vector<std::size_t> parse_size_list(const std::string& key,
                                         const std::string& value) {
  std::vector<std::size_t> out;
  for (const auto& item : split_list(key, value)) {
    out.push_back(parse_size(key, item));
  }
  return out;
}

void require(bool ok, const std::string& msg) {
  if (!ok) throw ValidationError(msg);
}

bool is_hex_category(const std::string& cat) {
  return cat.rfind("BYTE_", 0) == 0;
}

std::string lower_stem(const std::string& category) {
  std::string out;
  for (char c : category) {
    out += (c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c;
  }
  return out;
}

void ensure_parent_dir(const fs::path& p) {
  const fs::path dir = p.parent_path();
  if (!dir.empty()) fs::create_directories(dir);
}

void write_json_file(const json& j, const fs::path& path) {
  ensure_parent_dir(path);
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << j.dump(2) << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

// Loads the feature store, selects `cats` (all of them when empty) and
// reports missing categories with the command that would add them.
FeatureMatrix load_store_categories(const PipelineConfig& cfg,
                                    std::vector<std::string>& cats) {
  FeatureMatrix store = FeatureMatrix::load(cfg.store);
  if (cats.empty()) cats = store.registry().categories();
  std::vector<std::string> hints;
  const auto& deep = deep_categories();
  for (const auto& c : cats) {
    if (store.registry().has(c)) continue;
    const bool is_deep = std::find(deep.begin(), deep.end(), c) != deep.end();
    hints.push_back(is_deep ? "run `malfuse train-cnn --arch " + c +
                                  "` to add " + c
                            : "add " + c +
                                  " to extract.categories and rerun `malfuse "
                                  "extract`");
  }
  if (!hints.empty()) {
    throw ValidationError("feature store " + cfg.store.string() +
                          " is missing requested categories: " +
                          join(hints, "; "));
  }
  return store.select_categories(cats);
}

FeatureMatrix labeled_rows(const FeatureMatrix& m) {
  std::vector<std::size_t> idx;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.labels()[r] >= 0) idx.push_back(r);
  }
  if (idx.empty()) {
    throw ValidationError("feature store has no labeled rows");
  }
  return m.subset_rows(idx);
}

TrainPredictFn gbt_trainer(const PipelineConfig& cfg) {
  return [&cfg](const FeatureMatrix& train, const FeatureMatrix& eval) {
    return train_gbt(train, cfg.num_classes, cfg.gbt).predict_proba(eval);
  };
}

void check_tag(const std::string& tag) {
  require(!tag.empty(), "output tag must not be empty");
  for (char c : tag) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') ||
                    (c >= '0' && c <= '9') || c == '-' || c == '_';
    require(ok, "output tag '" + tag +
                    "' may only contain letters, digits, '-' and '_'");
  }
}

}  // namespace

// ---------------------------------------------------------------------------
// Category bundles
// ---------------------------------------------------------------------------

const std::vector<std::string>& hand_crafted_categories() {
  static const std::vector<std::string> cats = {
      "BYTE_MD",  "BYTE_1G",  "BYTE_ENT", "BYTE_HARALICK", "BYTE_LBP",
      "ASM_MD",   "ASM_OPC",  "ASM_PIXEL", "ASM_REG",      "ASM_SYM",
      "ASM_API",  "ASM_DD",   "ASM_SEC",  "ASM_MISC"};
  return cats;
}

const std::vector<std::string>& deep_categories() {
  static const std::vector<std::string> cats = {
      "BYTE_IMG_CNN", "BYTE_ENT_CNN", "BYTE_NGRAMS_CNN", "ASM_NGRAMS_CNN"};
  return cats;
}

const std::vector<std::string>& preset_names() {
  static const std::vector<std::string> names = {
      "hex-hand-crafted", "hex-all", "asm-hand-crafted", "asm-all",
      "hand-crafted",     "deep",    "all",              "final"};
  return names;
}

std::vector<std::string> preset_categories(const std::string& name) {
  static const std::vector<std::string> hex_hand = {
      "BYTE_MD", "BYTE_1G", "BYTE_ENT", "BYTE_HARALICK", "BYTE_LBP"};
  static const std::vector<std::string> asm_hand = {
      "ASM_MD",  "ASM_OPC", "ASM_PIXEL", "ASM_REG", "ASM_SYM",
      "ASM_API", "ASM_DD",  "ASM_SEC",   "ASM_MISC"};

  auto plus = [](std::vector<std::string> base,
                 const std::vector<std::string>& extra) {
    base.insert(base.end(), extra.begin(), extra.end());
    return base;
  };

  if (name == "hex-hand-crafted") return hex_hand;
  if (name == "hex-all")
    return plus(hex_hand, {"BYTE_IMG_CNN", "BYTE_ENT_CNN", "BYTE_NGRAMS_CNN"});
  if (name == "asm-hand-crafted") return asm_hand;
  if (name == "asm-all") return plus(asm_hand, {"ASM_NGRAMS_CNN"});
  if (name == "hand-crafted") return plus(hex_hand, asm_hand);
  if (name == "deep") return deep_categories();
  if (name == "all") return plus(hand_crafted_categories(), deep_categories());
  if (name == "final")
    return plus(plus(asm_hand, {"ASM_NGRAMS_CNN"}),
                {"BYTE_MD", "BYTE_1G", "BYTE_NGRAMS_CNN"});
  throw ValidationError("unknown preset '" + name + "'; expected one of: " +
                        join(preset_names(), ", "));
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

void PipelineConfig::set(const std::string& key, const std::string& value) {
  // [paths]
  if (key == "paths.manifest") { manifest = value; return; }
  if (key == "paths.store") { store = value; return; }
  if (key == "paths.model_dir") { model_dir = value; return; }
  // [data]
  if (key == "data.num_classes") { num_classes = parse_int(key, value); return; }
  // [extract]
  if (key == "extract.categories") {
    extract_categories = split_list(key, value);
    return;
  }
  if (key == "extract.workers") { extract_workers = parse_int(key, value); return; }
  if (key == "extract.entropy_chunk") { entropy_chunk = parse_size(key, value); return; }
  if (key == "extract.asm_pixel_count") { asm_pixel_count = parse_size(key, value); return; }
  if (key == "extract.haralick_levels") { haralick_levels = parse_int(key, value); return; }
  // [cnn]
  if (key == "cnn.epochs") { cnn_epochs = parse_int(key, value); return; }
  if (key == "cnn.batch_size") { cnn_batch = parse_int(key, value); return; }
  if (key == "cnn.lr") { cnn_lr = parse_fp(key, value); return; }
  if (key == "cnn.patience") { cnn_patience = parse_int(key, value); return; }
  if (key == "cnn.val_fraction") { cnn_val_fraction = parse_fp(key, value); return; }
  if (key == "cnn.folds") { cnn_folds = parse_int(key, value); return; }
  if (key == "cnn.seed") { cnn_seed = parse_u64(key, value); return; }
  if (key == "cnn.entropy_len") { entropy_len = parse_size(key, value); return; }
  if (key == "cnn.byte_seq_cap") { byte_seq_cap = parse_size(key, value); return; }
  if (key == "cnn.opcode_seq_cap") { opcode_seq_cap = parse_size(key, value); return; }
  // [gbt]
  if (key == "gbt.eta") { gbt.eta = parse_fp(key, value); return; }
  if (key == "gbt.max_depth") { gbt.max_depth = parse_int(key, value); return; }
  if (key == "gbt.gamma") { gbt.gamma = parse_fp(key, value); return; }
  if (key == "gbt.min_child_weight") { gbt.min_child_weight = parse_fp(key, value); return; }
  if (key == "gbt.colsample_bytree") { gbt.colsample_bytree = parse_fp(key, value); return; }
  if (key == "gbt.subsample") { gbt.subsample = parse_fp(key, value); return; }
  if (key == "gbt.num_rounds") { gbt.num_rounds = parse_int(key, value); return; }
  if (key == "gbt.l2_lambda") { gbt.l2_lambda = parse_fp(key, value); return; }
  if (key == "gbt.seed") { gbt.seed = parse_u64(key, value); return; }
  if (key == "gbt.early_stop_patience") { gbt.early_stop_patience = parse_int(key, value); return; }
  // [eval]
  if (key == "eval.folds") { eval_folds = parse_int(key, value); return; }
  if (key == "eval.seed") { eval_seed = parse_u64(key, value); return; }
  // [select]
  if (key == "select.bins") { select_bins = parse_int(key, value); return; }
  if (key == "select.k_grid") { k_grid = parse_size_list(key, value); return; }
  // [stepwise]
  if (key == "stepwise.folds") { stepwise_folds = parse_int(key, value); return; }
  if (key == "stepwise.seed") { stepwise_seed = parse_u64(key, value); return; }
  throw ValidationError("unknown config key '" + key + "'");
}

PipelineConfig PipelineConfig::load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path.string());

  PipelineConfig cfg;
  std::string line;
  std::string section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string text = trim(line);
    if (text.empty() || text[0] == '#' || text[0] == ';') continue;
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (text.front() == '[') {
      if (text.back() != ']' || text.size() < 3) {
        throw ParseError(where + ": malformed section header '" + text + "'");
      }
      section = trim(text.substr(1, text.size() - 2));
      continue;
    }
    const std::size_t eq = text.find('=');
    if (eq == std::string::npos) {
      throw ParseError(where + ": expected 'key = value', got '" + text + "'");
    }
    if (section.empty()) {
      throw ParseError(where + ": key outside any [section]");
    }
    const std::string key = trim(text.substr(0, eq));
    const std::string value = trim(text.substr(eq + 1));
    if (key.empty()) throw ParseError(where + ": empty key");
    try {
      cfg.set(section + "." + key, value);
    } catch (const ValidationError& e) {
      throw ValidationError(where + ": " + e.what());
    }
  }

  // Paths in the file are relative to the file, so a config travels with its
  // corpus directory.
  const fs::path base = path.has_parent_path() ? path.parent_path() : fs::path(".");
  auto anchor = [&](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  anchor(cfg.manifest);
  anchor(cfg.store);
  anchor(cfg.model_dir);
  return cfg;
}

void PipelineConfig::validate() const {
  require(num_classes >= 2 && num_classes <= 64,
          "data.num_classes must be in [2, 64]");
  require(!extract_categories.empty(), "extract.categories must not be empty");
  {
    const auto& hand = hand_crafted_categories();
    std::set<std::string> seen;
    for (const auto& c : extract_categories) {
      require(std::find(hand.begin(), hand.end(), c) != hand.end(),
              "extract.categories: '" + c +
                  "' is not a hand-crafted category (CNN categories are "
                  "produced by train-cnn)");
      require(seen.insert(c).second,
              "extract.categories: duplicate '" + c + "'");
    }
  }
  require(extract_workers >= 1 && extract_workers <= 256,
          "extract.workers must be in [1, 256]");
  require(entropy_chunk >= 2, "extract.entropy_chunk must be >= 2");
  require(asm_pixel_count >= 1, "extract.asm_pixel_count must be >= 1");
  require(haralick_levels >= 2 && haralick_levels <= 256,
          "extract.haralick_levels must be in [2, 256]");

  require(cnn_epochs >= 1, "cnn.epochs must be >= 1");
  require(cnn_batch >= 1, "cnn.batch_size must be >= 1");
  require(std::isfinite(cnn_lr) && cnn_lr > 0, "cnn.lr must be positive");
  require(cnn_patience >= 0, "cnn.patience must be >= 0");
  require(cnn_val_fraction >= 0 && cnn_val_fraction < 1,
          "cnn.val_fraction must be in [0, 1)");
  require(cnn_folds >= 2, "cnn.folds must be >= 2");
  require(entropy_len >= 22,
          "cnn.entropy_len must be >= 22 (three stride-2 pools must leave at "
          "least one position)");
  require(byte_seq_cap >= 8, "cnn.byte_seq_cap must be >= 8");
  require(opcode_seq_cap >= 8, "cnn.opcode_seq_cap must be >= 8");

  gbt.validate();

  require(eval_folds >= 2, "eval.folds must be >= 2");
  require(select_bins >= 2, "select.bins must be >= 2");
  require(!k_grid.empty(), "select.k_grid must not be empty");
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    require(k_grid[i] >= 1, "select.k_grid values must be >= 1");
    require(i == 0 || k_grid[i] > k_grid[i - 1],
            "select.k_grid must be strictly increasing");
  }
  require(stepwise_folds >= 2, "stepwise.folds must be >= 2");
}

std::string PipelineConfig::canonical() const {
  // Sort categories by layout rank so equivalent configs render identically.
  std::vector<std::string> cats = extract_categories;
  std::sort(cats.begin(), cats.end(),
            [](const std::string& a, const std::string& b) {
              return canonical_rank(a) < canonical_rank(b);
            });

  std::vector<std::string> ks;
  for (std::size_t k : k_grid) ks.push_back(std::to_string(k));

  std::ostringstream out;
  out << "data.num_classes=" << num_classes << '\n'
      << "extract.categories=" << join(cats, ",") << '\n'
      << "extract.entropy_chunk=" << entropy_chunk << '\n'
      << "extract.asm_pixel_count=" << asm_pixel_count << '\n'
      << "extract.haralick_levels=" << haralick_levels << '\n'
      << "cnn.epochs=" << cnn_epochs << '\n'
      << "cnn.batch_size=" << cnn_batch << '\n'
      << "cnn.lr=" << fmt_double(cnn_lr) << '\n'
      << "cnn.patience=" << cnn_patience << '\n'
      << "cnn.val_fraction=" << fmt_double(cnn_val_fraction) << '\n'
      << "cnn.folds=" << cnn_folds << '\n'
      << "cnn.seed=" << cnn_seed << '\n'
      << "cnn.entropy_len=" << entropy_len << '\n'
      << "cnn.byte_seq_cap=" << byte_seq_cap << '\n'
      << "cnn.opcode_seq_cap=" << opcode_seq_cap << '\n'
      << "gbt.eta=" << fmt_double(gbt.eta) << '\n'
      << "gbt.max_depth=" << gbt.max_depth << '\n'
      << "gbt.gamma=" << fmt_double(gbt.gamma) << '\n'
      << "gbt.min_child_weight=" << fmt_double(gbt.min_child_weight) << '\n'
      << "gbt.colsample_bytree=" << fmt_double(gbt.colsample_bytree) << '\n'
      << "gbt.subsample=" << fmt_double(gbt.subsample) << '\n'
      << "gbt.num_rounds=" << gbt.num_rounds << '\n'
      << "gbt.l2_lambda=" << fmt_double(gbt.l2_lambda) << '\n'
      << "gbt.seed=" << gbt.seed << '\n'
      << "gbt.early_stop_patience=" << gbt.early_stop_patience << '\n'
      << "eval.folds=" << eval_folds << '\n'
      << "eval.seed=" << eval_seed << '\n'
      << "select.bins=" << select_bins << '\n'
      << "select.k_grid=" << join(ks, ",") << '\n'
      << "stepwise.folds=" << stepwise_folds << '\n'
      << "stepwise.seed=" << stepwise_seed << '\n';
  return out.str();
}

std::uint64_t PipelineConfig::fingerprint() const {
  return fnv1a64(canonical());
}

// ---------------------------------------------------------------------------
// extract
// ---------------------------------------------------------------------------

namespace {

FeatureBlock make_block(const std::string& cat, const PipelineConfig& cfg,
                        const SampleRef& s, const HexDump& dump,
                        const AsmListing& listing) {
  if (cat == "BYTE_MD") return byte_metadata(dump);
  if (cat == "BYTE_1G") return byte_unigrams(dump);
  if (cat == "BYTE_ENT") {
    return byte_entropy(dump, EntropyParams{cfg.entropy_chunk});
  }
  if (cat == "BYTE_HARALICK") {
    HaralickParams hp;
    hp.levels = cfg.haralick_levels;
    return byte_haralick(dump, hp);
  }
  if (cat == "BYTE_LBP") return byte_lbp(dump);
  if (cat == "ASM_MD") return asm_metadata(listing);
  if (cat == "ASM_OPC") return asm_opcode_counts(listing, default_opcode_vocab());
  if (cat == "ASM_PIXEL") return asm_pixels(s.asm_path, cfg.asm_pixel_count);
  if (cat == "ASM_REG") return asm_register_counts(listing);
  if (cat == "ASM_SYM") return asm_symbol_counts(listing);
  if (cat == "ASM_API") return asm_api_counts(listing, default_api_vocab());
  if (cat == "ASM_DD") return asm_data_define(listing);
  if (cat == "ASM_SEC") return asm_sections(listing);
  if (cat == "ASM_MISC") return asm_keywords(listing, default_keyword_vocab());
  throw ValidationError("no extractor for category '" + cat + "'");
}

}  // namespace

ExtractStats run_extract(const PipelineConfig& cfg, std::ostream& log) {
  cfg.validate();
  require(!cfg.manifest.empty(), "paths.manifest is required for extract");

  const Manifest man = load_manifest(cfg.manifest, cfg.num_classes);
  ExtractStats stats;
  stats.total = man.samples.size();
  require(stats.total > 0, "manifest lists no samples");

  bool want_hex = false;
  bool want_asm = false;
  bool want_listing = false;
  for (const auto& cat : cfg.extract_categories) {
    if (is_hex_category(cat)) {
      want_hex = true;
    } else {
      want_asm = true;
      if (cat != "ASM_PIXEL") want_listing = true;
    }
  }

  struct RowOut {
    bool ok = false;
    std::string error;
    std::vector<FeatureBlock> blocks;
  };
  std::vector<RowOut> rows(stats.total);

  auto work = [&](std::size_t i) {
    const SampleRef& s = man.samples[i];
    try {
      HexDump dump;
      AsmListing listing;
      if (want_hex) {
        if (s.hex_path.empty()) throw IoError("no hex dump in manifest");
        dump = parse_hex_dump(s.hex_path);
      }
      if (want_asm && s.asm_path.empty()) {
        throw IoError("no listing in manifest");
      }
      if (want_listing) listing = parse_asm_listing(s.asm_path);

      RowOut out;
      out.blocks.reserve(cfg.extract_categories.size());
      for (const auto& cat : cfg.extract_categories) {
        out.blocks.push_back(make_block(cat, cfg, s, dump, listing));
      }
      out.ok = true;
      rows[i] = std::move(out);
    } catch (const std::exception& e) {
      rows[i].error = e.what();
    }
  };

  const std::size_t workers = std::min<std::size_t>(
      static_cast<std::size_t>(cfg.extract_workers), stats.total);
  if (workers <= 1) {
    for (std::size_t i = 0; i < stats.total; ++i) work(i);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t i = next++; i < stats.total; i = next++) work(i);
      });
    }
    for (auto& t : pool) t.join();
  }

  std::vector<std::string> ids;
  std::vector<int> labels;
  for (std::size_t i = 0; i < stats.total; ++i) {
    const SampleRef& s = man.samples[i];
    if (rows[i].ok) {
      log << "extract id=" << s.id << " ok\n";
      ids.push_back(s.id);
      labels.push_back(s.label);
    } else {
      log << "extract id=" << s.id << " skipped: " << rows[i].error << '\n';
      stats.skipped.push_back(s.id + ": " + rows[i].error);
    }
  }
  require(!ids.empty(), "no sample could be extracted");

  const auto first_ok = std::find_if(rows.begin(), rows.end(),
                                     [](const RowOut& r) { return r.ok; });
  FeatureRegistry reg;
  for (const auto& b : first_ok->blocks) reg.add(b.category, b.names);

  FeatureMatrix m(reg, ids, labels);
  std::size_t r = 0;
  for (std::size_t i = 0; i < stats.total; ++i) {
    if (!rows[i].ok) continue;
    for (const auto& b : rows[i].blocks) m.set_block(r, b);
    ++r;
  }
  m.set_config_hash(cfg.fingerprint());
  ensure_parent_dir(cfg.store);
  m.save(cfg.store);
  stats.extracted = ids.size();

  log << "extract total=" << stats.total << " extracted=" << stats.extracted
      << " skipped=" << stats.skipped.size() << " dim=" << m.dim()
      << " store=" << cfg.store.string()
      << " config=" << fmt_hash(cfg.fingerprint()) << '\n';
  return stats;
}

// ---------------------------------------------------------------------------
// train-cnn
// ---------------------------------------------------------------------------

namespace {

// Replaces (or inserts) one category's rows in the store and saves it.
void merge_category(const PipelineConfig& cfg, FeatureMatrix store,
                    const DeepFeatureResult& result, std::ostream& log) {
  FeatureMatrix updated;
  if (store.registry().has(result.category)) {
    std::vector<std::string> keep;
    for (const auto& c : store.registry().categories()) {
      if (c != result.category) keep.push_back(c);
    }
    if (keep.empty()) {
      FeatureRegistry reg;
      reg.add(result.category, result.names);
      updated = FeatureMatrix(reg, store.ids(), store.labels());
      for (std::size_t r = 0; r < updated.rows(); ++r) {
        FeatureBlock b{result.category, result.names, result.rows[r]};
        updated.set_block(r, b);
      }
      updated.set_config_hash(store.config_hash());
    } else {
      updated = store.select_categories(keep);
      updated.insert_category(result.category, result.names, result.rows);
    }
  } else {
    updated = std::move(store);
    updated.insert_category(result.category, result.names, result.rows);
  }
  updated.set_config_hash(cfg.fingerprint());
  updated.save(cfg.store);
  log << "train-cnn category=" << result.category
      << " merged rows=" << updated.rows() << " dim=" << updated.dim()
      << " store=" << cfg.store.string() << '\n';
}

void write_cnn_log(const PipelineConfig& cfg, const DeepFeatureResult& result,
                   const fs::path& path) {
  auto log_json = [](const TrainLog& l) {
    return json{{"train_loss", l.train_loss},
                {"val_loss", l.val_loss},
                {"best_epoch", l.best_epoch},
                {"train_samples", l.train_samples},
                {"val_samples", l.val_samples}};
  };
  json j;
  j["config_hash"] = fmt_hash(cfg.fingerprint());
  j["category"] = result.category;
  j["folds"] = result.fold_logs.size();
  j["fold_of"] = result.fold_of;
  json folds = json::array();
  for (const auto& l : result.fold_logs) folds.push_back(log_json(l));
  j["fold_logs"] = std::move(folds);
  j["full_log"] = log_json(result.full_log);
  write_json_file(j, path);
}

}  // namespace

void run_train_cnn(const PipelineConfig& cfg, const std::string& category,
                   std::ostream& log) {
  cfg.validate();
  const auto& deep = deep_categories();
  require(std::find(deep.begin(), deep.end(), category) != deep.end(),
          "unknown architecture '" + category + "'; expected one of: " +
              join(deep, ", "));

  FeatureMatrix store = FeatureMatrix::load(cfg.store);
  require(!cfg.manifest.empty(), "paths.manifest is required for train-cnn");
  const Manifest man = load_manifest(cfg.manifest, cfg.num_classes);
  std::unordered_map<std::string, const SampleRef*> by_id;
  for (const auto& s : man.samples) by_id[s.id] = &s;

  std::vector<const SampleRef*> samples;
  samples.reserve(store.rows());
  for (const auto& id : store.ids()) {
    auto it = by_id.find(id);
    require(it != by_id.end(),
            "store row '" + id + "' is not in the manifest");
    samples.push_back(it->second);
  }

  const bool needs_hex = is_hex_category(category);
  std::vector<HexDump> dumps;
  std::vector<AsmListing> listings;
  if (needs_hex) {
    dumps.reserve(samples.size());
    for (const auto* s : samples) {
      if (s->hex_path.empty()) {
        throw IoError("sample '" + s->id + "' has no hex dump in manifest");
      }
      dumps.push_back(parse_hex_dump(s->hex_path));
    }
  } else {
    listings.reserve(samples.size());
    for (const auto* s : samples) {
      if (s->asm_path.empty()) {
        throw IoError("sample '" + s->id + "' has no listing in manifest");
      }
      listings.push_back(parse_asm_listing(s->asm_path));
    }
  }

  CnnTrainConfig tc;
  tc.epochs = cfg.cnn_epochs;
  tc.batch_size = cfg.cnn_batch;
  tc.lr = cfg.cnn_lr;
  tc.patience = cfg.cnn_patience;
  tc.val_fraction = cfg.cnn_val_fraction;
  tc.seed = cfg.cnn_seed;

  fs::create_directories(cfg.model_dir);
  const std::string stem = lower_stem(category);
  const int C = cfg.num_classes;
  const std::vector<int>& labels = store.labels();

  DeepFeatureResult result;
  if (category == "BYTE_IMG_CNN") {
    std::vector<nn::Tensor> inputs;
    inputs.reserve(dumps.size());
    for (const auto& d : dumps) inputs.push_back(grayscale_input(d));
    std::vector<const nn::Tensor*> ptrs;
    for (const auto& t : inputs) ptrs.push_back(&t);
    result = extract_oof<GrayscaleCnn>(
        category, ptrs, labels, cfg.cnn_folds, tc,
        [C](std::uint64_t seed) { return GrayscaleCnn(C, seed); },
        cfg.model_dir, stem);
  } else if (category == "BYTE_ENT_CNN") {
    std::vector<nn::Tensor> inputs;
    inputs.reserve(dumps.size());
    for (const auto& d : dumps) {
      inputs.push_back(entropy_input(d, cfg.entropy_len, cfg.entropy_chunk));
    }
    std::vector<const nn::Tensor*> ptrs;
    for (const auto& t : inputs) ptrs.push_back(&t);
    const std::size_t len = cfg.entropy_len;
    result = extract_oof<EntropyCnn>(
        category, ptrs, labels, cfg.cnn_folds, tc,
        [C, len](std::uint64_t seed) { return EntropyCnn(C, seed, len); },
        cfg.model_dir, stem);
  } else if (category == "BYTE_NGRAMS_CNN") {
    std::vector<std::vector<int>> inputs;
    inputs.reserve(dumps.size());
    for (const auto& d : dumps) inputs.push_back(byte_id_input(d, cfg.byte_seq_cap));
    std::vector<const std::vector<int>*> ptrs;
    for (const auto& s : inputs) ptrs.push_back(&s);
    result = extract_oof<NgramCnn>(
        category, ptrs, labels, cfg.cnn_folds, tc,
        [C](std::uint64_t seed) { return NgramCnn(257, C, seed); },
        cfg.model_dir, stem);
  } else {  // ASM_NGRAMS_CNN
    const Vocab& vocab = default_opcode_vocab();
    std::vector<std::vector<int>> inputs;
    inputs.reserve(listings.size());
    for (const auto& l : listings) {
      inputs.push_back(opcode_id_input(l, vocab, cfg.opcode_seq_cap));
    }
    std::vector<const std::vector<int>*> ptrs;
    for (const auto& s : inputs) ptrs.push_back(&s);
    const std::size_t rows = vocab.size() + 2;  // unknown id + pad id
    result = extract_oof<NgramCnn>(
        category, ptrs, labels, cfg.cnn_folds, tc,
        [C, rows](std::uint64_t seed) { return NgramCnn(rows, C, seed); },
        cfg.model_dir, stem);
  }

  for (std::size_t f = 0; f < result.fold_logs.size(); ++f) {
    const TrainLog& l = result.fold_logs[f];
    log << "train-cnn category=" << category << " fold=" << f
        << " epochs=" << l.train_loss.size() << " best_epoch=" << l.best_epoch
        << " final_train_loss=" << fmt_double(l.train_loss.back()) << '\n';
  }
  write_cnn_log(cfg, result, cfg.model_dir / (stem + "_train.json"));
  merge_category(cfg, std::move(store), result, log);
}

// ---------------------------------------------------------------------------
// train-gbt / evaluate
// ---------------------------------------------------------------------------

std::filesystem::path run_train_gbt(const PipelineConfig& cfg,
                                    const std::string& tag,
                                    const std::vector<std::string>& categories,
                                    std::ostream& log) {
  cfg.validate();
  check_tag(tag);
  std::vector<std::string> cats = categories;
  const FeatureMatrix sub = load_store_categories(cfg, cats);
  const FeatureMatrix train = labeled_rows(sub);

  std::vector<RoundMetrics> history;
  const GbtModel model =
      train_gbt(train, cfg.num_classes, cfg.gbt, nullptr, &history);

  fs::create_directories(cfg.model_dir);
  const fs::path model_path = cfg.model_dir / ("gbt_" + tag + ".mfgb");
  model.save(model_path);

  json j;
  j["config_hash"] = fmt_hash(cfg.fingerprint());
  j["tag"] = tag;
  j["categories"] = sub.registry().categories();
  j["rows"] = train.rows();
  j["dim"] = train.dim();
  j["num_classes"] = cfg.num_classes;
  j["rounds"] = model.rounds();
  json hist = json::array();
  for (const auto& m : history) {
    hist.push_back({{"round", m.round}, {"train_logloss", m.train_logloss}});
  }
  j["history"] = std::move(hist);
  write_json_file(j, cfg.model_dir / ("gbt_" + tag + "_train.json"));

  log << "train-gbt tag=" << tag << " rows=" << train.rows()
      << " dim=" << train.dim() << " rounds=" << model.rounds()
      << " final_train_logloss="
      << fmt_double(history.empty() ? 0.0 : history.back().train_logloss)
      << " model=" << model_path.string() << '\n';
  return model_path;
}

CvReport run_evaluate(const PipelineConfig& cfg, const std::string& tag,
                      const std::vector<std::string>& categories,
                      std::ostream& log) {
  cfg.validate();
  check_tag(tag);
  std::vector<std::string> cats = categories;
  const FeatureMatrix sub = load_store_categories(cfg, cats);
  const FeatureMatrix data = labeled_rows(sub);

  const CvReport rep = cross_validate(data, cfg.eval_folds, cfg.eval_seed,
                                      cfg.num_classes, gbt_trainer(cfg));

  json j;
  j["config_hash"] = fmt_hash(cfg.fingerprint());
  j["tag"] = tag;
  j["categories"] = sub.registry().categories();
  j["rows"] = data.rows();
  j["dim"] = data.dim();
  j["cv"] = nlohmann::ordered_json::parse(rep.to_json());
  fs::create_directories(cfg.model_dir);
  write_json_file(j, cfg.model_dir / ("eval_" + tag + ".json"));

  log << "evaluate tag=" << tag << " folds=" << rep.k
      << " rows=" << data.rows() << " dim=" << data.dim()
      << " mean_accuracy=" << fmt_double(rep.mean_accuracy)
      << " mean_logloss=" << fmt_double(rep.mean_logloss) << '\n';
  return rep;
}

// ---------------------------------------------------------------------------
// select / stepwise
// ---------------------------------------------------------------------------

SelectResult run_select(const PipelineConfig& cfg, ScoreMethod method,
                        const std::vector<std::string>& categories,
                        std::ostream& log) {
  cfg.validate();
  std::vector<std::string> cats = categories;
  const FeatureMatrix sub = load_store_categories(cfg, cats);
  const FeatureMatrix data = labeled_rows(sub);

  SelectResult res;
  switch (method) {
    case ScoreMethod::kChi2: res.report = chi2_scores(data); break;
    case ScoreMethod::kAnovaF: res.report = anova_f_scores(data); break;
    case ScoreMethod::kMutualInfo:
      res.report = mutual_info_scores(data, cfg.select_bins);
      break;
  }

  const std::string name = score_method_name(method);
  fs::create_directories(cfg.model_dir);
  res.report.write_csv(cfg.model_dir / ("select_" + name + "_scores.csv"));

  std::vector<std::size_t> ks;
  for (std::size_t k : cfg.k_grid) {
    if (k >= 1 && k <= data.dim()) ks.push_back(k);
  }
  const TrainPredictFn trainer = gbt_trainer(cfg);
  for (std::size_t k : ks) {
    const auto cols = select_top_k(res.report, k);
    const FeatureMatrix narrowed = data.select_columns(cols);
    const CvReport rep = cross_validate(narrowed, cfg.eval_folds, cfg.eval_seed,
                                        cfg.num_classes, trainer);
    res.grid.push_back({k, rep.mean_accuracy, rep.mean_logloss});
    log << "select method=" << name << " k=" << k
        << " mean_accuracy=" << fmt_double(rep.mean_accuracy)
        << " mean_logloss=" << fmt_double(rep.mean_logloss) << '\n';
  }

  json j;
  j["config_hash"] = fmt_hash(cfg.fingerprint());
  j["method"] = name;
  if (method == ScoreMethod::kMutualInfo) j["bins"] = cfg.select_bins;
  j["categories"] = sub.registry().categories();
  j["dim"] = data.dim();
  json grid = json::array();
  for (const auto& p : res.grid) {
    grid.push_back({{"k", p.k},
                    {"mean_accuracy", p.mean_accuracy},
                    {"mean_logloss", p.mean_logloss}});
  }
  j["grid"] = std::move(grid);
  write_json_file(j, cfg.model_dir / ("select_" + name + "_grid.json"));
  return res;
}

StepwiseTrace run_stepwise(const PipelineConfig& cfg,
                           const std::vector<std::string>& categories,
                           std::ostream& log) {
  cfg.validate();
  std::vector<std::string> cats = categories;
  const FeatureMatrix sub = load_store_categories(cfg, cats);
  const FeatureMatrix data = labeled_rows(sub);

  const StepwiseTrace trace = forward_stepwise(
      data, cats, cfg.stepwise_folds, cfg.gbt, cfg.num_classes,
      cfg.stepwise_seed);

  for (std::size_t i = 0; i < trace.steps.size(); ++i) {
    log << "stepwise step=" << i << " category=" << trace.steps[i].category
        << " cv_logloss=" << fmt_double(trace.steps[i].cv_logloss) << '\n';
  }
  for (const auto& w : trace.warnings) log << "stepwise warning: " << w << '\n';
  log << "stepwise stop_reason=" << trace.stop_reason
      << " selected=" << trace.steps.size() << '\n';

  fs::create_directories(cfg.model_dir);
  trace.write_csv(cfg.model_dir / "stepwise_trace.csv");
  json j;
  j["config_hash"] = fmt_hash(cfg.fingerprint());
  j["candidates"] = cats;
  j["trace"] = nlohmann::ordered_json::parse(trace.to_json());
  write_json_file(j, cfg.model_dir / "stepwise_trace.json");
  return trace;
}

// ---------------------------------------------------------------------------
// predict / importance
// ---------------------------------------------------------------------------

void run_predict(const PipelineConfig& cfg, const fs::path& model_path,
                 const fs::path& out_csv, std::ostream& log) {
  cfg.validate();
  const GbtModel model = GbtModel::load(model_path);

  // The model's column names carry their category prefixes; recover the
  // category list so the store can be projected onto the training layout.
  std::vector<std::string> cats;
  for (const auto& name : model.feature_names()) {
    const std::size_t dot = name.find('.');
    require(dot != std::string::npos,
            "model column '" + name + "' has no category prefix");
    const std::string cat = name.substr(0, dot);
    if (cats.empty() || cats.back() != cat) {
      require(std::find(cats.begin(), cats.end(), cat) == cats.end(),
              "model columns are not grouped by category");
      cats.push_back(cat);
    }
  }

  const FeatureMatrix sub = load_store_categories(cfg, cats);
  require(sub.registry().prefixed_names() == model.feature_names(),
          "feature layout mismatch: the store's columns for " +
              join(cats, ",") + " do not match the model (store dim " +
              std::to_string(sub.dim()) + ", model dim " +
              std::to_string(model.feature_names().size()) + ")");
  if (sub.config_hash() != model.config_hash()) {
    log << "predict warning: store and model carry different config hashes ("
        << fmt_hash(sub.config_hash()) << " vs "
        << fmt_hash(model.config_hash()) << ")\n";
  }

  const auto probs = model.predict_proba(sub);
  ensure_parent_dir(out_csv);
  write_submission_csv(out_csv, sub.ids(), probs, model.num_classes());
  log << "predict rows=" << sub.rows() << " model=" << model_path.string()
      << " out=" << out_csv.string() << '\n';
}

std::vector<ImportanceEntry> run_importance(
    const PipelineConfig& cfg, const fs::path& model_path, ImportanceKind kind,
    bool by_category, const fs::path& out_csv, std::ostream& log) {
  cfg.validate();
  const GbtModel model = GbtModel::load(model_path);
  const auto entries = feature_importance(model, kind, by_category);

  ensure_parent_dir(out_csv);
  std::ofstream out(out_csv);
  if (!out) throw IoError("cannot open for writing: " + out_csv.string());
  out << "name,weight,total_gain,avg_gain\n";
  for (const auto& e : entries) {
    out << e.name << ',' << fmt_double(e.weight) << ','
        << fmt_double(e.total_gain) << ',' << fmt_double(e.avg_gain) << '\n';
  }
  if (!out) throw IoError("write failed: " + out_csv.string());

  log << "importance model=" << model_path.string()
      << " entries=" << entries.size() << " by_category="
      << (by_category ? "yes" : "no") << " out=" << out_csv.string() << '\n';
  return entries;
}

}  // namespace malfuse
