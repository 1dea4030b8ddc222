#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "malfuse/eval.hpp"
#include "malfuse/featsel.hpp"
#include "malfuse/gbt.hpp"

// End-to-end runners behind the `malfuse` command-line tool.  Every runner is
// a pure function of a PipelineConfig plus its explicit arguments: given the
// same config and the same input files it produces byte-identical artifacts.

namespace malfuse {

// ---------------------------------------------------------------------------
// Category bundles
// ---------------------------------------------------------------------------

// The 14 hand-crafted categories (canonical layout order).  These are the
// categories `extract` can compute directly from hex dumps and listings.
const std::vector<std::string>& hand_crafted_categories();

// The four CNN-derived categories.  Rows for these are produced by
// `train-cnn`, never by `extract`.
const std::vector<std::string>& deep_categories();

// Named bundles accepted by --preset:
//   hex-hand-crafted  the five hand-crafted hex-dump categories
//   hex-all           hex-hand-crafted plus the three hex CNN categories
//   asm-hand-crafted  the nine hand-crafted listing categories
//   asm-all           asm-hand-crafted plus ASM_NGRAMS_CNN
//   hand-crafted      all 14 hand-crafted categories
//   deep              the four CNN categories
//   all               every category
//   final             asm-all plus BYTE_MD, BYTE_1G and BYTE_NGRAMS_CNN
const std::vector<std::string>& preset_names();
std::vector<std::string> preset_categories(const std::string& name);

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

// Parsed from an INI-style file: `[section]` headers, `key = value` lines,
// `#`/`;` comment lines.  Unknown sections or keys are rejected so typos
// cannot silently fall back to defaults.  Relative paths in [paths] are
// resolved against the config file's directory; paths given via `set` stay
// as written (the CLI resolves them against the working directory).
struct PipelineConfig {
  // [paths]
  std::filesystem::path manifest;             // dataset manifest CSV
  std::filesystem::path store = "features.mfm";  // fused feature store
  std::filesystem::path model_dir = "models";    // models, reports, logs

  // [data]
  int num_classes = 9;

  // [extract]
  std::vector<std::string> extract_categories = hand_crafted_categories();
  int extract_workers = 1;         // parallel extraction width
  std::size_t entropy_chunk = 256; // bytes per structural-entropy window
  std::size_t asm_pixel_count = 800;
  int haralick_levels = 32;

  // [cnn]
  int cnn_epochs = 30;
  int cnn_batch = 32;
  double cnn_lr = 1e-3;
  int cnn_patience = 5;
  double cnn_val_fraction = 0.1;
  int cnn_folds = 5;               // out-of-fold extraction folds
  std::uint64_t cnn_seed = 1;
  std::size_t entropy_len = 512;   // entropy-stream net input length
  std::size_t byte_seq_cap = 65536;
  std::size_t opcode_seq_cap = 16384;

  // [gbt]
  GbtParams gbt;

  // [eval]
  int eval_folds = 10;
  std::uint64_t eval_seed = 17;

  // [select]
  int select_bins = 32;            // mutual-information histogram bins
  std::vector<std::size_t> k_grid = {20,  50,   100,  200, 500,
                                     1000, 1500, 2000, 2500};

  // [stepwise]
  int stepwise_folds = 3;
  std::uint64_t stepwise_seed = 5;

  // Parses a config file.  Throws ParseError on malformed lines and
  // ValidationError on unknown keys or unparsable values.
  static PipelineConfig load(const std::filesystem::path& path);

  // Applies one `section.key = value` override (same validation as load).
  void set(const std::string& key, const std::string& value);

  // Range-checks every field.  Runners call this on entry.
  void validate() const;

  // Canonical `key=value` rendering of every field that affects computed
  // numbers.  Paths and worker counts are excluded on purpose: the same
  // corpus processed under a different directory layout or thread count
  // must hash the same.
  std::string canonical() const;

  // FNV-1a hash of canonical(); embedded in stores, models and reports.
  std::uint64_t fingerprint() const;
};

// ---------------------------------------------------------------------------
// Runners
// ---------------------------------------------------------------------------

struct ExtractStats {
  std::size_t total = 0;      // samples in the manifest
  std::size_t extracted = 0;  // rows written to the store
  std::vector<std::string> skipped;  // "<id>: <reason>" per failed sample
};

// Computes the configured hand-crafted categories for every manifest sample
// and writes the feature store.  A sample whose files cannot be parsed is
// skipped and reported in `skipped`; the run only fails when no sample
// survives.  Rerunning with the same inputs rewrites the store bit-for-bit.
ExtractStats run_extract(const PipelineConfig& cfg, std::ostream& log);

// Trains the CNN behind `category` (one of deep_categories()) with
// out-of-fold extraction and merges the resulting feature rows into the
// store, replacing the category when it is already present.  Fold models and
// a training-log JSON are written under model_dir.
void run_train_cnn(const PipelineConfig& cfg, const std::string& category,
                   std::ostream& log);

// Trains a boosted-tree model on the labeled rows of the given categories.
// Writes model_dir/gbt_<tag>.mfgb plus a training-log JSON and returns the
// model path.  Missing categories fail with a hint naming the command that
// produces them.
std::filesystem::path run_train_gbt(const PipelineConfig& cfg,
                                    const std::string& tag,
                                    const std::vector<std::string>& categories,
                                    std::ostream& log);

// Stratified k-fold cross-validation of a boosted-tree model over the given
// categories.  Writes model_dir/eval_<tag>.json and returns the report.
CvReport run_evaluate(const PipelineConfig& cfg, const std::string& tag,
                      const std::vector<std::string>& categories,
                      std::ostream& log);

// One cross-validated operating point of the univariate-selection sweep.
struct SelectPoint {
  std::size_t k = 0;
  double mean_accuracy = 0.0;
  double mean_logloss = 0.0;
};

struct SelectResult {
  ScoreReport report;
  std::vector<SelectPoint> grid;  // one entry per evaluated k
};

// Scores every column of the selected categories with the given univariate
// method, then cross-validates the top-k columns for each k in the config
// grid (clipped to the store width).  Writes the scores CSV and a grid JSON
// under model_dir.
SelectResult run_select(const PipelineConfig& cfg, ScoreMethod method,
                        const std::vector<std::string>& categories,
                        std::ostream& log);

// Greedy forward selection over categories; writes the trace as JSON and CSV
// under model_dir.  An empty `categories` means every category in the store.
StepwiseTrace run_stepwise(const PipelineConfig& cfg,
                           const std::vector<std::string>& categories,
                           std::ostream& log);

// Scores every store row with a trained model and writes a class-probability
// table (`Id,Prediction1..C`).  The store must contain exactly the feature
// layout the model was trained on.
void run_predict(const PipelineConfig& cfg,
                 const std::filesystem::path& model_path,
                 const std::filesystem::path& out_csv, std::ostream& log);

// Split-count and gain importances of a trained model, written as CSV
// (`name,weight,total_gain,avg_gain`, sorted by `kind`).
std::vector<ImportanceEntry> run_importance(
    const PipelineConfig& cfg, const std::filesystem::path& model_path,
    ImportanceKind kind, bool by_category,
    const std::filesystem::path& out_csv, std::ostream& log);

}  // namespace malfuse
