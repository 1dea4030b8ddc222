#pragma once

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include "malfuse/fusion.hpp"

namespace malfuse {

// Boosting hyperparameters.  eta = 0 is allowed (predictions never move),
// which callers use as a controlled baseline.
struct GbtParams {
  double eta = 0.2;
  int max_depth = 5;
  double gamma = 0.0;
  double min_child_weight = 1.0;
  double colsample_bytree = 1.0;
  double subsample = 1.0;
  int num_rounds = 500;
  double l2_lambda = 1.0;
  std::uint64_t seed = 0;
  // Early stopping on eval logloss; active only when an eval set is given.
  int early_stop_patience = 50;

  void validate() const;  // throws ValidationError on out-of-range fields
};

// Flat binary tree; nodes[0] is the root.  feature == -1 marks a leaf.
struct TreeNode {
  int feature = -1;
  double threshold = 0.0;
  double value = 0.0;  // leaf weight, unscaled by eta
  double gain = 0.0;   // split gain at internal nodes
  int left = -1;
  int right = -1;

  bool is_leaf() const { return feature < 0; }
};

struct Tree {
  std::vector<TreeNode> nodes;

  // Route a feature row (values below the threshold go left).
  int route(const double* row) const;
  double score(const double* row) const { return nodes[route(row)].value; }
  int depth() const;  // edges on the longest root-to-leaf path
};

struct RoundMetrics {
  int round = 0;
  double train_logloss = 0.0;
  // NaN when no eval set was given.
  double eval_logloss = std::numeric_limits<double>::quiet_NaN();
};

// Trained multiclass ensemble: per round, one tree per class, margins
// accumulated as eta * leaf value starting from a zero (uniform) base score.
class GbtModel {
 public:
  GbtModel() = default;
  GbtModel(GbtParams params, int num_classes,
           std::vector<std::string> feature_names, std::vector<Tree> trees,
           std::uint64_t config_hash);

  const GbtParams& params() const { return params_; }
  int num_classes() const { return num_classes_; }
  int rounds() const {
    return num_classes_ == 0
               ? 0
               : static_cast<int>(trees_.size()) / num_classes_;
  }
  const std::vector<Tree>& trees() const { return trees_; }
  const Tree& tree(int round, int cls) const {
    return trees_[static_cast<std::size_t>(round) *
                      static_cast<std::size_t>(num_classes_) +
                  static_cast<std::size_t>(cls)];
  }
  const std::vector<std::string>& feature_names() const {
    return feature_names_;
  }
  std::uint64_t config_hash() const { return config_hash_; }

  // Accumulated per-class margins for one feature row.
  std::vector<double> margins(const double* row) const;
  std::vector<double> predict_row(const double* row) const;  // softmax(margins)
  std::vector<std::vector<double>> predict_proba(const FeatureMatrix& m) const;
  std::vector<int> predict_class(const FeatureMatrix& m) const;

  void save(const std::filesystem::path& path) const;
  static GbtModel load(const std::filesystem::path& path);

 private:
  GbtParams params_;
  int num_classes_ = 0;
  std::vector<std::string> feature_names_;
  std::vector<Tree> trees_;  // trees_[round * C + cls]
  std::uint64_t config_hash_ = 0;
};

// Second-order boosting with softmax cross-entropy: per round and class,
// fits a regression tree to g = p - y, h = p(1-p) by exact greedy split
// search (midpoint thresholds), leaf weight -G/(H+lambda).  Rows must all
// be labeled in [0, num_classes).  When eval_set is given, training stops
// after params.early_stop_patience rounds without eval-logloss improvement
// and the ensemble is truncated to the best round.  `history` (optional)
// receives per-round metrics.
GbtModel train_gbt(const FeatureMatrix& train, int num_classes,
                   const GbtParams& params,
                   const FeatureMatrix* eval_set = nullptr,
                   std::vector<RoundMetrics>* history = nullptr);

enum class ImportanceKind { kWeight, kGain };

struct ImportanceEntry {
  std::string name;     // feature name or category
  double weight = 0.0;  // number of splits
  double total_gain = 0.0;
  double avg_gain = 0.0;  // total_gain / weight (0 when unused)
};

// Per-feature or per-category importances, sorted by the requested kind
// (descending, ties by first appearance in the feature list).  Unused
// features are included with zeros.
std::vector<ImportanceEntry> feature_importance(const GbtModel& model,
                                                ImportanceKind kind,
                                                bool by_category);

}  // namespace malfuse
