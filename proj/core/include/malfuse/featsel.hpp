#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "malfuse/fusion.hpp"
#include "malfuse/gbt.hpp"

namespace malfuse {

enum class ScoreMethod { kChi2, kAnovaF, kMutualInfo };

// "chi2", "anova_f" or "mutual_info".
std::string score_method_name(ScoreMethod method);

// F-statistic stand-in for perfectly separated groups (zero within-class
// variance with unequal means); finite so score reports stay sortable.
inline constexpr double kInfiniteSeparationF = 1e15;

// Univariate score per feature column, aligned with the matrix layout.
struct ScoreReport {
  ScoreMethod method = ScoreMethod::kChi2;
  std::vector<std::string> names;  // prefixed feature names, column order
  std::vector<double> scores;      // one finite value per column

  std::string to_json() const;
  void write_json(const std::filesystem::path& path) const;
  // CSV with header `feature,score`, one row per column.
  void write_csv(const std::filesystem::path& path) const;
};

// Chi-square statistic of the per-class mass of each feature against the
// class-prior expectation.  Columns containing negative values are shifted
// by their minimum first (the statistic needs non-negative mass); columns
// that are already non-negative are used as-is, so the score is not scale
// invariant.  All-constant columns score 0.
ScoreReport chi2_scores(const FeatureMatrix& m);

// One-way ANOVA F-value per column: between-class mean square over
// within-class mean square.  All-equal columns score 0; zero within-class
// variance with unequal means scores kInfiniteSeparationF.
ScoreReport anova_f_scores(const FeatureMatrix& m);

// Discrete mutual information (nats) between the equal-width-binned column
// and the class label.  Binning over [min, max] makes the score invariant
// to strictly increasing affine maps of a column; degenerate (constant)
// columns score 0.
ScoreReport mutual_info_scores(const FeatureMatrix& m, int bins = 32);

// Indices of the k highest-scoring columns, returned in ascending index
// order.  Ties prefer the lower index, so results nest as k grows.
std::vector<std::size_t> select_top_k(const ScoreReport& report,
                                      std::size_t k);

struct StepwiseStep {
  std::string category;
  double cv_logloss = 0.0;
};

struct StepwiseTrace {
  std::vector<StepwiseStep> steps;
  std::string stop_reason;  // "no_improvement", "exhausted" or
                            // "all_candidates_failed"
  int cv_folds = 0;
  std::vector<std::string> warnings;  // skipped candidates, one line each

  std::string to_json() const;
  void write_json(const std::filesystem::path& path) const;
  // CSV with header `step,category,cv_logloss`.
  void write_csv(const std::filesystem::path& path) const;
};

// Greedy forward selection over feature categories: each step evaluates
// every unused category appended to the current set by k-fold CV mean
// logloss of a boosted-tree model, adds the best one and stops when no
// candidate strictly improves the incumbent.  Ties prefer the candidate
// adding fewer columns, then the earlier category in `categories`.
// Candidates whose training fails are skipped and noted in `warnings`.
StepwiseTrace forward_stepwise(const FeatureMatrix& m,
                               const std::vector<std::string>& categories,
                               int cv_folds, const GbtParams& trainer,
                               int num_classes, std::uint64_t seed = 1);

}  // namespace malfuse
