#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "malfuse/fusion.hpp"

namespace malfuse {

// Fisher-Yates with an explicit index draw, so shuffles do not depend on the
// standard library's std::shuffle implementation and reproduce everywhere.
void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng);

// Fraction of samples whose predicted class matches the true class.
double accuracy(const std::vector<int>& truth, const std::vector<int>& predicted);

// Mean negative natural log of the probability assigned to the true class,
// with probabilities clipped to [1e-15, 1 - 1e-15].
double multiclass_logloss(const std::vector<int>& truth,
                          const std::vector<std::vector<double>>& probs,
                          int num_classes);

// Index of the largest probability; ties resolve to the lowest index.
int argmax_class(const std::vector<double>& probs);

// Assignment of labeled samples to k folds.  Unlabeled samples get fold -1.
struct KFoldPlan {
  int k = 0;
  std::vector<int> fold_of;

  // Labeled samples outside / inside the given fold, in row order.
  std::vector<std::size_t> train_indices(int fold) const;
  std::vector<std::size_t> eval_indices(int fold) const;
};

// Deterministic fold assignment.  Stratified plans shuffle each class with a
// shared seeded generator and deal round-robin, so per-class fold sizes
// differ by at most one; k must not exceed the smallest class size (or the
// labeled sample count when unstratified).
KFoldPlan kfold_plan(const std::vector<int>& labels, int k, std::uint64_t seed,
                     bool stratified = true);

struct FoldMetrics {
  int fold = 0;
  std::size_t train_rows = 0;
  std::size_t eval_rows = 0;
  double accuracy = 0.0;
  double logloss = 0.0;
};

struct CvReport {
  int k = 0;
  std::uint64_t seed = 0;
  int num_classes = 0;
  std::vector<FoldMetrics> folds;
  double mean_accuracy = 0.0;
  double mean_logloss = 0.0;
  // One probability row per sample; empty for rows never held out
  // (i.e. unlabeled samples).
  std::vector<std::vector<double>> oof_probs;

  std::string to_json() const;
  void write_json(const std::filesystem::path& path) const;
};

// Trainer contract: fit on `train`, return one probability row (length
// num_classes) per row of `eval`.
using TrainPredictFn = std::function<std::vector<std::vector<double>>(
    const FeatureMatrix& train, const FeatureMatrix& eval)>;

CvReport cross_validate(const FeatureMatrix& matrix, int k, std::uint64_t seed,
                        int num_classes, const TrainPredictFn& trainer);

// Class-probability table: header `Id,Prediction1..PredictionC`.
void write_submission_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& ids,
                          const std::vector<std::vector<double>>& probs,
                          int num_classes);

}  // namespace malfuse
