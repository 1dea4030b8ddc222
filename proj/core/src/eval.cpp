#include "malfuse/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <random>

#include <json.hpp>

#include "malfuse/errors.hpp"

namespace malfuse {
namespace {

constexpr double kProbClip = 1e-15;

void check_prob_rows(const std::vector<std::vector<double>>& probs,
                     std::size_t expected_rows, int num_classes,
                     const std::string& what) {
  if (probs.size() != expected_rows) {
    throw ValidationError(what + ": expected " + std::to_string(expected_rows) +
                          " probability rows, got " +
                          std::to_string(probs.size()));
  }
  for (const auto& row : probs) {
    if (row.size() != static_cast<std::size_t>(num_classes)) {
      throw ValidationError(what + ": probability row has wrong width");
    }
  }
}

}  // namespace

void deterministic_shuffle(std::vector<std::size_t>& v, std::mt19937_64& rng) {
  for (std::size_t i = v.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng() % i);
    std::swap(v[i - 1], v[j]);
  }
}

double accuracy(const std::vector<int>& truth,
                const std::vector<int>& predicted) {
  if (truth.empty() || truth.size() != predicted.size()) {
    throw ValidationError("accuracy: truth/prediction size mismatch or empty");
  }
  std::size_t hits = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] == predicted[i]) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(truth.size());
}

double multiclass_logloss(const std::vector<int>& truth,
                          const std::vector<std::vector<double>>& probs,
                          int num_classes) {
  if (truth.empty()) throw ValidationError("logloss: no samples");
  if (num_classes < 2) throw ValidationError("logloss: need >= 2 classes");
  check_prob_rows(probs, truth.size(), num_classes, "logloss");
  double total = 0.0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i];
    if (y < 0 || y >= num_classes) {
      throw ValidationError("logloss: label out of range at row " +
                            std::to_string(i));
    }
    const double p =
        std::clamp(probs[i][static_cast<std::size_t>(y)], kProbClip,
                   1.0 - kProbClip);
    total -= std::log(p);
  }
  return total / static_cast<double>(truth.size());
}

int argmax_class(const std::vector<double>& probs) {
  if (probs.empty()) throw ValidationError("argmax_class: empty row");
  std::size_t best = 0;
  for (std::size_t i = 1; i < probs.size(); ++i) {
    if (probs[i] > probs[best]) best = i;
  }
  return static_cast<int>(best);
}

std::vector<std::size_t> KFoldPlan::train_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] >= 0 && fold_of[i] != fold) out.push_back(i);
  }
  return out;
}

std::vector<std::size_t> KFoldPlan::eval_indices(int fold) const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < fold_of.size(); ++i) {
    if (fold_of[i] == fold) out.push_back(i);
  }
  return out;
}

KFoldPlan kfold_plan(const std::vector<int>& labels, int k, std::uint64_t seed,
                     bool stratified) {
  if (k < 2) throw ValidationError("kfold: k must be >= 2");
  KFoldPlan plan;
  plan.k = k;
  plan.fold_of.assign(labels.size(), -1);

  std::mt19937_64 rng(seed);
  if (stratified) {
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= 0) by_class[labels[i]].push_back(i);
    }
    if (by_class.empty()) throw ValidationError("kfold: no labeled samples");
    for (auto& [label, idx] : by_class) {
      if (idx.size() < static_cast<std::size_t>(k)) {
        throw ValidationError("kfold: class " + std::to_string(label) +
                              " has only " + std::to_string(idx.size()) +
                              " samples for k=" + std::to_string(k));
      }
      deterministic_shuffle(idx, rng);
      for (std::size_t i = 0; i < idx.size(); ++i) {
        plan.fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
      }
    }
  } else {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] >= 0) idx.push_back(i);
    }
    if (idx.size() < static_cast<std::size_t>(k)) {
      throw ValidationError("kfold: fewer labeled samples than folds");
    }
    deterministic_shuffle(idx, rng);
    for (std::size_t i = 0; i < idx.size(); ++i) {
      plan.fold_of[idx[i]] = static_cast<int>(i % static_cast<std::size_t>(k));
    }
  }
  return plan;
}

std::string CvReport::to_json() const {
  nlohmann::json j;
  j["k"] = k;
  j["seed"] = seed;
  j["num_classes"] = num_classes;
  j["mean_accuracy"] = mean_accuracy;
  j["mean_logloss"] = mean_logloss;
  j["folds"] = nlohmann::json::array();
  for (const auto& f : folds) {
    j["folds"].push_back({{"fold", f.fold},
                          {"train_rows", f.train_rows},
                          {"eval_rows", f.eval_rows},
                          {"accuracy", f.accuracy},
                          {"logloss", f.logloss}});
  }
  return j.dump(2);
}

void CvReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << to_json() << '\n';
  if (!out) throw IoError("write failed: " + path.string());
}

CvReport cross_validate(const FeatureMatrix& matrix, int k, std::uint64_t seed,
                        int num_classes, const TrainPredictFn& trainer) {
  const KFoldPlan plan = kfold_plan(matrix.labels(), k, seed);
  CvReport report;
  report.k = k;
  report.seed = seed;
  report.num_classes = num_classes;
  report.oof_probs.assign(matrix.rows(), {});

  for (int fold = 0; fold < k; ++fold) {
    const auto train_idx = plan.train_indices(fold);
    const auto eval_idx = plan.eval_indices(fold);
    const FeatureMatrix train = matrix.subset_rows(train_idx);
    const FeatureMatrix held = matrix.subset_rows(eval_idx);

    const auto probs = trainer(train, held);
    check_prob_rows(probs, eval_idx.size(), num_classes, "cross_validate");

    std::vector<int> truth;
    std::vector<int> predicted;
    truth.reserve(eval_idx.size());
    for (std::size_t i = 0; i < eval_idx.size(); ++i) {
      truth.push_back(matrix.labels()[eval_idx[i]]);
      predicted.push_back(argmax_class(probs[i]));
      report.oof_probs[eval_idx[i]] = probs[i];
    }

    FoldMetrics fm;
    fm.fold = fold;
    fm.train_rows = train_idx.size();
    fm.eval_rows = eval_idx.size();
    fm.accuracy = accuracy(truth, predicted);
    fm.logloss = multiclass_logloss(truth, probs, num_classes);
    report.folds.push_back(fm);
    report.mean_accuracy += fm.accuracy;
    report.mean_logloss += fm.logloss;
  }
  report.mean_accuracy /= static_cast<double>(k);
  report.mean_logloss /= static_cast<double>(k);
  return report;
}

void write_submission_csv(const std::filesystem::path& path,
                          const std::vector<std::string>& ids,
                          const std::vector<std::vector<double>>& probs,
                          int num_classes) {
  if (num_classes < 2) {
    throw ValidationError("submission: need >= 2 classes");
  }
  check_prob_rows(probs, ids.size(), num_classes, "submission");
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path.string());
  out << "Id";
  for (int c = 1; c <= num_classes; ++c) out << ",Prediction" << c;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < ids.size(); ++i) {
    out << ids[i];
    for (int c = 0; c < num_classes; ++c) {
      std::snprintf(buf, sizeof(buf), "%.12g",
                    probs[i][static_cast<std::size_t>(c)]);
      out << ',' << buf;
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace malfuse
