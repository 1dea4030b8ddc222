#include "malfuse/featsel.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <numeric>

#include <nlohmann/json.hpp>

#include "malfuse/errors.hpp"
#include "malfuse/eval.hpp"

namespace malfuse {

namespace {

std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// Labeled rows only; univariate scores ignore unlabeled samples.
std::vector<std::size_t> labeled_rows(const FeatureMatrix& m) {
  std::vector<std::size_t> rows;
  for (std::size_t r = 0; r < m.rows(); ++r) {
    if (m.labels()[r] >= 0) rows.push_back(r);
  }
  if (rows.empty()) {
    throw ValidationError("scoring requires at least one labeled row");
  }
  return rows;
}

int count_classes(const FeatureMatrix& m, const std::vector<std::size_t>& rows) {
  int hi = -1;
  for (std::size_t r : rows) hi = std::max(hi, m.labels()[r]);
  return hi + 1;
}

void check_finite_column(const FeatureMatrix& m,
                         const std::vector<std::size_t>& rows,
                         std::size_t col) {
  for (std::size_t r : rows) {
    if (!std::isfinite(m.at(r, col))) {
      throw ValidationError("non-finite value in feature column " +
                            std::to_string(col));
    }
  }
}

}  // namespace

std::string score_method_name(ScoreMethod method) {
  switch (method) {
    case ScoreMethod::kChi2:
      return "chi2";
    case ScoreMethod::kAnovaF:
      return "anova_f";
    case ScoreMethod::kMutualInfo:
      return "mutual_info";
  }
  throw ValidationError("unknown score method");
}

std::string ScoreReport::to_json() const {
  nlohmann::json j;
  j["method"] = score_method_name(method);
  j["features"] = names;
  j["scores"] = scores;
  return j.dump(2);
}

void ScoreReport::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json() << "\n";
  if (!out) throw IoError("failed to write " + path.string());
}

void ScoreReport::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "feature,score\n";
  for (std::size_t i = 0; i < names.size(); ++i) {
    out << names[i] << "," << format_double(scores[i]) << "\n";
  }
  if (!out) throw IoError("failed to write " + path.string());
}

ScoreReport chi2_scores(const FeatureMatrix& m) {
  std::vector<std::size_t> rows = labeled_rows(m);
  int num_classes = count_classes(m, rows);
  std::vector<std::size_t> class_count(
      static_cast<std::size_t>(num_classes), 0);
  for (std::size_t r : rows) {
    ++class_count[static_cast<std::size_t>(m.labels()[r])];
  }

  ScoreReport report;
  report.method = ScoreMethod::kChi2;
  report.names = m.registry().prefixed_names();
  report.scores.resize(m.dim(), 0.0);
  std::vector<double> observed(static_cast<std::size_t>(num_classes));
  for (std::size_t col = 0; col < m.dim(); ++col) {
    check_finite_column(m, rows, col);
    double lo = std::numeric_limits<double>::infinity();
    for (std::size_t r : rows) lo = std::min(lo, m.at(r, col));
    double shift = lo < 0.0 ? -lo : 0.0;
    std::fill(observed.begin(), observed.end(), 0.0);
    double total = 0.0;
    for (std::size_t r : rows) {
      double v = m.at(r, col) + shift;
      observed[static_cast<std::size_t>(m.labels()[r])] += v;
      total += v;
    }
    if (total <= 0.0) continue;  // no mass: constant-zero column
    double stat = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      double expected = total * static_cast<double>(class_count[
                                    static_cast<std::size_t>(c)]) /
                        static_cast<double>(rows.size());
      if (expected > 0.0) {
        double diff = observed[static_cast<std::size_t>(c)] - expected;
        stat += diff * diff / expected;
      }
    }
    report.scores[col] = stat;
  }
  return report;
}

ScoreReport anova_f_scores(const FeatureMatrix& m) {
  std::vector<std::size_t> rows = labeled_rows(m);
  int num_classes = count_classes(m, rows);
  if (num_classes < 2) {
    throw ValidationError("ANOVA F needs at least two classes");
  }

  ScoreReport report;
  report.method = ScoreMethod::kAnovaF;
  report.names = m.registry().prefixed_names();
  report.scores.resize(m.dim(), 0.0);
  std::size_t n = rows.size();
  std::vector<double> group_sum(static_cast<std::size_t>(num_classes));
  std::vector<std::size_t> group_n(static_cast<std::size_t>(num_classes));
  for (std::size_t col = 0; col < m.dim(); ++col) {
    check_finite_column(m, rows, col);
    std::fill(group_sum.begin(), group_sum.end(), 0.0);
    std::fill(group_n.begin(), group_n.end(), std::size_t{0});
    double grand = 0.0;
    for (std::size_t r : rows) {
      std::size_t c = static_cast<std::size_t>(m.labels()[r]);
      group_sum[c] += m.at(r, col);
      ++group_n[c];
      grand += m.at(r, col);
    }
    grand /= static_cast<double>(n);
    double ssb = 0.0;
    for (int c = 0; c < num_classes; ++c) {
      std::size_t gc = static_cast<std::size_t>(c);
      if (group_n[gc] == 0) continue;
      double mean = group_sum[gc] / static_cast<double>(group_n[gc]);
      ssb += static_cast<double>(group_n[gc]) * (mean - grand) * (mean - grand);
    }
    double ssw = 0.0;
    for (std::size_t r : rows) {
      std::size_t c = static_cast<std::size_t>(m.labels()[r]);
      double mean = group_sum[c] / static_cast<double>(group_n[c]);
      double d = m.at(r, col) - mean;
      ssw += d * d;
    }
    int groups = 0;
    for (std::size_t gc : group_n) groups += gc > 0 ? 1 : 0;
    if (groups < 2 || n <= static_cast<std::size_t>(groups)) {
      report.scores[col] = 0.0;
      continue;
    }
    if (ssw == 0.0) {
      report.scores[col] = ssb == 0.0 ? 0.0 : kInfiniteSeparationF;
      continue;
    }
    double msb = ssb / static_cast<double>(groups - 1);
    double msw = ssw / static_cast<double>(n - static_cast<std::size_t>(groups));
    report.scores[col] = msb / msw;
  }
  return report;
}

ScoreReport mutual_info_scores(const FeatureMatrix& m, int bins) {
  if (bins < 2) throw ValidationError("mutual information needs bins >= 2");
  std::vector<std::size_t> rows = labeled_rows(m);
  int num_classes = count_classes(m, rows);

  ScoreReport report;
  report.method = ScoreMethod::kMutualInfo;
  report.names = m.registry().prefixed_names();
  report.scores.resize(m.dim(), 0.0);
  std::size_t n = rows.size();
  std::vector<std::size_t> joint(
      static_cast<std::size_t>(bins) * static_cast<std::size_t>(num_classes));
  std::vector<std::size_t> bin_count(static_cast<std::size_t>(bins));
  std::vector<std::size_t> class_count(static_cast<std::size_t>(num_classes),
                                       0);
  for (std::size_t r : rows) {
    ++class_count[static_cast<std::size_t>(m.labels()[r])];
  }

  for (std::size_t col = 0; col < m.dim(); ++col) {
    check_finite_column(m, rows, col);
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    for (std::size_t r : rows) {
      lo = std::min(lo, m.at(r, col));
      hi = std::max(hi, m.at(r, col));
    }
    if (!(hi > lo)) continue;  // constant column
    std::fill(joint.begin(), joint.end(), std::size_t{0});
    std::fill(bin_count.begin(), bin_count.end(), std::size_t{0});
    for (std::size_t r : rows) {
      int b = static_cast<int>((m.at(r, col) - lo) / (hi - lo) *
                               static_cast<double>(bins));
      b = std::min(b, bins - 1);
      std::size_t c = static_cast<std::size_t>(m.labels()[r]);
      ++joint[static_cast<std::size_t>(b) *
                  static_cast<std::size_t>(num_classes) +
              c];
      ++bin_count[static_cast<std::size_t>(b)];
    }
    double mi = 0.0;
    for (int b = 0; b < bins; ++b) {
      for (int c = 0; c < num_classes; ++c) {
        std::size_t count = joint[static_cast<std::size_t>(b) *
                                      static_cast<std::size_t>(num_classes) +
                                  static_cast<std::size_t>(c)];
        if (count == 0) continue;
        double pxy = static_cast<double>(count) / static_cast<double>(n);
        double px = static_cast<double>(bin_count[
                        static_cast<std::size_t>(b)]) /
                    static_cast<double>(n);
        double py = static_cast<double>(class_count[
                        static_cast<std::size_t>(c)]) /
                    static_cast<double>(n);
        mi += pxy * std::log(pxy / (px * py));
      }
    }
    report.scores[col] = std::max(mi, 0.0);
  }
  return report;
}

std::vector<std::size_t> select_top_k(const ScoreReport& report,
                                      std::size_t k) {
  if (k == 0) throw ValidationError("top-k selection needs k >= 1");
  if (k > report.scores.size()) {
    throw ValidationError("k = " + std::to_string(k) + " exceeds the " +
                          std::to_string(report.scores.size()) +
                          " scored features");
  }
  for (double s : report.scores) {
    if (!std::isfinite(s)) {
      throw ValidationError("score report contains non-finite scores");
    }
  }
  std::vector<std::size_t> order(report.scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) {
                     return report.scores[a] > report.scores[b];
                   });
  order.resize(k);
  std::sort(order.begin(), order.end());
  return order;
}

std::string StepwiseTrace::to_json() const {
  nlohmann::json j;
  j["cv_folds"] = cv_folds;
  j["stop_reason"] = stop_reason;
  j["steps"] = nlohmann::json::array();
  for (const StepwiseStep& s : steps) {
    j["steps"].push_back({{"category", s.category},
                          {"cv_logloss", s.cv_logloss}});
  }
  j["warnings"] = warnings;
  return j.dump(2);
}

void StepwiseTrace::write_json(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << to_json() << "\n";
  if (!out) throw IoError("failed to write " + path.string());
}

void StepwiseTrace::write_csv(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "step,category,cv_logloss\n";
  for (std::size_t i = 0; i < steps.size(); ++i) {
    out << i << "," << steps[i].category << ","
        << format_double(steps[i].cv_logloss) << "\n";
  }
  if (!out) throw IoError("failed to write " + path.string());
}

StepwiseTrace forward_stepwise(const FeatureMatrix& m,
                               const std::vector<std::string>& categories,
                               int cv_folds, const GbtParams& trainer,
                               int num_classes, std::uint64_t seed) {
  if (categories.empty()) {
    throw ValidationError("stepwise selection needs at least one category");
  }
  for (const std::string& cat : categories) {
    if (!m.registry().has(cat)) {
      throw ValidationError("matrix has no category named " + cat);
    }
  }
  for (std::size_t i = 0; i < categories.size(); ++i) {
    for (std::size_t j = i + 1; j < categories.size(); ++j) {
      if (categories[i] == categories[j]) {
        throw ValidationError("duplicate category " + categories[i] +
                              " in stepwise candidate list");
      }
    }
  }
  trainer.validate();

  auto evaluate = [&](const std::vector<std::string>& cats) {
    FeatureMatrix sub = m.select_categories(cats);
    CvReport report = cross_validate(
        sub, cv_folds, seed, num_classes,
        [&](const FeatureMatrix& train, const FeatureMatrix& eval_set) {
          GbtModel model = train_gbt(train, num_classes, trainer);
          return model.predict_proba(eval_set);
        });
    return report.mean_logloss;
  };

  StepwiseTrace trace;
  trace.cv_folds = cv_folds;
  std::vector<std::string> current;
  std::vector<std::string> unused = categories;
  double incumbent = std::numeric_limits<double>::infinity();

  while (!unused.empty()) {
    double best_loss = std::numeric_limits<double>::infinity();
    std::size_t best_dim = 0;
    std::size_t best_idx = unused.size();
    bool any_evaluated = false;
    for (std::size_t i = 0; i < unused.size(); ++i) {
      std::vector<std::string> candidate = current;
      candidate.push_back(unused[i]);
      double loss;
      try {
        loss = evaluate(candidate);
      } catch (const Error& e) {
        trace.warnings.push_back("skipped category " + unused[i] + ": " +
                                 e.what());
        continue;
      }
      any_evaluated = true;
      std::size_t dim = m.registry().span(unused[i]).dim();
      bool better = loss < best_loss ||
                    (loss == best_loss && dim < best_dim);
      if (best_idx == unused.size() || better) {
        best_loss = loss;
        best_dim = dim;
        best_idx = i;
      }
    }
    if (!any_evaluated) {
      trace.stop_reason = "all_candidates_failed";
      return trace;
    }
    if (!(best_loss < incumbent)) {
      trace.stop_reason = "no_improvement";
      return trace;
    }
    incumbent = best_loss;
    current.push_back(unused[best_idx]);
    trace.steps.push_back({unused[best_idx], best_loss});
    unused.erase(unused.begin() + static_cast<std::ptrdiff_t>(best_idx));
  }
  trace.stop_reason = "exhausted";
  return trace;
}

}  // namespace malfuse
