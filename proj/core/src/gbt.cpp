#include "malfuse/gbt.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <utility>

#include "malfuse/errors.hpp"
#include "malfuse/eval.hpp"

namespace malfuse {

namespace {

constexpr char kMagic[4] = {'M', 'F', 'G', 'B'};
constexpr std::uint32_t kVersion = 1;
constexpr double kProbClip = 1e-15;

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Stable softmax of one row of margins.
void softmax_into(const double* margins, int c, double* out) {
  double hi = margins[0];
  for (int k = 1; k < c; ++k) hi = std::max(hi, margins[k]);
  double sum = 0.0;
  for (int k = 0; k < c; ++k) {
    out[k] = std::exp(margins[k] - hi);
    sum += out[k];
  }
  for (int k = 0; k < c; ++k) out[k] /= sum;
}

double logloss_from_margins(const std::vector<double>& margins,
                            const std::vector<int>& labels, int c) {
  std::vector<double> p(static_cast<std::size_t>(c));
  double total = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    softmax_into(&margins[i * static_cast<std::size_t>(c)], c, p.data());
    double q = std::min(std::max(p[static_cast<std::size_t>(labels[i])],
                                 kProbClip),
                        1.0 - kProbClip);
    total -= std::log(q);
  }
  return total / static_cast<double>(labels.size());
}

struct SplitCandidate {
  int feature = -1;
  double threshold = 0.0;
  double gain = 0.0;
};

// Grows one regression tree on (g, h) by exact greedy split search over the
// sampled rows and columns.
class TreeBuilder {
 public:
  TreeBuilder(const FeatureMatrix& matrix, const std::vector<double>& g,
              const std::vector<double>& h, const GbtParams& params,
              std::vector<int> columns)
      : matrix_(matrix),
        g_(g),
        h_(h),
        params_(params),
        columns_(std::move(columns)) {}

  Tree build(std::vector<std::size_t> rows) {
    Tree tree;
    tree_ = &tree;
    grow(rows, 0);
    tree_ = nullptr;
    return tree;
  }

 private:
  double leaf_weight(double g_sum, double h_sum) const {
    double denom = h_sum + params_.l2_lambda;
    return denom > 0.0 ? -g_sum / denom : 0.0;
  }

  SplitCandidate find_split(const std::vector<std::size_t>& rows,
                            double g_sum, double h_sum) const {
    SplitCandidate best;
    double lambda = params_.l2_lambda;
    double parent_denom = h_sum + lambda;
    if (parent_denom <= 0.0) return best;
    double parent_term = g_sum * g_sum / parent_denom;
    std::vector<std::pair<double, std::size_t>> sorted;
    sorted.reserve(rows.size());
    for (int f : columns_) {
      sorted.clear();
      for (std::size_t r : rows) {
        sorted.emplace_back(matrix_.at(r, static_cast<std::size_t>(f)), r);
      }
      std::sort(sorted.begin(), sorted.end(),
                [](const auto& a, const auto& b) { return a.first < b.first; });
      double gl = 0.0;
      double hl = 0.0;
      for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
        gl += g_[sorted[i].second];
        hl += h_[sorted[i].second];
        double lo = sorted[i].first;
        double hi = sorted[i + 1].first;
        if (!(lo < hi)) continue;  // split only between distinct values
        double gr = g_sum - gl;
        double hr = h_sum - hl;
        if (hl < params_.min_child_weight || hr < params_.min_child_weight) {
          continue;
        }
        if (hl + lambda <= 0.0 || hr + lambda <= 0.0) continue;
        double gain = 0.5 * (gl * gl / (hl + lambda) + gr * gr / (hr + lambda) -
                             parent_term) -
                      params_.gamma;
        if (gain > 0.0 && gain > best.gain) {
          double threshold = 0.5 * (lo + hi);
          // Midpoints of adjacent doubles can round down to the lower value;
          // nudge so the "< threshold" routing matches the scanned boundary.
          if (!(lo < threshold)) threshold = hi;
          best.feature = f;
          best.threshold = threshold;
          best.gain = gain;
        }
      }
    }
    return best;
  }

  int grow(std::vector<std::size_t>& rows, int depth) {
    double g_sum = 0.0;
    double h_sum = 0.0;
    for (std::size_t r : rows) {
      g_sum += g_[r];
      h_sum += h_[r];
    }
    int idx = static_cast<int>(tree_->nodes.size());
    tree_->nodes.emplace_back();
    tree_->nodes[static_cast<std::size_t>(idx)].value =
        leaf_weight(g_sum, h_sum);
    if (depth >= params_.max_depth || rows.size() < 2) return idx;

    SplitCandidate best = find_split(rows, g_sum, h_sum);
    if (best.feature < 0) return idx;

    std::vector<std::size_t> left;
    std::vector<std::size_t> right;
    for (std::size_t r : rows) {
      if (matrix_.at(r, static_cast<std::size_t>(best.feature)) <
          best.threshold) {
        left.push_back(r);
      } else {
        right.push_back(r);
      }
    }
    rows.clear();
    rows.shrink_to_fit();
    int left_idx = grow(left, depth + 1);
    int right_idx = grow(right, depth + 1);
    TreeNode& node = tree_->nodes[static_cast<std::size_t>(idx)];
    node.feature = best.feature;
    node.threshold = best.threshold;
    node.gain = best.gain;
    node.left = left_idx;
    node.right = right_idx;
    return idx;
  }

  const FeatureMatrix& matrix_;
  const std::vector<double>& g_;
  const std::vector<double>& h_;
  const GbtParams& params_;
  std::vector<int> columns_;
  Tree* tree_ = nullptr;
};

std::vector<std::size_t> sample_rows(std::size_t n, double subsample,
                                     std::mt19937_64& rng) {
  std::vector<std::size_t> rows;
  if (subsample >= 1.0) {
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
    return rows;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (uniform01(rng) < subsample) rows.push_back(i);
  }
  if (rows.empty()) {  // degenerate draw: fall back to the full set
    rows.resize(n);
    std::iota(rows.begin(), rows.end(), std::size_t{0});
  }
  return rows;
}

std::vector<int> sample_columns(std::size_t dim, double colsample,
                                std::mt19937_64& rng) {
  std::vector<int> cols(dim);
  std::iota(cols.begin(), cols.end(), 0);
  if (colsample >= 1.0) return cols;
  std::size_t keep = static_cast<std::size_t>(
      std::ceil(colsample * static_cast<double>(dim)));
  keep = std::max<std::size_t>(std::min(keep, dim), 1);
  for (std::size_t i = 0; i < keep; ++i) {
    std::size_t j = i + static_cast<std::size_t>(rng() % (dim - i));
    std::swap(cols[i], cols[j]);
  }
  cols.resize(keep);
  std::sort(cols.begin(), cols.end());
  return cols;
}

void check_training_matrix(const FeatureMatrix& m, int num_classes,
                           const char* what) {
  if (m.rows() == 0) {
    throw ValidationError(std::string(what) + " matrix has no rows");
  }
  for (std::size_t r = 0; r < m.rows(); ++r) {
    int label = m.labels()[r];
    if (label < 0) {
      throw ValidationError(std::string(what) +
                            " matrix contains unlabeled rows");
    }
    if (label >= num_classes) {
      throw ValidationError(std::string(what) + " label " +
                            std::to_string(label) + " is out of range for " +
                            std::to_string(num_classes) + " classes");
    }
    for (std::size_t c = 0; c < m.dim(); ++c) {
      if (!std::isfinite(m.at(r, c))) {
        throw ValidationError(std::string(what) +
                              " matrix has a non-finite value at row " +
                              std::to_string(r) + ", column " +
                              std::to_string(c));
      }
    }
  }
}

// --- binary serialization helpers -----------------------------------------

void put_bytes(std::string& buf, const void* p, std::size_t n) {
  buf.append(static_cast<const char*>(p), n);
}

void put_u32(std::string& buf, std::uint32_t v) { put_bytes(buf, &v, 4); }
void put_u64(std::string& buf, std::uint64_t v) { put_bytes(buf, &v, 8); }
void put_i32(std::string& buf, std::int32_t v) { put_bytes(buf, &v, 4); }
void put_f64(std::string& buf, double v) { put_bytes(buf, &v, 8); }

void put_str(std::string& buf, const std::string& s) {
  put_u64(buf, s.size());
  buf.append(s);
}

struct Cursor {
  const char* data;
  std::size_t size;
  std::size_t off = 0;

  void need(std::size_t n) const {
    if (off + n > size) throw ParseError("model file truncated");
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v;
    std::memcpy(&v, data + off, 4);
    off += 4;
    return v;
  }
  std::uint64_t u64() {
    need(8);
    std::uint64_t v;
    std::memcpy(&v, data + off, 8);
    off += 8;
    return v;
  }
  std::int32_t i32() { return static_cast<std::int32_t>(u32()); }
  double f64() {
    need(8);
    double v;
    std::memcpy(&v, data + off, 8);
    off += 8;
    return v;
  }
  std::string str() {
    std::uint64_t n = u64();
    if (n > size - off) throw ParseError("model file truncated");
    std::string s(data + off, static_cast<std::size_t>(n));
    off += static_cast<std::size_t>(n);
    return s;
  }
};

}  // namespace

void GbtParams::validate() const {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw ValidationError("eta must be a finite value >= 0");
  }
  if (max_depth < 1) throw ValidationError("max_depth must be >= 1");
  if (std::isnan(gamma) || gamma < 0.0) {
    throw ValidationError("gamma must be >= 0");
  }
  if (!(min_child_weight >= 0.0) || !std::isfinite(min_child_weight)) {
    throw ValidationError("min_child_weight must be a finite value >= 0");
  }
  if (!(colsample_bytree > 0.0) || colsample_bytree > 1.0) {
    throw ValidationError("colsample_bytree must be in (0, 1]");
  }
  if (!(subsample > 0.0) || subsample > 1.0) {
    throw ValidationError("subsample must be in (0, 1]");
  }
  if (num_rounds < 1) throw ValidationError("num_rounds must be >= 1");
  if (!(l2_lambda >= 0.0) || !std::isfinite(l2_lambda)) {
    throw ValidationError("l2_lambda must be a finite value >= 0");
  }
  if (early_stop_patience < 0) {
    throw ValidationError("early_stop_patience must be >= 0");
  }
}

int Tree::route(const double* row) const {
  int node = 0;
  while (!nodes[static_cast<std::size_t>(node)].is_leaf()) {
    const TreeNode& n = nodes[static_cast<std::size_t>(node)];
    node = row[n.feature] < n.threshold ? n.left : n.right;
  }
  return node;
}

int Tree::depth() const {
  // Iterative DFS carrying (node, depth); trees are tiny so this is cheap.
  int deepest = 0;
  std::vector<std::pair<int, int>> stack = {{0, 0}};
  while (!stack.empty()) {
    auto [idx, d] = stack.back();
    stack.pop_back();
    const TreeNode& n = nodes[static_cast<std::size_t>(idx)];
    if (n.is_leaf()) {
      deepest = std::max(deepest, d);
    } else {
      stack.emplace_back(n.left, d + 1);
      stack.emplace_back(n.right, d + 1);
    }
  }
  return deepest;
}

GbtModel::GbtModel(GbtParams params, int num_classes,
                   std::vector<std::string> feature_names,
                   std::vector<Tree> trees, std::uint64_t config_hash)
    : params_(params),
      num_classes_(num_classes),
      feature_names_(std::move(feature_names)),
      trees_(std::move(trees)),
      config_hash_(config_hash) {}

std::vector<double> GbtModel::margins(const double* row) const {
  std::vector<double> m(static_cast<std::size_t>(num_classes_), 0.0);
  for (std::size_t t = 0; t < trees_.size(); ++t) {
    int cls = static_cast<int>(t % static_cast<std::size_t>(num_classes_));
    m[static_cast<std::size_t>(cls)] += params_.eta * trees_[t].score(row);
  }
  return m;
}

std::vector<double> GbtModel::predict_row(const double* row) const {
  if (num_classes_ == 0 || trees_.empty()) {
    int c = num_classes_ > 0 ? num_classes_ : 1;
    return std::vector<double>(static_cast<std::size_t>(c),
                               1.0 / static_cast<double>(c));
  }
  std::vector<double> m = margins(row);
  std::vector<double> p(m.size());
  softmax_into(m.data(), num_classes_, p.data());
  return p;
}

std::vector<std::vector<double>> GbtModel::predict_proba(
    const FeatureMatrix& m) const {
  if (m.dim() != feature_names_.size()) {
    throw ValidationError("feature dimension mismatch: model expects " +
                          std::to_string(feature_names_.size()) +
                          " columns, matrix has " + std::to_string(m.dim()));
  }
  std::vector<std::vector<double>> out;
  out.reserve(m.rows());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    out.push_back(predict_row(m.row(r)));
  }
  return out;
}

std::vector<int> GbtModel::predict_class(const FeatureMatrix& m) const {
  std::vector<std::vector<double>> probs = predict_proba(m);
  std::vector<int> out;
  out.reserve(probs.size());
  for (const std::vector<double>& p : probs) out.push_back(argmax_class(p));
  return out;
}

void GbtModel::save(const std::filesystem::path& path) const {
  std::string buf;
  put_bytes(buf, kMagic, 4);
  put_u32(buf, kVersion);
  put_f64(buf, params_.eta);
  put_i32(buf, params_.max_depth);
  put_f64(buf, params_.gamma);
  put_f64(buf, params_.min_child_weight);
  put_f64(buf, params_.colsample_bytree);
  put_f64(buf, params_.subsample);
  put_i32(buf, params_.num_rounds);
  put_f64(buf, params_.l2_lambda);
  put_u64(buf, params_.seed);
  put_i32(buf, params_.early_stop_patience);
  put_u64(buf, config_hash_);
  put_i32(buf, num_classes_);
  put_u64(buf, feature_names_.size());
  for (const std::string& name : feature_names_) put_str(buf, name);
  put_u32(buf, static_cast<std::uint32_t>(trees_.size()));
  for (const Tree& tree : trees_) {
    put_u32(buf, static_cast<std::uint32_t>(tree.nodes.size()));
    for (const TreeNode& n : tree.nodes) {
      put_i32(buf, n.feature);
      put_f64(buf, n.threshold);
      put_f64(buf, n.value);
      put_f64(buf, n.gain);
      put_i32(buf, n.left);
      put_i32(buf, n.right);
    }
  }
  put_u64(buf, fnv1a64(buf.data(), buf.size()));

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  out.flush();
  if (!out) throw IoError("failed to write " + path.string());
}

GbtModel GbtModel::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string buf = ss.str();
  if (buf.size() < 16) throw ParseError("model file truncated");
  if (std::memcmp(buf.data(), kMagic, 4) != 0) {
    throw ParseError(path.string() + " is not a boosted-tree model file");
  }
  std::uint64_t stored = 0;
  std::memcpy(&stored, buf.data() + buf.size() - 8, 8);
  if (stored != fnv1a64(buf.data(), buf.size() - 8)) {
    throw ParseError("model file checksum mismatch in " + path.string());
  }

  Cursor cur{buf.data(), buf.size() - 8, 4};
  std::uint32_t version = cur.u32();
  if (version != kVersion) {
    throw ParseError("unsupported model file version " +
                     std::to_string(version));
  }
  GbtParams params;
  params.eta = cur.f64();
  params.max_depth = cur.i32();
  params.gamma = cur.f64();
  params.min_child_weight = cur.f64();
  params.colsample_bytree = cur.f64();
  params.subsample = cur.f64();
  params.num_rounds = cur.i32();
  params.l2_lambda = cur.f64();
  params.seed = cur.u64();
  params.early_stop_patience = cur.i32();
  std::uint64_t config_hash = cur.u64();
  int num_classes = cur.i32();
  if (num_classes < 2) {
    throw ParseError("model file declares fewer than two classes");
  }
  std::uint64_t n_features = cur.u64();
  std::vector<std::string> names;
  names.reserve(static_cast<std::size_t>(n_features));
  for (std::uint64_t i = 0; i < n_features; ++i) names.push_back(cur.str());
  std::uint32_t n_trees = cur.u32();
  if (n_trees % static_cast<std::uint32_t>(num_classes) != 0) {
    throw ParseError("model file tree count is not a multiple of the class "
                     "count");
  }
  std::vector<Tree> trees;
  trees.reserve(n_trees);
  for (std::uint32_t t = 0; t < n_trees; ++t) {
    std::uint32_t n_nodes = cur.u32();
    if (n_nodes == 0) throw ParseError("model file contains an empty tree");
    Tree tree;
    tree.nodes.resize(n_nodes);
    for (std::uint32_t i = 0; i < n_nodes; ++i) {
      TreeNode& n = tree.nodes[i];
      n.feature = cur.i32();
      n.threshold = cur.f64();
      n.value = cur.f64();
      n.gain = cur.f64();
      n.left = cur.i32();
      n.right = cur.i32();
      bool leaf = n.feature < 0;
      bool children_ok =
          leaf ? (n.left == -1 && n.right == -1)
               : (n.left > static_cast<int>(i) && n.left < static_cast<int>(n_nodes) &&
                  n.right > static_cast<int>(i) &&
                  n.right < static_cast<int>(n_nodes));
      if (!children_ok ||
          (!leaf && n.feature >= static_cast<int>(n_features))) {
        throw ParseError("model file contains a malformed tree node");
      }
    }
    trees.push_back(std::move(tree));
  }
  if (cur.off != cur.size) throw ParseError("model file has trailing bytes");
  return GbtModel(params, num_classes, std::move(names), std::move(trees),
                  config_hash);
}

GbtModel train_gbt(const FeatureMatrix& train, int num_classes,
                   const GbtParams& params, const FeatureMatrix* eval_set,
                   std::vector<RoundMetrics>* history) {
  params.validate();
  if (num_classes < 2) throw ValidationError("num_classes must be >= 2");
  check_training_matrix(train, num_classes, "training");
  {
    int first = train.labels()[0];
    bool multi = false;
    for (int label : train.labels()) {
      if (label != first) {
        multi = true;
        break;
      }
    }
    if (!multi) {
      throw ValidationError(
          "training labels contain a single class; need at least two");
    }
  }
  if (eval_set != nullptr) {
    if (eval_set->dim() != train.dim()) {
      throw ValidationError("eval set feature dimension " +
                            std::to_string(eval_set->dim()) +
                            " does not match training dimension " +
                            std::to_string(train.dim()));
    }
    check_training_matrix(*eval_set, num_classes, "eval");
  }
  if (history != nullptr) history->clear();

  const std::size_t n = train.rows();
  const std::size_t c = static_cast<std::size_t>(num_classes);
  std::vector<double> train_margins(n * c, 0.0);
  std::vector<double> eval_margins(
      eval_set != nullptr ? eval_set->rows() * c : 0, 0.0);
  std::vector<double> probs(n * c, 0.0);
  std::vector<double> g(n, 0.0);
  std::vector<double> h(n, 0.0);
  std::mt19937_64 rng(params.seed);
  std::vector<Tree> trees;
  trees.reserve(static_cast<std::size_t>(params.num_rounds) * c);

  bool early_stopping = eval_set != nullptr && params.early_stop_patience > 0;
  double best_eval = std::numeric_limits<double>::infinity();
  int best_round = -1;
  int rounds_since_best = 0;

  for (int round = 0; round < params.num_rounds; ++round) {
    for (std::size_t i = 0; i < n; ++i) {
      softmax_into(&train_margins[i * c], num_classes, &probs[i * c]);
    }
    for (int cls = 0; cls < num_classes; ++cls) {
      for (std::size_t i = 0; i < n; ++i) {
        double p = probs[i * c + static_cast<std::size_t>(cls)];
        double y = train.labels()[i] == cls ? 1.0 : 0.0;
        g[i] = p - y;
        h[i] = p * (1.0 - p);
      }
      std::vector<std::size_t> rows = sample_rows(n, params.subsample, rng);
      std::vector<int> cols =
          sample_columns(train.dim(), params.colsample_bytree, rng);
      TreeBuilder builder(train, g, h, params, std::move(cols));
      Tree tree = builder.build(std::move(rows));
      for (std::size_t i = 0; i < n; ++i) {
        train_margins[i * c + static_cast<std::size_t>(cls)] +=
            params.eta * tree.score(train.row(i));
      }
      if (eval_set != nullptr) {
        for (std::size_t i = 0; i < eval_set->rows(); ++i) {
          eval_margins[i * c + static_cast<std::size_t>(cls)] +=
              params.eta * tree.score(eval_set->row(i));
        }
      }
      trees.push_back(std::move(tree));
    }

    RoundMetrics metrics;
    metrics.round = round;
    metrics.train_logloss =
        logloss_from_margins(train_margins, train.labels(), num_classes);
    if (eval_set != nullptr) {
      metrics.eval_logloss =
          logloss_from_margins(eval_margins, eval_set->labels(), num_classes);
    }
    if (history != nullptr) history->push_back(metrics);

    if (early_stopping) {
      if (metrics.eval_logloss < best_eval) {
        best_eval = metrics.eval_logloss;
        best_round = round;
        rounds_since_best = 0;
      } else {
        ++rounds_since_best;
      }
      if (rounds_since_best >= params.early_stop_patience) break;
    }
  }

  // With early stopping active, keep only the rounds up to the best one.
  if (early_stopping && best_round >= 0) {
    trees.resize(static_cast<std::size_t>(best_round + 1) * c);
  }
  return GbtModel(params, num_classes, train.registry().prefixed_names(),
                  std::move(trees), train.config_hash());
}

std::vector<ImportanceEntry> feature_importance(const GbtModel& model,
                                                ImportanceKind kind,
                                                bool by_category) {
  const std::vector<std::string>& names = model.feature_names();
  std::vector<double> weight(names.size(), 0.0);
  std::vector<double> gain(names.size(), 0.0);
  for (const Tree& tree : model.trees()) {
    for (const TreeNode& n : tree.nodes) {
      if (n.is_leaf()) continue;
      weight[static_cast<std::size_t>(n.feature)] += 1.0;
      gain[static_cast<std::size_t>(n.feature)] += n.gain;
    }
  }

  std::vector<ImportanceEntry> entries;
  if (by_category) {
    std::vector<std::string> order;
    std::vector<std::size_t> slot(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      std::string cat = names[i].substr(0, names[i].find('.'));
      auto it = std::find(order.begin(), order.end(), cat);
      if (it == order.end()) {
        slot[i] = order.size();
        order.push_back(cat);
      } else {
        slot[i] = static_cast<std::size_t>(it - order.begin());
      }
    }
    entries.resize(order.size());
    for (std::size_t i = 0; i < order.size(); ++i) entries[i].name = order[i];
    for (std::size_t i = 0; i < names.size(); ++i) {
      entries[slot[i]].weight += weight[i];
      entries[slot[i]].total_gain += gain[i];
    }
  } else {
    entries.resize(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      entries[i].name = names[i];
      entries[i].weight = weight[i];
      entries[i].total_gain = gain[i];
    }
  }
  for (ImportanceEntry& e : entries) {
    e.avg_gain = e.weight > 0.0 ? e.total_gain / e.weight : 0.0;
  }
  std::stable_sort(entries.begin(), entries.end(),
                   [kind](const ImportanceEntry& a, const ImportanceEntry& b) {
                     return kind == ImportanceKind::kWeight
                                ? a.weight > b.weight
                                : a.avg_gain > b.avg_gain;
                   });
  return entries;
}

}  // namespace malfuse
