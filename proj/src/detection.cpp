#include "mbias/detection.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <stdexcept>

#include "mbias/errors.hpp"
#include "mbias/io.hpp"
#include "mbias/rng.hpp"

namespace mbias {

namespace {

void check_labels(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) throw std::invalid_argument("scores and labels differ in length");
  for (int l : labels)
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
}

std::pair<int, int> class_counts(std::span<const int> labels) {
  int pos = 0;
  for (int l : labels) pos += l;
  return {pos, static_cast<int>(labels.size()) - pos};
}

}  // namespace

CalibrationThreshold CalibrationThreshold::fixed(double threshold, Direction direction) {
  CalibrationThreshold t;
  t.mean = threshold;
  t.k = 0.0;
  t.direction = direction;
  t.threshold = threshold;
  return t;
}

bool CalibrationThreshold::is_generated(double score) const {
  return direction == Direction::kGreaterIsGenerated ? score > threshold : score < threshold;
}

CalibrationThreshold calibrate_threshold(std::span<const double> real_criteria, double k, Direction direction) {
  if (real_criteria.size() < 2) throw std::invalid_argument("calibration needs at least two real criteria");
  const MeanStd ms = mean_std(real_criteria);
  CalibrationThreshold t;
  t.mean = ms.mean;
  t.std = ms.std;
  t.k = k;
  t.direction = direction;
  t.threshold = direction == Direction::kGreaterIsGenerated ? ms.mean + k * ms.std : ms.mean - k * ms.std;
  return t;
}

double auc(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  if (pos == 0 || neg == 0) throw std::invalid_argument("auc needs both classes");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // midranks, 1-based
  double pos_rank_sum = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    while (j + 1 < order.size() && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k)
      if (labels[order[k]] == 1) pos_rank_sum += mid;
    i = j + 1;
  }
  const double p = pos, n = neg;
  return (pos_rank_sum - p * (p + 1.0) / 2.0) / (p * n);
}

double ap(std::span<const double> scores, std::span<const int> labels) {
  check_labels(scores, labels);
  const auto [pos, neg] = class_counts(labels);
  (void)neg;
  if (pos == 0) throw std::invalid_argument("average precision needs at least one positive");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  Vec precisions;
  int hits = 0;
  for (std::size_t k = 0; k < order.size(); ++k) {
    if (labels[order[k]] == 1) {
      ++hits;
      precisions.push_back(static_cast<double>(hits) / static_cast<double>(k + 1));
    }
  }
  return pairwise_mean(precisions);
}

double accuracy(std::span<const double> scores, std::span<const int> labels, const CalibrationThreshold& threshold) {
  check_labels(scores, labels);
  if (scores.empty()) throw std::invalid_argument("accuracy needs at least one sample");
  std::size_t correct = 0;
  for (std::size_t i = 0; i < scores.size(); ++i)
    if (static_cast<int>(threshold.is_generated(scores[i])) == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(scores.size());
}

DetectionMetrics evaluate_detection(std::span<const double> scores, std::span<const int> labels,
                                    const CalibrationThreshold& threshold) {
  DetectionMetrics m;
  const auto [pos, neg] = class_counts(labels);
  m.n_pos = pos;
  m.n_neg = neg;
  m.auc = auc(scores, labels);
  m.ap = ap(scores, labels);
  m.accuracy = accuracy(scores, labels, threshold);
  return m;
}

nlohmann::json to_json(const DetectionMetrics& m) {
  return {{"auc", m.auc}, {"ap", m.ap}, {"accuracy", m.accuracy}, {"n_pos", m.n_pos}, {"n_neg", m.n_neg}};
}

nlohmann::json to_json(const CalibrationThreshold& t) {
  return {{"mean", t.mean},
          {"std", t.std},
          {"k", t.k},
          {"direction", t.direction == Direction::kGreaterIsGenerated ? "greater-is-generated" : "less-is-generated"},
          {"threshold", t.threshold}};
}

// ---------------------------------------------------------------------------
// Combiners
// ---------------------------------------------------------------------------

const char* combiner_name(CombinerKind kind) {
  switch (kind) {
    case CombinerKind::kLogistic: return "logistic";
    case CombinerKind::kTree: return "tree";
    case CombinerKind::kForest: return "forest";
  }
  return "?";
}

CombinerKind parse_combiner(const std::string& name) {
  if (name == "logistic") return CombinerKind::kLogistic;
  if (name == "tree") return CombinerKind::kTree;
  if (name == "forest") return CombinerKind::kForest;
  throw ConfigError("unknown combiner '" + name + "' (expected logistic, tree or forest)");
}

namespace {

double gini(double pos, double total) {
  if (total == 0.0) return 0.0;
  const double p = pos / total;
  return 2.0 * p * (1.0 - p);
}

struct TreeBuilder {
  const std::vector<Vec>& x;
  std::span<const int> y;
  int max_depth;
  int min_leaf;
  std::vector<TreeNode> nodes;

  int build(std::vector<std::size_t> idx, int depth) {
    double pos = 0.0;
    for (std::size_t i : idx) pos += y[i];
    const double total = static_cast<double>(idx.size());
    const int id = static_cast<int>(nodes.size());
    nodes.push_back(TreeNode{-1, 0.0, -1, -1, pos / total});
    if (depth >= max_depth || pos == 0.0 || pos == total || idx.size() < 2 * static_cast<std::size_t>(min_leaf))
      return id;

    const double parent = gini(pos, total);
    double best_gain = 1e-12;
    int best_feature = -1;
    double best_threshold = 0.0;
    const std::size_t d = x[idx.front()].size();
    std::vector<std::size_t> sorted = idx;
    for (std::size_t f = 0; f < d; ++f) {
      std::stable_sort(sorted.begin(), sorted.end(), [&](std::size_t a, std::size_t b) { return x[a][f] < x[b][f]; });
      double left_pos = 0.0;
      for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
        left_pos += y[sorted[k]];
        const double lo = x[sorted[k]][f], hi = x[sorted[k + 1]][f];
        if (lo == hi) continue;
        const double nl = static_cast<double>(k + 1), nr = total - nl;
        if (nl < min_leaf || nr < min_leaf) continue;
        const double child = (nl * gini(left_pos, nl) + nr * gini(pos - left_pos, nr)) / total;
        const double gain = parent - child;
        if (gain > best_gain) {
          best_gain = gain;
          best_feature = static_cast<int>(f);
          best_threshold = 0.5 * (lo + hi);
        }
      }
    }
    if (best_feature < 0) return id;
    std::vector<std::size_t> left, right;
    for (std::size_t i : idx) (x[i][best_feature] <= best_threshold ? left : right).push_back(i);
    nodes[id].feature = best_feature;
    nodes[id].threshold = best_threshold;
    const int l = build(std::move(left), depth + 1);
    const int r = build(std::move(right), depth + 1);
    nodes[id].left = l;
    nodes[id].right = r;
    return id;
  }
};

double tree_predict(const std::vector<TreeNode>& nodes, std::span<const double> x) {
  int at = 0;
  while (nodes[at].feature >= 0) at = x[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
  return nodes[at].value;
}

}  // namespace

double FeatureCombiner::score(std::span<const double> x) const {
  if (!fitted_) throw std::logic_error("combiner is not fitted");
  if (x.size() != dim_) throw std::invalid_argument("feature dimension mismatch");
  switch (kind_) {
    case CombinerKind::kLogistic: {
      double z = bias_;
      for (std::size_t k = 0; k < dim_; ++k) z += weights_[k] * (x[k] - center_[k]) / scale_[k];
      return z;
    }
    case CombinerKind::kTree: return tree_predict(trees_.front(), x);
    case CombinerKind::kForest: {
      Vec votes(trees_.size());
      for (std::size_t b = 0; b < trees_.size(); ++b) votes[b] = tree_predict(trees_[b], x);
      return pairwise_mean(votes);
    }
  }
  return 0.0;
}

FeatureCombiner moe_fit(const std::vector<Vec>& features, std::span<const int> labels, CombinerKind kind,
                        const CombinerHyper& hyper, std::uint64_t seed) {
  if (features.size() != labels.size()) throw std::invalid_argument("features and labels differ in length");
  if (features.empty()) throw std::invalid_argument("no training samples");
  const auto [pos, neg] = class_counts(labels);
  for (int l : labels)
    if (l != 0 && l != 1) throw std::invalid_argument("labels must be 0 or 1");
  if (pos < 2 || neg < 2) throw std::invalid_argument("combiner needs at least two samples of each class");
  const std::size_t d = features.front().size();
  for (const Vec& f : features)
    if (f.size() != d || !all_finite(f)) throw std::invalid_argument("features must be finite and equal-length");
  if (hyper.max_depth < 0 || hyper.min_leaf < 1 || hyper.n_trees < 1 || hyper.iterations < 0)
    throw std::invalid_argument("invalid combiner hyperparameters");

  FeatureCombiner c;
  c.kind_ = kind;
  c.dim_ = d;
  const std::size_t n = features.size();

  if (kind == CombinerKind::kLogistic) {
    c.center_.assign(d, 0.0);
    c.scale_.assign(d, 1.0);
    Vec col(n);
    for (std::size_t k = 0; k < d; ++k) {
      for (std::size_t i = 0; i < n; ++i) col[i] = features[i][k];
      const MeanStd ms = mean_std(col);
      c.center_[k] = ms.mean;
      if (ms.std > 0.0) c.scale_[k] = ms.std;
    }
    c.weights_.assign(d, 0.0);
    c.bias_ = 0.0;
    std::vector<Vec> z(n, Vec(d));
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t k = 0; k < d; ++k) z[i][k] = (features[i][k] - c.center_[k]) / c.scale_[k];
    Vec resid(n), term(n);
    for (int it = 0; it < hyper.iterations; ++it) {
      for (std::size_t i = 0; i < n; ++i) {
        const double logit = c.bias_ + dot(c.weights_, z[i]);
        resid[i] = 1.0 / (1.0 + std::exp(-logit)) - labels[i];
      }
      const double gb = pairwise_mean(resid);
      Vec gw(d);
      for (std::size_t k = 0; k < d; ++k) {
        for (std::size_t i = 0; i < n; ++i) term[i] = resid[i] * z[i][k];
        gw[k] = pairwise_mean(term) + hyper.l2 * c.weights_[k];
      }
      c.bias_ -= hyper.lr * gb;
      for (std::size_t k = 0; k < d; ++k) c.weights_[k] -= hyper.lr * gw[k];
    }
    if (!all_finite(c.weights_) || !std::isfinite(c.bias_)) throw NumericalError("logistic fit diverged");
  } else {
    const int n_trees = kind == CombinerKind::kTree ? 1 : hyper.n_trees;
    for (int b = 0; b < n_trees; ++b) {
      std::vector<std::size_t> idx(n);
      if (kind == CombinerKind::kTree) {
        std::iota(idx.begin(), idx.end(), 0);
      } else {
        RngStream rng = RngStream::substream(seed, static_cast<std::uint64_t>(b));
        for (std::size_t i = 0; i < n; ++i) idx[i] = rng.below(n);
      }
      TreeBuilder builder{features, labels, hyper.max_depth, hyper.min_leaf, {}};
      builder.build(std::move(idx), 0);
      c.trees_.push_back(std::move(builder.nodes));
    }
  }
  c.fitted_ = true;
  return c;
}

Vec moe_score(const FeatureCombiner& combiner, const std::vector<Vec>& features) {
  if (!combiner.fitted()) throw std::logic_error("combiner is not fitted");
  Vec out;
  out.reserve(features.size());
  for (const Vec& f : features) out.push_back(combiner.score(f));
  return out;
}

nlohmann::json FeatureCombiner::to_json() const {
  if (!fitted_) throw std::logic_error("combiner is not fitted");
  nlohmann::json doc{{"kind", combiner_name(kind_)}, {"dim", dim_}};
  if (kind_ == CombinerKind::kLogistic) {
    doc["center"] = center_;
    doc["scale"] = scale_;
    doc["weights"] = weights_;
    doc["bias"] = bias_;
  } else {
    nlohmann::json trees = nlohmann::json::array();
    for (const auto& t : trees_) {
      nlohmann::json nodes = nlohmann::json::array();
      for (const TreeNode& nd : t)
        nodes.push_back({{"feature", nd.feature},
                         {"threshold", nd.threshold},
                         {"left", nd.left},
                         {"right", nd.right},
                         {"value", nd.value}});
      trees.push_back(std::move(nodes));
    }
    doc["trees"] = std::move(trees);
  }
  return doc;
}

FeatureCombiner FeatureCombiner::from_json(const nlohmann::json& doc) {
  try {
    FeatureCombiner c;
    c.kind_ = parse_combiner(doc.at("kind").get<std::string>());
    c.dim_ = doc.at("dim").get<std::size_t>();
    if (c.kind_ == CombinerKind::kLogistic) {
      c.center_ = doc.at("center").get<Vec>();
      c.scale_ = doc.at("scale").get<Vec>();
      c.weights_ = doc.at("weights").get<Vec>();
      c.bias_ = doc.at("bias").get<double>();
      if (c.center_.size() != c.dim_ || c.scale_.size() != c.dim_ || c.weights_.size() != c.dim_)
        throw ConfigError("combiner JSON: parameter length mismatch");
    } else {
      for (const auto& t : doc.at("trees")) {
        std::vector<TreeNode> nodes;
        for (const auto& nd : t)
          nodes.push_back(TreeNode{nd.at("feature").get<int>(), nd.at("threshold").get<double>(),
                                   nd.at("left").get<int>(), nd.at("right").get<int>(), nd.at("value").get<double>()});
        const int count = static_cast<int>(nodes.size());
        for (const TreeNode& nd : nodes)
          if (nd.feature >= static_cast<int>(c.dim_) ||
              (nd.feature >= 0 && (nd.left <= 0 || nd.left >= count || nd.right <= 0 || nd.right >= count)))
            throw ConfigError("combiner JSON: malformed tree");
        if (nodes.empty()) throw ConfigError("combiner JSON: empty tree");
        c.trees_.push_back(std::move(nodes));
      }
      if (c.trees_.empty()) throw ConfigError("combiner JSON: no trees");
    }
    c.fitted_ = true;
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("combiner JSON: ") + e.what());
  }
}

ScoreTable read_score_table(std::istream& is) {
  const CsvTable t = read_csv(is);
  const std::size_t ci = t.column("id"), cs = t.column("score"), cl = t.column("label");
  ScoreTable out;
  for (const auto& row : t.rows) {
    const long long label = parse_int(row[cl]);
    if (label != 0 && label != 1) throw ConfigError("label must be 0 or 1, got '" + row[cl] + "'");
    out.ids.push_back(row[ci]);
    out.scores.push_back(parse_double(row[cs]));
    out.labels.push_back(static_cast<int>(label));
  }
  return out;
}

void write_score_table(std::ostream& os, const ScoreTable& table) {
  os << "id,score,label\n";
  for (std::size_t i = 0; i < table.ids.size(); ++i)
    os << table.ids[i] << ',' << format_double(table.scores[i]) << ',' << table.labels[i] << '\n';
}

}  // namespace mbias
