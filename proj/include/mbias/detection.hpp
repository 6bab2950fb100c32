#pragma once

// Decisions and scores from criterion values: threshold calibration on real
// data only, ranking metrics, and small classifiers that combine features.
// Label convention: 1 = generated (positive), 0 = real.

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mbias/linalg.hpp"

namespace mbias {

enum class Direction { kGreaterIsGenerated, kLessIsGenerated };

struct CalibrationThreshold {
  double mean = 0.0;
  double std = 0.0;
  double k = 2.0;
  Direction direction = Direction::kGreaterIsGenerated;
  double threshold = 0.0;  ///< mean + k std, or mean - k std for less-is-generated

  /// A bare threshold with no calibration statistics behind it.
  static CalibrationThreshold fixed(double threshold, Direction direction = Direction::kGreaterIsGenerated);

  /// Strictly beyond the threshold in the generated direction.
  bool is_generated(double score) const;
};

/// Unbiased mean/std of real-only criteria. Needs at least two values.
CalibrationThreshold calibrate_threshold(std::span<const double> real_criteria, double k = 2.0,
                                         Direction direction = Direction::kGreaterIsGenerated);

/// Probability that a random positive outranks a random negative; ties count 1/2.
double auc(std::span<const double> scores, std::span<const int> labels);

/// Mean of precision@k over the ranks k of the positives, scores sorted
/// descending; equal scores keep their input order.
double ap(std::span<const double> scores, std::span<const int> labels);

double accuracy(std::span<const double> scores, std::span<const int> labels, const CalibrationThreshold& threshold);

struct DetectionMetrics {
  double auc = 0.0;
  double ap = 0.0;
  double accuracy = 0.0;
  int n_pos = 0;
  int n_neg = 0;
};

DetectionMetrics evaluate_detection(std::span<const double> scores, std::span<const int> labels,
                                    const CalibrationThreshold& threshold);

nlohmann::json to_json(const DetectionMetrics& m);
nlohmann::json to_json(const CalibrationThreshold& t);

// ---------------------------------------------------------------------------
// Feature combiners
// ---------------------------------------------------------------------------

enum class CombinerKind { kLogistic, kTree, kForest };

const char* combiner_name(CombinerKind kind);
CombinerKind parse_combiner(const std::string& name);  ///< throws ConfigError

struct CombinerHyper {
  int iterations = 200;  ///< logistic gradient steps
  double lr = 0.5;       ///< logistic step size
  double l2 = 0.0;       ///< logistic ridge penalty
  int max_depth = 3;     ///< tree / forest depth limit
  int min_leaf = 1;      ///< minimum samples per leaf
  int n_trees = 50;      ///< forest size
};

/// Axis-aligned binary tree stored as a node array; node 0 is the root.
/// Leaves carry the fraction of positives that reached them.
struct TreeNode {
  int feature = -1;  ///< -1 marks a leaf
  double threshold = 0.0;
  int left = -1;   ///< taken when x[feature] <= threshold
  int right = -1;
  double value = 0.0;
};

class FeatureCombiner {
 public:
  FeatureCombiner() = default;

  bool fitted() const { return fitted_; }
  CombinerKind kind() const { return kind_; }
  std::size_t dim() const { return dim_; }

  /// Generated-likelihood score of one feature vector. Logistic returns the
  /// logit; tree and forest return the (mean) leaf positive fraction.
  double score(std::span<const double> x) const;

  nlohmann::json to_json() const;
  static FeatureCombiner from_json(const nlohmann::json& doc);

 private:
  friend FeatureCombiner moe_fit(const std::vector<Vec>&, std::span<const int>, CombinerKind, const CombinerHyper&,
                                 std::uint64_t);
  bool fitted_ = false;
  CombinerKind kind_ = CombinerKind::kLogistic;
  std::size_t dim_ = 0;
  // logistic: logit = bias_ + sum_k weights_[k] * (x[k] - center_[k]) / scale_[k]
  Vec center_, scale_, weights_;
  double bias_ = 0.0;
  std::vector<std::vector<TreeNode>> trees_;
};

/// Fits a combiner. Needs at least two samples of each class. Logistic is
/// full-batch gradient descent on the mean log-loss over standardized
/// features; the tree is greedy CART on Gini impurity; the forest bags trees,
/// tree b resampling with RngStream::substream(seed, b).
FeatureCombiner moe_fit(const std::vector<Vec>& features, std::span<const int> labels, CombinerKind kind,
                        const CombinerHyper& hyper, std::uint64_t seed);

Vec moe_score(const FeatureCombiner& combiner, const std::vector<Vec>& features);

/// Rows of an id,score,label CSV (label 1 = generated).
struct ScoreTable {
  std::vector<std::string> ids;
  Vec scores;
  std::vector<int> labels;
};
ScoreTable read_score_table(std::istream& is);
void write_score_table(std::ostream& os, const ScoreTable& table);

}  // namespace mbias
