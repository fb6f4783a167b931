#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "gridcast/layers.hpp"
#include "gridcast/split.hpp"

namespace gridcast {

struct GbtHyperParams {
  int n_trees = 300;
  double learning_rate = 0.1;
  int max_depth = 4;
  int min_leaf = 5;
  double l2_leaf = 1.0;   // leaf-value shrinkage: value = sum / (count + l2_leaf)
  double subsample = 0.8; // per-tree row fraction
  std::uint64_t seed = 0;
};

struct TreeNode {
  int feature = -1;        // -1 marks a leaf
  double threshold = 0.0;  // go left when x[feature] <= threshold
  int left = -1;
  int right = -1;
  double value = 0.0;      // leaf value

  bool is_leaf() const { return feature < 0; }
};

struct RegressionTree {
  std::vector<TreeNode> nodes;

  double predict_row(std::span<const double> row) const {
    int at = 0;
    while (!nodes[at].is_leaf())
      at = row[nodes[at].feature] <= nodes[at].threshold ? nodes[at].left : nodes[at].right;
    return nodes[at].value;
  }
};

/// Stagewise least-squares boosted trees with exact greedy splits.
/// prediction = base_score + learning_rate * sum(tree outputs).
class GbtModel {
 public:
  double base_score = 0.0;
  double learning_rate = 0.1;
  int n_features = 0;
  std::vector<RegressionTree> trees;
  GbtHyperParams hyperparams;

  double predict_row(std::span<const double> row) const {
    double p = base_score;
    for (const RegressionTree& t : trees) p += learning_rate * t.predict_row(row);
    return p;
  }

  std::vector<double> predict(const FeatureMatrix& features, std::span<const int> ids) const;

  /// Sum of squared leaf values across trees (the model's continuous
  /// parameter norm used in the regularized objective).
  double sum_squared_leaf_values() const;

  std::string to_json() const;
  static GbtModel from_json(const std::string& text);
};

GbtModel gbt_train(const FeatureMatrix& features, std::span<const double> y,
                   std::span<const int> train_ids, const GbtHyperParams& hp);

struct FoldScore {
  int fold = 0;
  double mae = 0.0;
  std::optional<double> r2;
};

struct EvalReport {
  double mae = 0.0;
  std::optional<double> r2;
  std::vector<FoldScore> per_fold;
  std::vector<double> residuals;    // per cell, y - yhat; NaN where not evaluated
  std::vector<double> predictions;  // per cell; NaN where not evaluated
};

/// Pooled and per-fold MAE / R^2 over the evaluated cells.
EvalReport evaluate(std::span<const double> y, std::span<const double> yhat,
                    std::span<const int> eval_ids, std::span<const int> fold_of);

struct CvResult {
  EvalReport report;
  std::vector<GbtModel> fold_models;                 // one per fold id
  std::vector<std::vector<int>> train_ids_per_fold;
  std::vector<std::vector<double>> train_residuals_per_fold;  // aligned to train ids
};

/// K-fold protocol: train on the fold complement, predict the fold, pool.
CvResult cross_validate(const FeatureMatrix& features, std::span<const double> y,
                        const FoldAssignment& folds, const GbtHyperParams& hp);

struct LearningCurvePoint {
  double size = 0.0;
  double train_mae_mean = 0.0;
  double train_mae_sd = 0.0;
  double val_mae_mean = 0.0;
  double val_mae_sd = 0.0;
};

std::vector<LearningCurvePoint> learning_curve(const FeatureMatrix& features,
                                               std::span<const double> y,
                                               const FoldAssignment& folds,
                                               std::span<const double> sizes,
                                               const GbtHyperParams& hp);

}  // namespace gridcast
