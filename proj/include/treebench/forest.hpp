#pragma once

#include <cstdint>
#include <vector>

#include "treebench/tree.hpp"

namespace treebench {

struct ForestParams {
  int n_trees = 500;
  /// Features sampled per node; 0 means ceil(sqrt(m)).
  int features_per_split = 0;
  bool bootstrap = true;  // false = every tree sees all rows once
  /// Rows drawn per bootstrap sample; 0 means n.
  Eigen::Index bootstrap_size = 0;
  int min_records_per_branch = 2;
  int max_depth = -1;
  std::uint64_t seed = 0;

  void validate() const;
  int sampled_features(Eigen::Index m) const;
};

class Forest {
 public:
  Forest() = default;
  Forest(std::vector<DecisionTree> trees, std::vector<std::vector<Eigen::Index>> bags, ForestParams params,
         std::vector<FeatureSpec> schema);

  const std::vector<DecisionTree>& trees() const { return trees_; }
  /// Row indices (with repeats) each tree was grown on.
  const std::vector<std::vector<Eigen::Index>>& bags() const { return bags_; }
  const ForestParams& params() const { return params_; }
  const std::vector<FeatureSpec>& schema() const { return schema_; }
  int size() const { return static_cast<int>(trees_.size()); }

  /// Fraction of trees voting class 1.
  double predict_proba(RowRef row) const;
  /// Majority vote; an even split goes to class 1.
  int predict(RowRef row) const;

 private:
  std::vector<DecisionTree> trees_;
  std::vector<std::vector<Eigen::Index>> bags_;
  ForestParams params_;
  std::vector<FeatureSpec> schema_;
};

/// Bagged CART trees with per-node feature sampling. The per-node eligible
/// feature set is kept in each node's eligible_features.
Forest train_forest(const CategoricalTable& data, const ForestParams& params);

/// Accuracy of out-of-bag majority votes over rows left out of at least one bag.
double oob_accuracy(const Forest& forest, const CategoricalTable& data);

}  // namespace treebench
