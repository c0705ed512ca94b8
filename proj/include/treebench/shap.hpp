#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "treebench/forest.hpp"
#include "treebench/tree.hpp"

namespace treebench {

struct ShapAttribution {
  VectorXd phi;         // one contribution per feature
  double base = 0.0;    // mean model output over the background
  double output = 0.0;  // model output for the explained row

  /// |base + sum(phi) - output|
  double local_accuracy_gap() const { return std::abs(base + phi.sum() - output); }
};

/// Reference rows defining the interventional value function.
class BackgroundSet {
 public:
  explicit BackgroundSet(CodeMatrix rows);

  /// Whole table, or a seeded sample of `max_rows` rows when it is larger.
  static BackgroundSet sample(const CategoricalTable& data, Eigen::Index max_rows, std::uint64_t seed);

  const CodeMatrix& rows() const { return rows_; }
  Eigen::Index size() const { return rows_.rows(); }
  Eigen::Index features() const { return rows_.cols(); }

 private:
  CodeMatrix rows_;
};

/// Quantity a tree contributes: the class-1 share of the node where descent
/// stops (single-tree output), or the indicator of that node's majority class
/// (a forest member's vote).
enum class TreeOutput { probability, vote };

double model_output(const DecisionTree& tree, RowRef row, TreeOutput output = TreeOutput::probability);
double model_output(const Forest& forest, RowRef row);

/// Exact interventional Shapley values, polynomial in tree size per background row.
ShapAttribution shap_values(const DecisionTree& tree, RowRef row, const BackgroundSet& background,
                            TreeOutput output = TreeOutput::probability);
/// Mean of the member trees' vote attributions.
ShapAttribution shap_values(const Forest& forest, RowRef row, const BackgroundSet& background);

using ModelFunction = std::function<double(RowRef)>;

/// Enumerates all 2^m coalitions on hybrid rows. m must not exceed 20.
ShapAttribution brute_force_shap(const ModelFunction& model, RowRef row, const BackgroundSet& background);
ShapAttribution brute_force_shap(const DecisionTree& tree, RowRef row, const BackgroundSet& background,
                                 TreeOutput output = TreeOutput::probability);
ShapAttribution brute_force_shap(const Forest& forest, RowRef row, const BackgroundSet& background);

/// k!(m-k-1)!/m!
double shapley_weight(int m, int k);

/// Attributions for every row of `data`.
std::vector<ShapAttribution> explain_rows(const Forest& forest, const CategoricalTable& data,
                                          const BackgroundSet& background);
std::vector<ShapAttribution> explain_rows(const DecisionTree& tree, const CategoricalTable& data,
                                          const BackgroundSet& background);

/// Mean |phi| per feature, sorted descending with ties by feature index.
std::vector<ImportanceEntry> global_importance(const std::vector<ShapAttribution>& attributions,
                                               const std::vector<FeatureSpec>& schema);
std::vector<ImportanceEntry> global_importance(const Forest& forest, const CategoricalTable& data,
                                               const BackgroundSet& background);

// ---------------------------------------------------------------- elimination

struct EliminationParams {
  ForestParams forest;
  int folds = 10;
  bool stratified = true;
  /// Rows explained per step when ranking features; 0 = all rows.
  Eigen::Index explain_rows = 0;
  Eigen::Index background_rows = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EliminationStep {
  std::vector<int> active;          // original feature indices, ascending
  std::vector<double> importance;   // mean |phi|, parallel to active
  double accuracy = 0.0;            // mean CV accuracy on the active set
  std::vector<double> fold_accuracy;
  int dropped = -1;                 // original index removed after this step; -1 on the last

  bool operator==(const EliminationStep&) const = default;
};

struct EliminationTrace {
  std::vector<std::string> feature_names;  // full schema, indexed by original feature
  std::vector<EliminationStep> steps;
  int selected = 0;

  const std::vector<int>& selected_features() const { return steps.at(static_cast<std::size_t>(selected)).active; }
  bool operator==(const EliminationTrace&) const = default;
};

/// Drops the lowest mean-|SHAP| feature one at a time down to a single
/// feature, scoring each set by cross-validated forest accuracy. The selected
/// step is the most accurate one; ties go to the larger set.
EliminationTrace backward_eliminate(const CategoricalTable& data, const EliminationParams& params);

/// "row<TAB>feature<TAB>phi" lines.
std::string attribution_table(const std::vector<ShapAttribution>& attributions,
                              const std::vector<Eigen::Index>& row_ids, const std::vector<FeatureSpec>& schema);

}  // namespace treebench
