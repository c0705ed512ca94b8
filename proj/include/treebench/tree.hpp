#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treebench/criteria.hpp"
#include "treebench/dataset.hpp"

namespace treebench {

enum class Algorithm { c50, cart, chaid, quest };

std::string to_string(Algorithm a);
Algorithm algorithm_from_string(const std::string& s);

enum class SplitKind {
  multiway,  // one branch per observed code
  binary,    // code subset vs complement
  merged,    // partition of codes into merged groups
};

struct SplitDescriptor {
  int feature = -1;
  SplitKind kind = SplitKind::multiway;
  /// branches[b] = sorted codes routed to branch b. Branch sets are disjoint
  /// and cover the codes observed at the node.
  std::vector<std::vector<int>> branches;

  /// Branch index for `code`, or -1 when the code was not seen at training time.
  int branch_of(int code) const;
};

struct TreeNode {
  ClassCounts counts;  // training rows per class reaching this node
  std::optional<SplitDescriptor> split;
  std::vector<int> children;  // node indices, parallel to split->branches
  int predicted = 0;          // argmax of counts, ties to the lower class
  double confidence = 0.0;    // fraction of the predicted class
  int depth = 0;
  int source_id = -1;  // id of this node in the unpruned tree
  /// Features that were eligible when this node was split (forest audit mode).
  std::vector<int> eligible_features;

  bool is_leaf() const { return !split.has_value(); }
  int total() const { return counts.sum(); }
  /// Class-1 share of the node's training rows.
  double probability() const;
};

struct TreeParams {
  int min_records_per_branch = 2;
  double pruning_severity = 75.0;  // percent; CF = (100 - severity) / 100
  int max_depth = -1;              // negative = unbounded
  double alpha = 0.05;             // CHAID significance level
  CostMatrix cost;                 // empty = unit cost

  void validate() const;
  CostMatrix effective_cost(Eigen::Index classes = 2) const;
};

struct Prediction {
  int label = 0;
  double confidence = 0.0;
  double probability = 0.0;  // class-1 share at the node where descent stopped
};

class DecisionTree {
 public:
  DecisionTree() = default;
  DecisionTree(std::vector<TreeNode> nodes, Algorithm algorithm, TreeParams params, std::vector<FeatureSpec> schema);

  const std::vector<TreeNode>& nodes() const { return nodes_; }
  const TreeNode& node(int id) const { return nodes_.at(static_cast<std::size_t>(id)); }
  const TreeNode& root() const { return nodes_.front(); }
  Algorithm algorithm() const { return algorithm_; }
  const TreeParams& params() const { return params_; }
  const std::vector<FeatureSpec>& schema() const { return schema_; }

  int node_count() const { return static_cast<int>(nodes_.size()); }
  int leaf_count() const;
  int depth() const;

  /// Node where descent stops: a leaf, or the first node whose split has no
  /// branch for the row's code.
  int find_node(RowRef row) const;
  Prediction predict(RowRef row) const;

  /// Checks the structural invariants (counts sum, preorder ids, branch partitions).
  void check_invariants() const;

 private:
  std::vector<TreeNode> nodes_;
  Algorithm algorithm_ = Algorithm::c50;
  TreeParams params_;
  std::vector<FeatureSpec> schema_;
};

// ---------------------------------------------------------------- induction

/// Multiway information-gain tree; each feature used at most once per path.
DecisionTree train_c50(const CategoricalTable& data, const TreeParams& params = {});

/// Binary Gini tree with exhaustive code-subset search.
DecisionTree train_cart(const CategoricalTable& data, const TreeParams& params = {});

/// Chi-square merge-and-split tree with Bonferroni-adjusted feature selection.
DecisionTree train_chaid(const CategoricalTable& data, const TreeParams& params = {});

/// Binary tree: chi-square variable selection, discriminant split point.
DecisionTree train_quest(const CategoricalTable& data, const TreeParams& params = {});

/// Pessimistic-error pruning: bottom-up local pass then a top-down global pass.
DecisionTree prune_c50(const DecisionTree& tree, double severity);

/// Pessimistic error estimate (expected error count) of a leaf with these counts.
double pessimistic_errors(const ClassCounts& counts, double cf);

// ---------------------------------------------------------------- building blocks

/// Per-node context handed to split choosers.
struct NodeContext {
  std::span<const Eigen::Index> rows;
  ClassCounts counts;
  int depth = 0;
  std::vector<bool> used;  // features already split on along the path
};

using SplitChooser = std::function<std::optional<SplitDescriptor>(const NodeContext&, std::vector<int>* eligible)>;

/// Generic recursive partitioning. Stops on purity or max depth before asking
/// the chooser; a chooser returning nullopt makes the node a leaf.
DecisionTree grow_tree(const CategoricalTable& data, std::span<const Eigen::Index> rows, Algorithm algorithm,
                       const TreeParams& params, const SplitChooser& chooser);

/// codes x classes contingency table of `feature` over `rows`; row k belongs to allowed code k.
MatrixXi code_class_table(const CategoricalTable& data, std::span<const Eigen::Index> rows, Eigen::Index feature);

/// Observed codes (rows of `table` with positive totals).
std::vector<int> observed_codes(const FeatureSpec& spec, const MatrixXi& table);

/// All 2^(k-1)-1 binary partitions of `codes`, as the subset containing
/// codes.front() (the complement is the other branch).
std::vector<std::vector<int>> binary_partitions(const std::vector<int>& codes);

/// Best CART split among `features` (ascending). Ties keep the lowest feature,
/// then the lexicographically smallest left subset.
std::optional<SplitDescriptor> best_gini_split(const CategoricalTable& data, const NodeContext& ctx,
                                               const std::vector<int>& features, const TreeParams& params,
                                               double* best_delta = nullptr);

// ---------------------------------------------------------------- reporting

struct ImportanceEntry {
  int feature = -1;
  std::string name;
  double weight = 0.0;
};

/// Normalized impurity-reduction importance, sorted descending (ties by index).
/// Information gain for C5.0 trees, Gini decrease otherwise.
std::vector<ImportanceEntry> predictor_importance(const DecisionTree& tree, const CategoricalTable& data);

/// "name<TAB>0.1234" lines for features with non-zero weight.
std::string importance_text(const std::vector<ImportanceEntry>& ranking, int decimals = 4);

/// Graphviz digraph; node ids follow preorder.
std::string export_dot(const DecisionTree& tree, const FeatureSpec& target_spec = CategoricalTable::default_target_spec());

}  // namespace treebench
