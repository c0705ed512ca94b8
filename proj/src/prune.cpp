#include <functional>

#include "treebench/stats.hpp"
#include "treebench/tree.hpp"

namespace treebench {

double pessimistic_errors(const ClassCounts& counts, double cf) {
  const std::int64_t n = counts.sum();
  if (n == 0) return 0.0;
  const std::int64_t errors = n - counts.maxCoeff();
  return static_cast<double>(n) * stats::binomial_upper_bound(errors, n, cf);
}

DecisionTree prune_c50(const DecisionTree& tree, double severity) {
  if (!(severity > 0.0 && severity < 100.0)) throw UsageError("pruning severity must lie in (0, 100)");
  const double cf = (100.0 - severity) / 100.0;
  constexpr double kEps = 1e-9;
  const auto& nodes = tree.nodes();
  std::vector<double> leaf_est(nodes.size());
  for (std::size_t i = 0; i < nodes.size(); ++i) leaf_est[i] = pessimistic_errors(nodes[i].counts, cf);
  std::vector<bool> collapsed(nodes.size(), false);

  // Bottom-up: replace a subtree by a leaf when the leaf is no worse.
  std::function<double(int)> local = [&](int id) -> double {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    const double leaf = leaf_est[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return leaf;
    double sub = 0.0;
    for (int c : n.children) sub += local(c);
    if (leaf <= sub + kEps) {
      collapsed[static_cast<std::size_t>(id)] = true;
      return leaf;
    }
    return sub;
  };
  local(0);

  std::function<double(int)> estimate = [&](int id) -> double {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf() || collapsed[static_cast<std::size_t>(id)]) return leaf_est[static_cast<std::size_t>(id)];
    double sub = 0.0;
    for (int c : n.children) sub += estimate(c);
    return sub;
  };
  // Top-down: collapse any remaining subtree whose estimate exceeds its leaf.
  std::function<void(int)> global = [&](int id) {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    if (n.is_leaf() || collapsed[static_cast<std::size_t>(id)]) return;
    if (estimate(id) > leaf_est[static_cast<std::size_t>(id)] + kEps) {
      collapsed[static_cast<std::size_t>(id)] = true;
      return;
    }
    for (int c : n.children) global(c);
  };
  global(0);

  std::vector<TreeNode> out;
  std::function<int(int)> copy = [&](int id) -> int {
    const TreeNode& n = nodes[static_cast<std::size_t>(id)];
    const int new_id = static_cast<int>(out.size());
    out.push_back(n);
    out.back().children.clear();
    if (n.is_leaf() || collapsed[static_cast<std::size_t>(id)]) {
      out.back().split.reset();
      return new_id;
    }
    for (int c : n.children) {
      const int child = copy(c);
      out[static_cast<std::size_t>(new_id)].children.push_back(child);
    }
    return new_id;
  };
  copy(0);
  TreeParams params = tree.params();
  params.pruning_severity = severity;
  return DecisionTree(std::move(out), tree.algorithm(), params, tree.schema());
}

}  // namespace treebench
