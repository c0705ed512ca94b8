#include <algorithm>
#include <sstream>

#include "treebench/tree.hpp"

namespace treebench {

std::string to_string(Algorithm a) {
  switch (a) {
    case Algorithm::c50:
      return "c50";
    case Algorithm::cart:
      return "cart";
    case Algorithm::chaid:
      return "chaid";
    case Algorithm::quest:
      return "quest";
  }
  return "?";
}

Algorithm algorithm_from_string(const std::string& s) {
  if (s == "c50") return Algorithm::c50;
  if (s == "cart") return Algorithm::cart;
  if (s == "chaid") return Algorithm::chaid;
  if (s == "quest") return Algorithm::quest;
  throw DataError("unknown tree algorithm: " + s);
}

int SplitDescriptor::branch_of(int code) const {
  for (std::size_t b = 0; b < branches.size(); ++b) {
    if (std::binary_search(branches[b].begin(), branches[b].end(), code)) return static_cast<int>(b);
  }
  return -1;
}

double TreeNode::probability() const {
  const int n = total();
  return n == 0 ? 0.0 : static_cast<double>(counts(1)) / n;
}

void TreeParams::validate() const {
  if (min_records_per_branch < 1) throw UsageError("min_records_per_branch must be >= 1");
  if (!(pruning_severity > 0.0 && pruning_severity < 100.0)) throw UsageError("pruning severity must lie in (0, 100)");
  if (!(alpha > 0.0 && alpha < 1.0)) throw UsageError("alpha must lie in (0, 1)");
  if (cost.size() != 0) validate_cost(cost);
}

CostMatrix TreeParams::effective_cost(Eigen::Index classes) const {
  if (cost.size() == 0) return unit_cost(classes);
  if (cost.rows() != classes) throw UsageError("cost matrix does not match class count");
  return cost;
}

// ---------------------------------------------------------------- DecisionTree

namespace {

void label_node(TreeNode& node) {
  Eigen::Index best = 0;
  for (Eigen::Index c = 1; c < node.counts.size(); ++c) {
    if (node.counts(c) > node.counts(best)) best = c;
  }
  node.predicted = static_cast<int>(best);
  const int n = node.total();
  node.confidence = n == 0 ? 0.0 : static_cast<double>(node.counts(best)) / n;
}

}  // namespace

DecisionTree::DecisionTree(std::vector<TreeNode> nodes, Algorithm algorithm, TreeParams params,
                           std::vector<FeatureSpec> schema)
    : nodes_(std::move(nodes)), algorithm_(algorithm), params_(std::move(params)), schema_(std::move(schema)) {
  if (nodes_.empty()) throw DataError("tree has no nodes");
  for (auto& n : nodes_) label_node(n);
}

int DecisionTree::leaf_count() const {
  return static_cast<int>(std::count_if(nodes_.begin(), nodes_.end(), [](const TreeNode& n) { return n.is_leaf(); }));
}

int DecisionTree::depth() const {
  int d = 0;
  for (const auto& n : nodes_) d = std::max(d, n.depth);
  return d;
}

int DecisionTree::find_node(RowRef row) const {
  if (row.size() != static_cast<Eigen::Index>(schema_.size())) {
    throw UsageError("row has " + std::to_string(row.size()) + " features, tree expects " +
                     std::to_string(schema_.size()));
  }
  int id = 0;
  for (;;) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return id;
    const int b = n.split->branch_of(row(n.split->feature));
    if (b < 0) return id;
    id = n.children[static_cast<std::size_t>(b)];
  }
}

Prediction DecisionTree::predict(RowRef row) const {
  const TreeNode& n = nodes_[static_cast<std::size_t>(find_node(row))];
  return {n.predicted, n.confidence, n.probability()};
}

void DecisionTree::check_invariants() const {
  for (std::size_t id = 0; id < nodes_.size(); ++id) {
    const TreeNode& n = nodes_[id];
    if (n.is_leaf()) {
      if (!n.children.empty()) throw Error("leaf with children at node " + std::to_string(id));
      continue;
    }
    const auto& s = *n.split;
    if (s.branches.size() < 2 || s.branches.size() != n.children.size()) {
      throw Error("split arity mismatch at node " + std::to_string(id));
    }
    ClassCounts sum = ClassCounts::Zero(n.counts.size());
    std::vector<int> seen;
    for (std::size_t b = 0; b < s.branches.size(); ++b) {
      const int c = n.children[b];
      if (c <= static_cast<int>(id) || c >= node_count()) throw Error("children must follow parent in preorder");
      sum += nodes_[static_cast<std::size_t>(c)].counts;
      if (s.branches[b].empty()) throw Error("empty branch at node " + std::to_string(id));
      seen.insert(seen.end(), s.branches[b].begin(), s.branches[b].end());
    }
    std::sort(seen.begin(), seen.end());
    if (std::adjacent_find(seen.begin(), seen.end()) != seen.end()) {
      throw Error("overlapping branch code sets at node " + std::to_string(id));
    }
    if (sum != n.counts) throw Error("children counts do not sum to parent at node " + std::to_string(id));
  }
}

// ---------------------------------------------------------------- growing

MatrixXi code_class_table(const CategoricalTable& data, std::span<const Eigen::Index> rows, Eigen::Index feature) {
  const auto& spec = data.feature(feature);
  MatrixXi t = MatrixXi::Zero(static_cast<Eigen::Index>(spec.allowed_codes.size()), 2);
  for (auto i : rows) ++t(spec.code_index(data.code(i, feature)), data.label(i));
  return t;
}

std::vector<int> observed_codes(const FeatureSpec& spec, const MatrixXi& table) {
  std::vector<int> out;
  for (Eigen::Index k = 0; k < table.rows(); ++k) {
    if (table.row(k).sum() > 0) out.push_back(spec.allowed_codes[static_cast<std::size_t>(k)]);
  }
  return out;
}

std::vector<std::vector<int>> binary_partitions(const std::vector<int>& codes) {
  const std::size_t k = codes.size();
  if (k < 2) return {};
  if (k > 16) throw UsageError("binary_partitions: too many codes for exhaustive search");
  const std::uint32_t full = (1u << (k - 1)) - 1u;
  std::vector<std::vector<int>> out;
  for (std::uint32_t mask = 0; mask < full; ++mask) {
    std::vector<int> left{codes[0]};
    for (std::size_t i = 1; i < k; ++i) {
      if (mask & (1u << (i - 1))) left.push_back(codes[i]);
    }
    out.push_back(std::move(left));
  }
  std::sort(out.begin(), out.end());
  return out;
}

namespace {

class Grower {
 public:
  Grower(const CategoricalTable& data, const TreeParams& params, const SplitChooser& chooser)
      : data_(data), params_(params), chooser_(chooser) {}

  int build(std::vector<Eigen::Index> rows, int depth, std::vector<bool> used) {
    const int id = static_cast<int>(nodes_.size());
    nodes_.emplace_back();
    ClassCounts counts = ClassCounts::Zero(2);
    for (auto i : rows) ++counts(data_.label(i));
    {
      TreeNode& n = nodes_.back();
      n.counts = counts;
      n.depth = depth;
      n.source_id = id;
    }
    const bool pure = (counts.array() > 0).count() <= 1;
    if (pure || (params_.max_depth >= 0 && depth >= params_.max_depth)) return id;

    NodeContext ctx{rows, counts, depth, used};
    std::vector<int> eligible;
    auto split = chooser_(ctx, &eligible);
    nodes_[static_cast<std::size_t>(id)].eligible_features = std::move(eligible);
    if (!split) return id;

    std::vector<std::vector<Eigen::Index>> parts(split->branches.size());
    for (auto i : rows) {
      const int b = split->branch_of(data_.code(i, split->feature));
      if (b < 0) throw Error("split chooser produced branches not covering the node's codes");
      parts[static_cast<std::size_t>(b)].push_back(i);
    }
    for (const auto& p : parts) {
      if (p.empty()) throw Error("split chooser produced an empty branch");
    }
    used[static_cast<std::size_t>(split->feature)] = true;
    nodes_[static_cast<std::size_t>(id)].split = std::move(*split);
    for (auto& p : parts) {
      const int child = build(std::move(p), depth + 1, used);
      nodes_[static_cast<std::size_t>(id)].children.push_back(child);
    }
    return id;
  }

  std::vector<TreeNode> take() { return std::move(nodes_); }

 private:
  const CategoricalTable& data_;
  const TreeParams& params_;
  const SplitChooser& chooser_;
  std::vector<TreeNode> nodes_;
};

}  // namespace

DecisionTree grow_tree(const CategoricalTable& data, std::span<const Eigen::Index> rows, Algorithm algorithm,
                       const TreeParams& params, const SplitChooser& chooser) {
  params.validate();
  if (rows.empty()) throw UsageError("cannot train a tree on an empty table");
  if (data.features() < 1) throw UsageError("cannot train a tree without features");
  Grower g(data, params, chooser);
  g.build(std::vector<Eigen::Index>(rows.begin(), rows.end()), 0,
          std::vector<bool>(static_cast<std::size_t>(data.features()), false));
  return DecisionTree(g.take(), algorithm, params, data.schema());
}

// ---------------------------------------------------------------- importance

std::vector<ImportanceEntry> predictor_importance(const DecisionTree& tree, const CategoricalTable& data) {
  if (schema_hash(tree.schema()) != schema_hash(data.schema())) {
    throw UsageError("predictor_importance: data schema differs from the tree's");
  }
  const auto& nodes = tree.nodes();
  // Route the data through the tree; rows stopping at a node (unseen code)
  // stay counted there.
  std::vector<ClassCounts> reach(nodes.size(), ClassCounts::Zero(2));
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    int id = 0;
    for (;;) {
      ++reach[static_cast<std::size_t>(id)](data.label(i));
      const TreeNode& n = nodes[static_cast<std::size_t>(id)];
      if (n.is_leaf()) break;
      const int b = n.split->branch_of(data.code(i, n.split->feature));
      if (b < 0) break;
      id = n.children[static_cast<std::size_t>(b)];
    }
  }
  const CostMatrix cost = tree.params().effective_cost();
  const bool use_entropy = tree.algorithm() == Algorithm::c50;
  auto impurity = [&](const ClassCounts& c) { return use_entropy ? entropy(c) : gini(c, cost); };

  VectorXd weight = VectorXd::Zero(data.features());
  const double total = static_cast<double>(data.rows());
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& n = nodes[id];
    const ClassCounts& here = reach[id];
    const int n_here = here.sum();
    if (n.is_leaf() || n_here == 0) continue;
    double reduction = impurity(here);
    ClassCounts residual = here;
    for (int c : n.children) {
      const ClassCounts& cc = reach[static_cast<std::size_t>(c)];
      residual -= cc;
      if (cc.sum() > 0) reduction -= static_cast<double>(cc.sum()) / n_here * impurity(cc);
    }
    if (residual.sum() > 0) reduction -= static_cast<double>(residual.sum()) / n_here * impurity(residual);
    weight(n.split->feature) += n_here / total * std::max(reduction, 0.0);
  }
  const double sum = weight.sum();
  if (sum > 0.0) weight /= sum;

  std::vector<ImportanceEntry> out;
  for (Eigen::Index j = 0; j < data.features(); ++j) {
    out.push_back({static_cast<int>(j), data.feature(j).name, weight(j)});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  return out;
}

std::string importance_text(const std::vector<ImportanceEntry>& ranking, int decimals) {
  std::ostringstream os;
  os << "predictor\timportance\n";
  for (const auto& e : ranking) {
    if (e.weight > 0.0) os << e.name << '\t' << format_fixed(e.weight, decimals) << '\n';
  }
  return os.str();
}

// ---------------------------------------------------------------- DOT

namespace {

std::string dot_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '"' || c == '\\') out.push_back('\\');
    out.push_back(c);
  }
  return out;
}

}  // namespace

std::string export_dot(const DecisionTree& tree, const FeatureSpec& target_spec) {
  std::ostringstream os;
  const auto& nodes = tree.nodes();
  const double root_total = std::max(1, tree.root().total());
  os << "digraph DecisionTree {\n";
  os << "  node [shape=box, fontname=\"Helvetica\"];\n";
  os << "  edge [fontname=\"Helvetica\"];\n";
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& n = nodes[id];
    const double total = std::max(1, n.total());
    std::string label = "Node " + std::to_string(id) + "\\n";
    if (!n.is_leaf()) label += dot_escape(tree.schema()[static_cast<std::size_t>(n.split->feature)].name) + "\\n";
    for (Eigen::Index c = 0; c < n.counts.size(); ++c) {
      label += dot_escape(target_spec.label(static_cast<int>(c))) + ": " + format_fixed(100.0 * n.counts(c) / total, 1) +
               "% (" + std::to_string(n.counts(c)) + ")\\n";
    }
    label += "Total: " + format_fixed(100.0 * n.total() / root_total, 1) + "% (" + std::to_string(n.total()) + ")\\n";
    label += "Predicted: " + dot_escape(target_spec.label(n.predicted));
    os << "  n" << id << " [label=\"" << label << "\"];\n";
  }
  for (std::size_t id = 0; id < nodes.size(); ++id) {
    const TreeNode& n = nodes[id];
    if (n.is_leaf()) continue;
    const auto& spec = tree.schema()[static_cast<std::size_t>(n.split->feature)];
    for (std::size_t b = 0; b < n.children.size(); ++b) {
      std::string edge;
      for (std::size_t k = 0; k < n.split->branches[b].size(); ++k) {
        if (k) edge += ", ";
        edge += spec.label(n.split->branches[b][k]);
      }
      os << "  n" << id << " -> n" << n.children[b] << " [label=\"" << dot_escape(edge) << "\"];\n";
    }
  }
  os << "}\n";
  return os.str();
}

}  // namespace treebench
