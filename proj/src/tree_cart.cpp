#include "treebench/tree.hpp"

namespace treebench {

namespace {
constexpr double kMinDelta = 1e-12;

std::vector<Eigen::Index> all_rows(const CategoricalTable& data) {
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return rows;
}
}  // namespace

std::optional<SplitDescriptor> best_gini_split(const CategoricalTable& data, const NodeContext& ctx,
                                               const std::vector<int>& features, const TreeParams& params,
                                               double* best_delta) {
  const CostMatrix cost = params.effective_cost();
  std::optional<SplitDescriptor> best;
  double best_d = 0.0;
  for (int f : features) {
    const auto& spec = data.feature(f);
    const MatrixXi table = code_class_table(data, ctx.rows, f);
    const auto codes = observed_codes(spec, table);
    if (codes.size() < 2) continue;
    // Partitions come in lexicographic order, so a strict improvement test
    // keeps the lowest feature and then the smallest left subset among ties.
    for (const auto& left : binary_partitions(codes)) {
      ClassCounts lc = ClassCounts::Zero(2);
      for (int c : left) lc += table.row(spec.code_index(c)).transpose();
      const ClassCounts rc = ctx.counts - lc;
      if (lc.sum() < params.min_records_per_branch || rc.sum() < params.min_records_per_branch) continue;
      const double d = gini_decrease(ctx.counts, lc, rc, cost);
      if (!best || d > best_d + kMinDelta) {
        best_d = d;
        SplitDescriptor s;
        s.feature = f;
        s.kind = SplitKind::binary;
        std::vector<int> right;
        for (int c : codes) {
          if (!std::binary_search(left.begin(), left.end(), c)) right.push_back(c);
        }
        s.branches = {left, right};
        best = std::move(s);
      }
    }
  }
  if (best_delta) *best_delta = best ? best_d : 0.0;
  return best;
}

DecisionTree train_cart(const CategoricalTable& data, const TreeParams& params) {
  std::vector<int> features(static_cast<std::size_t>(data.features()));
  for (std::size_t j = 0; j < features.size(); ++j) features[j] = static_cast<int>(j);
  auto chooser = [&](const NodeContext& ctx, std::vector<int>* eligible) -> std::optional<SplitDescriptor> {
    if (eligible) *eligible = features;
    double delta = 0.0;
    auto s = best_gini_split(data, ctx, features, params, &delta);
    if (!s || delta <= kMinDelta) return std::nullopt;
    return s;
  };
  const auto rows = all_rows(data);
  return grow_tree(data, rows, Algorithm::cart, params, chooser);
}

}  // namespace treebench
