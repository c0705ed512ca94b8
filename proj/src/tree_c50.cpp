#include "treebench/tree.hpp"

namespace treebench {

namespace {
constexpr double kMinGain = 1e-12;
}

DecisionTree train_c50(const CategoricalTable& data, const TreeParams& params) {
  auto chooser = [&](const NodeContext& ctx, std::vector<int>* eligible) -> std::optional<SplitDescriptor> {
    std::optional<SplitDescriptor> best;
    double best_gain = kMinGain;
    for (Eigen::Index f = 0; f < data.features(); ++f) {
      if (ctx.used[static_cast<std::size_t>(f)]) continue;
      const MatrixXi table = code_class_table(data, ctx.rows, f);
      const auto codes = observed_codes(data.feature(f), table);
      if (codes.size() < 2) continue;
      MatrixXi children(2, static_cast<Eigen::Index>(codes.size()));
      bool feasible = true;
      for (std::size_t b = 0; b < codes.size(); ++b) {
        const auto row = table.row(data.feature(f).code_index(codes[b]));
        children.col(static_cast<Eigen::Index>(b)) = row.transpose();
        if (row.sum() < params.min_records_per_branch) feasible = false;
      }
      if (!feasible) continue;
      if (eligible) eligible->push_back(static_cast<int>(f));
      const double gain = info_gain(ctx.counts, children);
      // Gains within kMinGain of the incumbent count as ties; the lower index wins.
      if (gain > best_gain + (best ? kMinGain : 0.0)) {
        best_gain = gain;
        SplitDescriptor s;
        s.feature = static_cast<int>(f);
        s.kind = SplitKind::multiway;
        for (int c : codes) s.branches.push_back({c});
        best = std::move(s);
      }
    }
    return best;
  };
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return grow_tree(data, rows, Algorithm::c50, params, chooser);
}

}  // namespace treebench
