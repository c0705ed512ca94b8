#include <limits>

#include "treebench/stats.hpp"
#include "treebench/tree.hpp"

namespace treebench {

namespace {

double pearson_p(const MatrixXi& table) {
  try {
    return chi_square(table, ChiSquareVariant::pearson).p_value;
  } catch (const UsageError&) {
    return 1.0;  // a zero marginal leaves nothing to distinguish
  }
}

struct Grouping {
  std::vector<std::vector<int>> codes;
  MatrixXi counts;  // groups x classes
};

Grouping merge_categories(const FeatureSpec& spec, const MatrixXi& table, const std::vector<int>& observed,
                          double alpha) {
  Grouping g;
  g.counts.resize(static_cast<Eigen::Index>(observed.size()), 2);
  for (std::size_t k = 0; k < observed.size(); ++k) {
    g.codes.push_back({observed[k]});
    g.counts.row(static_cast<Eigen::Index>(k)) = table.row(spec.code_index(observed[k]));
  }
  while (g.codes.size() > 2) {
    double max_p = -1.0;
    std::size_t ba = 0;
    std::size_t bb = 0;
    for (std::size_t a = 0; a < g.codes.size(); ++a) {
      for (std::size_t b = a + 1; b < g.codes.size(); ++b) {
        MatrixXi pair(2, 2);
        pair.row(0) = g.counts.row(static_cast<Eigen::Index>(a));
        pair.row(1) = g.counts.row(static_cast<Eigen::Index>(b));
        const double p = pearson_p(pair);
        if (p > max_p) {
          max_p = p;
          ba = a;
          bb = b;
        }
      }
    }
    if (max_p < alpha) break;
    g.codes[ba].insert(g.codes[ba].end(), g.codes[bb].begin(), g.codes[bb].end());
    std::sort(g.codes[ba].begin(), g.codes[ba].end());
    g.codes.erase(g.codes.begin() + static_cast<std::ptrdiff_t>(bb));
    MatrixXi next(g.counts.rows() - 1, 2);
    Eigen::Index r = 0;
    for (Eigen::Index k = 0; k < g.counts.rows(); ++k) {
      if (k == static_cast<Eigen::Index>(bb)) continue;
      next.row(r) = g.counts.row(k);
      if (k == static_cast<Eigen::Index>(ba)) next.row(r) += g.counts.row(static_cast<Eigen::Index>(bb));
      ++r;
    }
    g.counts = std::move(next);
  }
  return g;
}

}  // namespace

DecisionTree train_chaid(const CategoricalTable& data, const TreeParams& params) {
  auto chooser = [&](const NodeContext& ctx, std::vector<int>* eligible) -> std::optional<SplitDescriptor> {
    std::optional<SplitDescriptor> best;
    double best_p = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < data.features(); ++f) {
      const auto& spec = data.feature(f);
      const MatrixXi table = code_class_table(data, ctx.rows, f);
      const auto observed = observed_codes(spec, table);
      if (observed.size() < 2) continue;
      const Grouping g = merge_categories(spec, table, observed, params.alpha);
      bool feasible = true;
      for (Eigen::Index k = 0; k < g.counts.rows(); ++k) {
        if (g.counts.row(k).sum() < params.min_records_per_branch) feasible = false;
      }
      if (!feasible) continue;
      if (eligible) eligible->push_back(static_cast<int>(f));
      const double p = pearson_p(g.counts);
      const double mult = stats::stirling2(static_cast<int>(observed.size()), static_cast<int>(g.codes.size()));
      const double adjusted = std::min(1.0, p * mult);
      if (adjusted < best_p) {
        best_p = adjusted;
        SplitDescriptor s;
        s.feature = static_cast<int>(f);
        s.kind = g.codes.size() == observed.size() ? SplitKind::multiway : SplitKind::merged;
        s.branches = g.codes;
        std::sort(s.branches.begin(), s.branches.end());
        best = std::move(s);
      }
    }
    if (!best || best_p >= params.alpha) return std::nullopt;
    return best;
  };
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return grow_tree(data, rows, Algorithm::chaid, params, chooser);
}

}  // namespace treebench
