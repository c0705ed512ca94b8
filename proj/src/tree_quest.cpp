#include <cmath>
#include <limits>

#include "treebench/tree.hpp"

namespace treebench {

namespace {

constexpr double kMinDelta = 1e-12;

struct ScoreMoments {
  double n = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

// Moments of the per-row score (the class-1 rate of the row's code) for one class.
ScoreMoments moments(const MatrixXi& table, const std::vector<Eigen::Index>& idx, const VectorXd& score, int cls) {
  ScoreMoments m;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double w = table(idx[k], cls);
    m.n += w;
    m.mean += w * score(static_cast<Eigen::Index>(k));
  }
  if (m.n == 0.0) return m;
  m.mean /= m.n;
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const double d = score(static_cast<Eigen::Index>(k)) - m.mean;
    m.var += table(idx[k], cls) * d * d;
  }
  m.var /= m.n;
  return m;
}

}  // namespace

DecisionTree train_quest(const CategoricalTable& data, const TreeParams& params) {
  const CostMatrix cost = params.effective_cost();
  auto chooser = [&](const NodeContext& ctx, std::vector<int>* eligible) -> std::optional<SplitDescriptor> {
    int best_f = -1;
    double best_p = std::numeric_limits<double>::infinity();
    for (Eigen::Index f = 0; f < data.features(); ++f) {
      const MatrixXi table = code_class_table(data, ctx.rows, f);
      if (observed_codes(data.feature(f), table).size() < 2) continue;
      if (eligible) eligible->push_back(static_cast<int>(f));
      double p = 1.0;
      try {
        p = chi_square(table).p_value;
      } catch (const UsageError&) {
      }
      if (p < best_p) {
        best_p = p;
        best_f = static_cast<int>(f);
      }
    }
    if (best_f < 0) return std::nullopt;

    const auto& spec = data.feature(best_f);
    const MatrixXi table = code_class_table(data, ctx.rows, best_f);
    const auto codes = observed_codes(spec, table);
    std::vector<Eigen::Index> idx;
    VectorXd score(static_cast<Eigen::Index>(codes.size()));
    for (std::size_t k = 0; k < codes.size(); ++k) {
      idx.push_back(spec.code_index(codes[k]));
      score(static_cast<Eigen::Index>(k)) = static_cast<double>(table(idx.back(), 1)) / table.row(idx.back()).sum();
    }
    if (score.maxCoeff() - score.minCoeff() <= 1e-12) return std::nullopt;

    const ScoreMoments m0 = moments(table, idx, score, 0);
    const ScoreMoments m1 = moments(table, idx, score, 1);
    const double total = m0.n + m1.n;
    std::vector<int> left;
    std::vector<int> right;
    if (m0.var > 0.0 && m1.var > 0.0) {
      const double log_prior = std::log(m1.n / total) - std::log(m0.n / total);
      for (std::size_t k = 0; k < codes.size(); ++k) {
        const double s = score(static_cast<Eigen::Index>(k));
        const double q1 = -0.5 * std::log(m1.var) - (s - m1.mean) * (s - m1.mean) / (2.0 * m1.var);
        const double q0 = -0.5 * std::log(m0.var) - (s - m0.mean) * (s - m0.mean) / (2.0 * m0.var);
        (log_prior + q1 - q0 > 0.0 ? right : left).push_back(codes[k]);
      }
    }
    if (left.empty() || right.empty()) {
      left.clear();
      right.clear();
      const double threshold = 0.5 * (m0.mean + m1.mean);
      for (std::size_t k = 0; k < codes.size(); ++k) {
        (score(static_cast<Eigen::Index>(k)) <= threshold ? left : right).push_back(codes[k]);
      }
    }
    if (left.empty() || right.empty()) return std::nullopt;

    ClassCounts lc = ClassCounts::Zero(2);
    for (int c : left) lc += table.row(spec.code_index(c)).transpose();
    const ClassCounts rc = ctx.counts - lc;
    if (lc.sum() < params.min_records_per_branch || rc.sum() < params.min_records_per_branch) return std::nullopt;
    if (gini_decrease(ctx.counts, lc, rc, cost) <= kMinDelta) return std::nullopt;

    SplitDescriptor s;
    s.feature = best_f;
    s.kind = SplitKind::binary;
    s.branches = {left, right};
    return s;
  };
  std::vector<Eigen::Index> rows(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) rows[static_cast<std::size_t>(i)] = i;
  return grow_tree(data, rows, Algorithm::quest, params, chooser);
}

}  // namespace treebench
