#pragma once

// Split-quality kernels. Class counts are Eigen column vectors indexed by
// class code; a partition is a matrix with one column per child branch and
// one row per class. Contingency tables for chi-square are groups x classes.

#include <cmath>

#include "treebench/core.hpp"
#include "treebench/stats.hpp"

namespace treebench {

/// C(i|j): cost of predicting class i when the truth is class j.
using CostMatrix = Eigen::MatrixXd;

inline CostMatrix unit_cost(Eigen::Index classes) {
  CostMatrix c = CostMatrix::Ones(classes, classes);
  c.diagonal().setZero();
  return c;
}

inline void validate_cost(const CostMatrix& cost) {
  if (cost.rows() != cost.cols() || cost.rows() < 1) throw UsageError("cost matrix must be square");
  for (Eigen::Index i = 0; i < cost.rows(); ++i) {
    if (cost(i, i) != 0.0) throw UsageError("cost matrix diagonal must be zero");
    for (Eigen::Index j = 0; j < cost.cols(); ++j) {
      if (!(cost(i, j) >= 0.0)) throw UsageError("cost matrix entries must be non-negative");
    }
  }
}

namespace detail {

template <typename Derived>
double total_of(const Eigen::MatrixBase<Derived>& counts) {
  return static_cast<double>(counts.template cast<double>().sum());
}

template <typename Derived>
void require_nonempty(const Eigen::MatrixBase<Derived>& counts, const char* what) {
  if (counts.size() == 0 || (counts.array() < 0).any()) {
    throw UsageError(std::string(what) + ": counts must be non-negative");
  }
  if (total_of(counts) <= 0.0) throw UsageError(std::string(what) + ": empty class counts");
}

}  // namespace detail

/// Shannon entropy in bits, with 0 log 0 = 0.
template <typename Derived>
double entropy(const Eigen::MatrixBase<Derived>& counts) {
  detail::require_nonempty(counts, "entropy");
  const double total = detail::total_of(counts);
  double h = 0.0;
  for (Eigen::Index i = 0; i < counts.size(); ++i) {
    const double c = static_cast<double>(counts(i));
    if (c > 0.0) {
      const double p = c / total;
      h -= p * std::log2(p);
    }
  }
  return h;
}

/// Parent entropy minus size-weighted child entropies. `children` holds one
/// column of class counts per branch; empty branches contribute nothing.
template <typename DerivedP, typename DerivedC>
double info_gain(const Eigen::MatrixBase<DerivedP>& parent, const Eigen::MatrixBase<DerivedC>& children) {
  if (children.rows() != parent.size()) throw UsageError("info_gain: class dimension mismatch");
  if ((children.rowwise().sum() - parent).cwiseAbs().maxCoeff() != 0) {
    throw UsageError("info_gain: child totals do not sum to parent");
  }
  const double total = detail::total_of(parent);
  double weighted = 0.0;
  for (Eigen::Index v = 0; v < children.cols(); ++v) {
    const double n_v = detail::total_of(children.col(v));
    if (n_v > 0.0) weighted += n_v / total * entropy(children.col(v));
  }
  return entropy(parent) - weighted;
}

/// Cost-weighted Gini index sum_{i,j} C(i|j) p_i p_j.
template <typename Derived>
double gini(const Eigen::MatrixBase<Derived>& counts, const CostMatrix& cost) {
  detail::require_nonempty(counts, "gini");
  if (cost.rows() != counts.size()) throw UsageError("gini: cost matrix size mismatch");
  const VectorXd p = counts.template cast<double>() / detail::total_of(counts);
  return p.dot(cost * p);
}

template <typename Derived>
double gini(const Eigen::MatrixBase<Derived>& counts) {
  return gini(counts, unit_cost(counts.size()));
}

/// Impurity decrease Gini(parent) - P_L Gini(left) - P_R Gini(right).
/// An empty child contributes with weight zero.
template <typename DP, typename DL, typename DR>
double gini_decrease(const Eigen::MatrixBase<DP>& parent, const Eigen::MatrixBase<DL>& left,
                     const Eigen::MatrixBase<DR>& right, const CostMatrix& cost) {
  if (left.size() != parent.size() || right.size() != parent.size()) {
    throw UsageError("gini_decrease: class dimension mismatch");
  }
  if ((left + right - parent).cwiseAbs().maxCoeff() != 0) {
    throw UsageError("gini_decrease: child totals do not sum to parent");
  }
  const double n = detail::total_of(parent);
  const double n_left = detail::total_of(left);
  const double n_right = detail::total_of(right);
  double delta = gini(parent, cost);
  if (n_left > 0.0) delta -= n_left / n * gini(left, cost);
  if (n_right > 0.0) delta -= n_right / n * gini(right, cost);
  return delta;
}

template <typename DP, typename DL, typename DR>
double gini_decrease(const Eigen::MatrixBase<DP>& parent, const Eigen::MatrixBase<DL>& left,
                     const Eigen::MatrixBase<DR>& right) {
  return gini_decrease(parent, left, right, unit_cost(parent.size()));
}

/// Multiway generalisation used for importance: parent Gini minus weighted child Ginis.
template <typename DP, typename DC>
double gini_decrease_multiway(const Eigen::MatrixBase<DP>& parent, const Eigen::MatrixBase<DC>& children,
                              const CostMatrix& cost) {
  const double n = detail::total_of(parent);
  double delta = gini(parent, cost);
  for (Eigen::Index v = 0; v < children.cols(); ++v) {
    const double n_v = detail::total_of(children.col(v));
    if (n_v > 0.0) delta -= n_v / n * gini(children.col(v), cost);
  }
  return delta;
}

enum class ChiSquareVariant { pearson, likelihood_ratio };

struct ChiSquareResult {
  double statistic = 0.0;
  int dof = 0;
  double p_value = 1.0;
  ChiSquareVariant variant = ChiSquareVariant::pearson;
};

/// Test of independence on an r x c table of counts. Rows or columns with a
/// zero marginal carry no information and are dropped before the test.
template <typename Derived>
ChiSquareResult chi_square(const Eigen::MatrixBase<Derived>& table,
                           ChiSquareVariant variant = ChiSquareVariant::pearson) {
  const MatrixXd t = table.template cast<double>();
  if ((t.array() < 0.0).any()) throw UsageError("chi_square: negative count");
  const VectorXd row_tot = t.rowwise().sum();
  const Eigen::RowVectorXd col_tot = t.colwise().sum();
  std::vector<Eigen::Index> rows;
  std::vector<Eigen::Index> cols;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (row_tot(i) > 0.0) rows.push_back(i);
  }
  for (Eigen::Index j = 0; j < t.cols(); ++j) {
    if (col_tot(j) > 0.0) cols.push_back(j);
  }
  if (rows.size() < 2 || cols.size() < 2) {
    throw UsageError("chi_square: need at least 2 rows and 2 columns with positive marginals");
  }
  const double n = t.sum();
  double stat = 0.0;
  for (Eigen::Index i : rows) {
    for (Eigen::Index j : cols) {
      const double expected = row_tot(i) * col_tot(j) / n;
      const double observed = t(i, j);
      if (variant == ChiSquareVariant::pearson) {
        const double d = observed - expected;
        stat += d * d / expected;
      } else if (observed > 0.0) {
        stat += observed * std::log(observed / expected);
      }
    }
  }
  if (variant == ChiSquareVariant::likelihood_ratio) stat *= 2.0;
  stat = std::max(stat, 0.0);
  ChiSquareResult r;
  r.statistic = stat;
  r.dof = static_cast<int>((rows.size() - 1) * (cols.size() - 1));
  r.p_value = stats::chi_square_sf(stat, r.dof);
  r.variant = variant;
  return r;
}

}  // namespace treebench
