#pragma once

#include <string>
#include <vector>

#include "treebench/dataset.hpp"
#include "treebench/tree.hpp"

namespace testutil {

using treebench::CategoricalTable;
using treebench::CodeMatrix;
using treebench::FeatureSpec;

inline FeatureSpec coded_feature(const std::string& name, int codes) {
  FeatureSpec f;
  f.name = name;
  for (int c = 0; c < codes; ++c) {
    f.allowed_codes.push_back(c);
    f.code_labels[c] = "c" + std::to_string(c);
  }
  return f;
}

/// Table whose feature j has codes 0..cards[j]-1.
inline CategoricalTable make_table(const std::vector<std::vector<int>>& rows, const std::vector<int>& y,
                                   const std::vector<int>& cards) {
  std::vector<FeatureSpec> schema;
  for (std::size_t j = 0; j < cards.size(); ++j) schema.push_back(coded_feature("f" + std::to_string(j), cards[j]));
  CodeMatrix codes(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(cards.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cards.size(); ++j) {
      codes(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  Eigen::VectorXi target(static_cast<Eigen::Index>(y.size()));
  for (std::size_t i = 0; i < y.size(); ++i) target(static_cast<Eigen::Index>(i)) = y[i];
  return CategoricalTable(std::move(schema), std::move(codes), std::move(target));
}

inline CategoricalTable make_binary_table(const std::vector<std::vector<int>>& rows, const std::vector<int>& y) {
  return make_table(rows, y, std::vector<int>(rows.empty() ? 0 : rows[0].size(), 2));
}

/// Uniform random codes and labels; every feature gets between 2 and max_codes codes.
inline CategoricalTable random_table(treebench::Rng& rng, int n, int m, int max_codes, double label_rate = 0.5) {
  std::vector<int> cards;
  for (int j = 0; j < m; ++j) cards.push_back(2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(max_codes - 1))));
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n), std::vector<int>(static_cast<std::size_t>(m)));
  std::vector<int> y(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      rows[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
          static_cast<int>(rng.below(static_cast<std::uint64_t>(cards[static_cast<std::size_t>(j)])));
    }
    y[static_cast<std::size_t>(i)] = rng.bernoulli(label_rate) ? 1 : 0;
  }
  return make_table(rows, y, cards);
}

/// Random labels that depend on a couple of features, so trees have something to split on.
inline CategoricalTable random_signal_table(treebench::Rng& rng, int n, int m, int max_codes) {
  CategoricalTable base = random_table(rng, n, m, max_codes);
  std::vector<std::vector<int>> rows(static_cast<std::size_t>(n));
  std::vector<int> y(static_cast<std::size_t>(n));
  std::vector<int> cards;
  for (int j = 0; j < m; ++j) cards.push_back(static_cast<int>(base.feature(j).allowed_codes.size()));
  const int a = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
  const int b = static_cast<int>(rng.below(static_cast<std::uint64_t>(m)));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) rows[static_cast<std::size_t>(i)].push_back(base.code(i, j));
    const double p = 0.15 + 0.35 * (base.code(i, a) % 2) + 0.35 * (base.code(i, b) == 0);
    y[static_cast<std::size_t>(i)] = rng.bernoulli(p) ? 1 : 0;
  }
  return make_table(rows, y, cards);
}

inline std::vector<int> row_vector(const CategoricalTable& t, Eigen::Index i) {
  std::vector<int> r;
  for (Eigen::Index j = 0; j < t.features(); ++j) r.push_back(t.code(i, j));
  return r;
}

inline Eigen::RowVectorXi to_row(const std::vector<int>& v) {
  Eigen::RowVectorXi r(static_cast<Eigen::Index>(v.size()));
  for (std::size_t j = 0; j < v.size(); ++j) r(static_cast<Eigen::Index>(j)) = v[j];
  return r;
}

inline double training_accuracy(const treebench::DecisionTree& tree, const CategoricalTable& data) {
  int ok = 0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) ok += tree.predict(data.row(i)).label == data.label(i);
  return static_cast<double>(ok) / static_cast<double>(data.rows());
}

}  // namespace testutil
