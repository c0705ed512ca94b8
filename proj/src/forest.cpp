#include <algorithm>
#include <cmath>

#include "treebench/forest.hpp"

namespace treebench {

void ForestParams::validate() const {
  if (n_trees < 1) throw UsageError("n_trees must be >= 1");
  if (features_per_split < 0) throw UsageError("features_per_split must be >= 0");
  if (bootstrap_size < 0) throw UsageError("bootstrap_size must be >= 0");
  if (min_records_per_branch < 1) throw UsageError("min_records_per_branch must be >= 1");
}

int ForestParams::sampled_features(Eigen::Index m) const {
  if (features_per_split > m) throw UsageError("features_per_split exceeds the feature count");
  if (features_per_split > 0) return features_per_split;
  return static_cast<int>(std::ceil(std::sqrt(static_cast<double>(m))));
}

Forest::Forest(std::vector<DecisionTree> trees, std::vector<std::vector<Eigen::Index>> bags, ForestParams params,
               std::vector<FeatureSpec> schema)
    : trees_(std::move(trees)), bags_(std::move(bags)), params_(params), schema_(std::move(schema)) {
  if (trees_.empty()) throw DataError("forest has no trees");
}

double Forest::predict_proba(RowRef row) const {
  int votes = 0;
  for (const auto& t : trees_) votes += t.predict(row).label;
  return static_cast<double>(votes) / static_cast<double>(trees_.size());
}

int Forest::predict(RowRef row) const { return predict_proba(row) >= 0.5 ? 1 : 0; }

Forest train_forest(const CategoricalTable& data, const ForestParams& params) {
  params.validate();
  if (data.rows() < 2) throw UsageError("cannot train a forest on fewer than 2 rows");
  const Eigen::Index m = data.features();
  const int k = params.sampled_features(m);
  TreeParams tp;
  tp.min_records_per_branch = params.min_records_per_branch;
  tp.max_depth = params.max_depth;

  std::vector<DecisionTree> trees;
  std::vector<std::vector<Eigen::Index>> bags;
  trees.reserve(static_cast<std::size_t>(params.n_trees));
  for (int t = 0; t < params.n_trees; ++t) {
    Rng rng(derive_seed(params.seed, static_cast<std::uint64_t>(t)));
    std::vector<Eigen::Index> bag;
    if (params.bootstrap) {
      const Eigen::Index draws = params.bootstrap_size > 0 ? params.bootstrap_size : data.rows();
      for (Eigen::Index d = 0; d < draws; ++d) {
        bag.push_back(static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(data.rows()))));
      }
    } else {
      for (Eigen::Index i = 0; i < data.rows(); ++i) bag.push_back(i);
    }
    std::sort(bag.begin(), bag.end());
    auto chooser = [&](const NodeContext& ctx, std::vector<int>* eligible) -> std::optional<SplitDescriptor> {
      std::vector<int> all(static_cast<std::size_t>(m));
      for (std::size_t j = 0; j < all.size(); ++j) all[j] = static_cast<int>(j);
      rng.shuffle(all);
      std::vector<int> pick(all.begin(), all.begin() + k);
      std::sort(pick.begin(), pick.end());
      if (eligible) *eligible = pick;
      double delta = 0.0;
      auto s = best_gini_split(data, ctx, pick, tp, &delta);
      if (!s || delta <= 1e-12) return std::nullopt;
      return s;
    };
    trees.push_back(grow_tree(data, bag, Algorithm::cart, tp, chooser));
    bags.push_back(std::move(bag));
  }
  return Forest(std::move(trees), std::move(bags), params, data.schema());
}

double oob_accuracy(const Forest& forest, const CategoricalTable& data) {
  if (schema_hash(forest.schema()) != schema_hash(data.schema())) {
    throw UsageError("oob_accuracy: data schema differs from the forest's");
  }
  const auto& bags = forest.bags();
  for (const auto& bag : bags) {
    if (!bag.empty() && bag.back() >= data.rows()) throw UsageError("oob_accuracy: data is not the training table");
  }
  Eigen::Index scored = 0;
  Eigen::Index correct = 0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) {
    int votes = 0;
    int voters = 0;
    for (std::size_t t = 0; t < bags.size(); ++t) {
      if (std::binary_search(bags[t].begin(), bags[t].end(), i)) continue;
      votes += forest.trees()[t].predict(data.row(i)).label;
      ++voters;
    }
    if (voters == 0) continue;
    ++scored;
    const int pred = 2 * votes >= voters ? 1 : 0;
    if (pred == data.label(i)) ++correct;
  }
  if (scored == 0) throw ComputeError("no out-of-bag rows");
  return static_cast<double>(correct) / static_cast<double>(scored);
}

}  // namespace treebench
