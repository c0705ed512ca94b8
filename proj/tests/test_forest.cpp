#include <doctest.h>

#include <algorithm>

#include "helpers.hpp"
#include "treebench/forest.hpp"
#include "treebench/serialize.hpp"

using namespace treebench;

namespace {

DecisionTree leaf_tree(int ones, int zeros, const std::vector<FeatureSpec>& schema) {
  TreeNode n;
  n.counts = ClassCounts(2);
  n.counts << zeros, ones;
  n.predicted = ones > zeros ? 1 : 0;
  n.confidence = static_cast<double>(std::max(ones, zeros)) / (ones + zeros);
  n.source_id = 0;
  return DecisionTree({n}, Algorithm::cart, TreeParams{}, schema);
}

double majority_rate(const CategoricalTable& t) {
  const double r = t.target().cast<double>().mean();
  return std::max(r, 1.0 - r);
}

}  // namespace

TEST_CASE("a degenerate forest is a single CART tree") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = testutil::random_signal_table(rng, 120, 5, 4);
    ForestParams p;
    p.n_trees = 1;
    p.features_per_split = static_cast<int>(t.features());
    p.bootstrap = false;
    p.seed = 9;
    const auto forest = train_forest(t, p);
    const auto cart = train_cart(t);
    const auto& a = forest.trees()[0].nodes();
    const auto& b = cart.nodes();
    REQUIRE(a.size() == b.size());
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].counts == b[i].counts);
      CHECK(a[i].children == b[i].children);
      CHECK(a[i].is_leaf() == b[i].is_leaf());
      if (!a[i].is_leaf()) {
        CHECK(a[i].split->feature == b[i].split->feature);
        CHECK(a[i].split->branches == b[i].split->branches);
      }
    }
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      CHECK(forest.predict(t.row(i)) == cart.predict(t.row(i)).label);
    }
  }
}

TEST_CASE("forests are deterministic and bags depend only on seed and tree index") {
  Rng rng(4);
  const auto t = testutil::random_signal_table(rng, 150, 6, 3);
  ForestParams p;
  p.n_trees = 12;
  p.seed = 77;
  const auto a = train_forest(t, p);
  const auto b = train_forest(t, p);
  CHECK(forest_to_json(a) == forest_to_json(b));

  ForestParams q = p;
  q.n_trees = 5;
  const auto c = train_forest(t, q);
  for (int k = 0; k < 5; ++k) {
    CHECK(c.bags()[static_cast<std::size_t>(k)] == a.bags()[static_cast<std::size_t>(k)]);
    CHECK(tree_to_json(c.trees()[static_cast<std::size_t>(k)]) == tree_to_json(a.trees()[static_cast<std::size_t>(k)]));
  }
  p.seed = 78;
  CHECK(forest_to_json(train_forest(t, p)) != forest_to_json(a));

  for (const auto& bag : a.bags()) {
    CHECK(static_cast<Eigen::Index>(bag.size()) == t.rows());
    CHECK(std::is_sorted(bag.begin(), bag.end()));
  }
  const auto back = forest_from_json(Json::parse(forest_to_json(a).dump()));
  CHECK(forest_to_json(back) == forest_to_json(a));
}

TEST_CASE("vote probability is the mean of member votes") {
  const auto schema = std::vector<FeatureSpec>{binary_feature("x")};
  const Forest f({leaf_tree(3, 1, schema), leaf_tree(5, 0, schema), leaf_tree(1, 4, schema)}, {{0}, {0}, {0}},
                 ForestParams{}, schema);
  const auto row = testutil::to_row({0});
  CHECK(f.predict_proba(row) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(f.predict(row) == 1);

  const Forest tie({leaf_tree(3, 1, schema), leaf_tree(1, 4, schema)}, {{0}, {0}}, ForestParams{}, schema);
  CHECK(tie.predict_proba(row) == 0.5);
  CHECK(tie.predict(row) == 1);

  Rng rng(5);
  const auto t = testutil::random_signal_table(rng, 200, 6, 3);
  ForestParams p;
  p.n_trees = 25;
  p.seed = 1;
  const auto forest = train_forest(t, p);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    double votes = 0.0;
    for (const auto& tree : forest.trees()) votes += tree.predict(t.row(i)).label;
    const double mean = votes / forest.size();
    CHECK(std::abs(forest.predict_proba(t.row(i)) - mean) <= 1e-15);
  }
}

TEST_CASE("unanimous forests give certain probabilities") {
  ForestParams p;
  p.n_trees = 15;
  p.seed = 3;
  const auto all_one = testutil::make_binary_table({{0}, {1}, {1}}, {1, 1, 1});
  const auto g = train_forest(all_one, p);
  for (Eigen::Index i = 0; i < all_one.rows(); ++i) CHECK(g.predict_proba(all_one.row(i)) == 1.0);
  const auto all_zero = testutil::make_binary_table({{0}, {1}, {1}}, {0, 0, 0});
  CHECK(train_forest(all_zero, p).predict_proba(all_zero.row(0)) == 0.0);
}

TEST_CASE("split features come from the node's sampled subset") {
  Rng rng(6);
  const auto t = testutil::random_signal_table(rng, 300, 9, 4);
  ForestParams p;
  p.n_trees = 20;
  p.seed = 12;
  const auto f = train_forest(t, p);
  const int k = p.sampled_features(t.features());
  CHECK(k == 3);
  int audited = 0;
  for (const auto& tree : f.trees()) {
    for (const auto& n : tree.nodes()) {
      if (n.is_leaf()) continue;
      CHECK(static_cast<int>(n.eligible_features.size()) == k);
      CHECK(std::is_sorted(n.eligible_features.begin(), n.eligible_features.end()));
      CHECK(std::find(n.eligible_features.begin(), n.eligible_features.end(), n.split->feature) !=
            n.eligible_features.end());
      ++audited;
    }
  }
  CHECK(audited > 0);
}

TEST_CASE("out-of-bag accuracy") {
  const auto t = testutil::make_binary_table({{0}, {1}, {0}, {1}}, {0, 1, 0, 1});
  ForestParams p;
  p.n_trees = 1;
  p.bootstrap = false;
  const auto f = train_forest(t, p);
  try {
    oob_accuracy(f, t);
    FAIL("expected ComputeError");
  } catch (const ComputeError& e) {
    CHECK(std::string(e.what()) == "no out-of-bag rows");
  }

  // Perfectly separable: y = x0.
  SyntheticRules sep;
  sep.deterministic = true;
  sep.intercept = -1.0;
  sep.main_effects = {{0, 1, 2.0}};
  const auto data = generate_synthetic(planted_schema(1, 4), 400, 21, sep);
  ForestParams big;
  big.n_trees = 100;
  big.seed = 2;
  const double oob = oob_accuracy(train_forest(data, big), data);
  CHECK(oob >= 0.95);
  CHECK(oob <= 1.0);
}

TEST_CASE("forest beats the majority baseline on planted signal") {
  const auto schema = planted_schema(2, 8);
  // Weight 4 puts the Bayes rate about 19 points above the majority rate.
  const auto rules = planted_relevance_rules(2, 8, 4.0);
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = generate_synthetic(schema, 740, 500 + seed, rules);
    ForestParams p;
    p.n_trees = 200;
    p.seed = seed;
    const auto forest = train_forest(data, p);
    const double oob = oob_accuracy(forest, data);
    const double majority = majority_rate(data);
    MESSAGE("seed " << seed << ": oob " << oob << " majority " << majority);
    CHECK(oob >= 0.0);
    CHECK(oob <= 1.0);
    wins += oob >= majority + 0.10;
  }
  CHECK(wins == 5);
}

TEST_CASE("forest parameter validation") {
  const auto t = testutil::make_binary_table({{0, 1}, {1, 0}}, {0, 1});
  ForestParams p;
  p.n_trees = 0;
  CHECK_THROWS_AS(train_forest(t, p), UsageError);
  p = {};
  p.features_per_split = 3;
  CHECK_THROWS_AS(train_forest(t, p), UsageError);
  p = {};
  CHECK_THROWS_AS(train_forest(t.select_rows(std::vector<Eigen::Index>{0}), p), UsageError);
  CHECK(ForestParams{}.sampled_features(22) == 5);
  CHECK(ForestParams{}.sampled_features(1) == 1);
}
