#include <doctest.h>

#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "treebench/shap.hpp"

using namespace treebench;

namespace {

CodeMatrix random_rows(Rng& rng, const CategoricalTable& t, int n) {
  CodeMatrix rows(n, t.features());
  for (int i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < t.features(); ++j) {
      const auto& codes = t.feature(j).allowed_codes;
      rows(i, j) = codes[rng.below(codes.size())];
    }
  }
  return rows;
}

std::vector<std::vector<int>> to_vectors(const CodeMatrix& m) {
  std::vector<std::vector<int>> out;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    std::vector<int> r;
    for (Eigen::Index j = 0; j < m.cols(); ++j) r.push_back(m(i, j));
    out.push_back(r);
  }
  return out;
}

DecisionTree random_tree(Rng& rng, const CategoricalTable& t) {
  TreeParams p;
  p.max_depth = 1 + static_cast<int>(rng.below(4));
  p.min_records_per_branch = 1 + static_cast<int>(rng.below(3));
  switch (rng.below(4)) {
    case 0:
      return train_c50(t, p);
    case 1:
      return train_cart(t, p);
    case 2:
      return train_chaid(t, p);
    default:
      return train_quest(t, p);
  }
}

}  // namespace

TEST_CASE("single-leaf tree attributes nothing") {
  const auto t = testutil::make_binary_table({{0, 1}, {1, 0}, {1, 1}}, {1, 1, 0});
  TreeParams p;
  p.max_depth = 0;
  const auto tree = train_cart(t, p);
  REQUIRE(tree.node_count() == 1);
  const BackgroundSet bg(t.codes());
  const auto a = shap_values(tree, t.row(0), bg);
  CHECK(a.phi.isZero(0.0));
  CHECK(a.base == doctest::Approx(2.0 / 3.0));
  CHECK(a.output == a.base);
}

TEST_CASE("indicator model puts everything on its feature") {
  // y = x1 exactly, so the tree is a single split on feature 1.
  const auto t = testutil::make_binary_table({{0, 0, 1}, {1, 1, 0}, {0, 1, 1}, {1, 0, 0}, {1, 1, 1}, {0, 0, 0}},
                                             {0, 1, 1, 0, 1, 0});
  const auto tree = train_c50(t);
  REQUIRE(tree.node_count() == 3);
  REQUIRE(tree.root().split->feature == 1);
  CodeMatrix bg(3, 3);
  bg << 0, 0, 0, 1, 0, 1, 1, 0, 0;
  const auto x = testutil::to_row({1, 1, 1});
  const auto a = shap_values(tree, x, BackgroundSet(bg));
  CHECK(a.phi(0) == 0.0);
  CHECK(a.phi(2) == 0.0);
  CHECK(a.phi(1) == doctest::Approx(1.0));
  CHECK(a.base == 0.0);

  // The same holds for an arbitrary model that reads one feature.
  const ModelFunction f = [](RowRef r) { return r(2) == 1 ? 0.9 : 0.2; };
  CodeMatrix bg2(2, 3);
  bg2 << 0, 1, 0, 1, 0, 0;
  const auto b = brute_force_shap(f, x, BackgroundSet(bg2));
  CHECK(b.phi(0) == 0.0);
  CHECK(b.phi(1) == 0.0);
  CHECK(b.phi(2) == doctest::Approx(0.7));
}

TEST_CASE("tree attributions match subset enumeration") {
  Rng rng(123);
  int checked = 0;
  for (int trial = 0; trial < 80; ++trial) {
    const int m = 2 + static_cast<int>(rng.below(7));
    const auto t = testutil::random_signal_table(rng, 60 + static_cast<int>(rng.below(100)), m, 4);
    const auto tree = random_tree(rng, t);
    const CodeMatrix bg = random_rows(rng, t, 5 + static_cast<int>(rng.below(4)));
    const CodeMatrix xs = random_rows(rng, t, 3);
    const BackgroundSet background(bg);
    for (auto mode : {TreeOutput::probability, TreeOutput::vote}) {
      const oracle::Model f = [&](const std::vector<int>& r) { return model_output(tree, testutil::to_row(r), mode); };
      for (Eigen::Index i = 0; i < xs.rows(); ++i) {
        const auto a = shap_values(tree, xs.row(i), background, mode);
        const auto b = brute_force_shap(tree, xs.row(i), background, mode);
        const auto ref = oracle::shapley(f, to_vectors(xs.row(i))[0], to_vectors(bg));
        for (int j = 0; j < m; ++j) {
          CHECK(std::abs(a.phi(j) - ref[static_cast<std::size_t>(j)]) < 1e-9);
          CHECK(std::abs(b.phi(j) - ref[static_cast<std::size_t>(j)]) < 1e-9);
        }
        CHECK(a.local_accuracy_gap() < 1e-9);
        CHECK(b.local_accuracy_gap() < 1e-9);
        ++checked;
      }
    }
  }
  CHECK(checked == 480);
}

TEST_CASE("forest attributions match enumeration and are the mean of member attributions") {
  Rng rng(321);
  for (int trial = 0; trial < 15; ++trial) {
    const int m = 3 + static_cast<int>(rng.below(6));
    const auto t = testutil::random_signal_table(rng, 120, m, 3);
    ForestParams p;
    p.n_trees = 3 + static_cast<int>(rng.below(8));
    p.max_depth = 4;
    p.seed = rng.next();
    const auto forest = train_forest(t, p);
    const CodeMatrix bg = random_rows(rng, t, 6);
    const BackgroundSet background(bg);
    const CodeMatrix x = random_rows(rng, t, 1);
    const auto a = shap_values(forest, x.row(0), background);
    const oracle::Model f = [&](const std::vector<int>& r) { return forest.predict_proba(testutil::to_row(r)); };
    const auto ref = oracle::shapley(f, to_vectors(x)[0], to_vectors(bg));
    VectorXd mean = VectorXd::Zero(m);
    for (const auto& tree : forest.trees()) mean += shap_values(tree, x.row(0), background, TreeOutput::vote).phi;
    mean /= forest.size();
    for (int j = 0; j < m; ++j) {
      CHECK(std::abs(a.phi(j) - ref[static_cast<std::size_t>(j)]) < 1e-9);
      CHECK(std::abs(a.phi(j) - mean(j)) < 1e-12);
    }
    CHECK(a.output == forest.predict_proba(x.row(0)));
    CHECK(a.local_accuracy_gap() < 1e-9);
  }
}

TEST_CASE("features outside every tree path get exactly zero") {
  Rng rng(8);
  for (int trial = 0; trial < 20; ++trial) {
    const auto t = testutil::random_signal_table(rng, 100, 6, 3);
    const auto tree = random_tree(rng, t);
    std::set<int> used;
    for (const auto& n : tree.nodes()) {
      if (!n.is_leaf()) used.insert(n.split->feature);
    }
    const BackgroundSet bg(random_rows(rng, t, 8));
    const auto a = shap_values(tree, t.row(0), bg);
    for (int j = 0; j < 6; ++j) {
      if (!used.count(j)) CHECK(a.phi(j) == 0.0);
    }
  }
}

TEST_CASE("Shapley axioms on small games") {
  // One player: the whole difference.
  const ModelFunction one = [](RowRef r) { return 0.25 + 0.5 * r(0); };
  CodeMatrix bg(2, 1);
  bg << 0, 1;
  const auto a = brute_force_shap(one, testutil::to_row({1}), BackgroundSet(bg));
  CHECK(a.phi(0) == doctest::Approx(a.output - a.base));

  // Symmetric in features 0 and 1, with equal codes on both everywhere.
  const ModelFunction sym = [](RowRef r) { return static_cast<double>(r(0) * r(1)) + 0.1 * r(2); };
  CodeMatrix bg3(3, 3);
  bg3 << 0, 0, 1, 1, 1, 0, 0, 0, 0;
  const auto s = brute_force_shap(sym, testutil::to_row({1, 1, 1}), BackgroundSet(bg3));
  CHECK(std::abs(s.phi(0) - s.phi(1)) < 1e-15);

  // Kernel weights telescope: sum_k C(m-1,k) k!(m-k-1)!/m! = 1.
  for (int m = 1; m <= 20; ++m) {
    double total = 0.0;
    double binom = 1.0;
    for (int k = 0; k < m; ++k) {
      total += binom * shapley_weight(m, k);
      binom = binom * (m - 1 - k) / (k + 1);
    }
    CHECK(std::abs(total - 1.0) < 1e-12);
  }
  CHECK(shapley_weight(3, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(shapley_weight(3, 1) == doctest::Approx(1.0 / 6.0));
}

TEST_CASE("errors") {
  CHECK_THROWS_AS(BackgroundSet(CodeMatrix(0, 3)), UsageError);
  const ModelFunction f = [](RowRef) { return 0.0; };
  CodeMatrix wide = CodeMatrix::Zero(1, 21);
  CHECK_THROWS_AS(brute_force_shap(f, wide.row(0), BackgroundSet(wide)), UsageError);
}

TEST_CASE("global importance") {
  Rng rng(10);
  const auto t = testutil::random_signal_table(rng, 80, 4, 3);
  TreeParams p;
  p.max_depth = 0;
  const auto constant = train_cart(t, p);
  const auto imp = global_importance(explain_rows(constant, t, BackgroundSet(t.codes())), t.schema());
  for (const auto& e : imp) CHECK(e.weight == 0.0);
  CHECK(imp[0].feature == 0);  // ties by index

  const auto y_is_f2 = [&] {
    std::vector<std::vector<int>> rows;
    std::vector<int> y;
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      rows.push_back(testutil::row_vector(t, i));
      y.push_back(t.code(i, 2) == 0 ? 1 : 0);
    }
    std::vector<int> cards;
    for (Eigen::Index j = 0; j < t.features(); ++j) cards.push_back(static_cast<int>(t.feature(j).allowed_codes.size()));
    return testutil::make_table(rows, y, cards);
  }();
  const auto tree = train_c50(y_is_f2);
  const auto single = global_importance(explain_rows(tree, y_is_f2, BackgroundSet(y_is_f2.codes())), y_is_f2.schema());
  CHECK(single[0].feature == 2);
  CHECK(single[0].weight > 0.0);
  for (std::size_t k = 1; k < single.size(); ++k) CHECK(single[k].weight == 0.0);
}

TEST_CASE("planted features rank first") {
  const auto schema = planted_schema(2, 8);
  const auto rules = planted_relevance_rules(2, 8);
  int hits = 0;
  const int runs = 20;
  for (int run = 0; run < runs; ++run) {
    const auto data = generate_synthetic(schema, 740, 9000 + static_cast<std::uint64_t>(run), rules);
    ForestParams p;
    p.n_trees = 40;
    p.seed = static_cast<std::uint64_t>(run);
    const auto forest = train_forest(data, p);
    const auto bg = BackgroundSet::sample(data, 32, 5);
    std::vector<Eigen::Index> rows;
    for (Eigen::Index i = 0; i < 100; ++i) rows.push_back(i);
    const auto imp = global_importance(forest, data.select_rows(rows), bg);
    const std::set<int> top = {imp[0].feature, imp[1].feature};
    hits += top == std::set<int>{0, 1};
  }
  MESSAGE("planted features in the top two: " << hits << "/" << runs);
  CHECK(hits >= 19);
}

TEST_CASE("backward elimination structure") {
  Rng rng(55);
  const auto two = testutil::random_signal_table(rng, 120, 2, 3);
  EliminationParams p;
  p.forest.n_trees = 10;
  p.folds = 5;
  p.background_rows = 16;
  p.seed = 4;
  const auto trace = backward_eliminate(two, p);
  CHECK(trace.steps.size() == 2);
  CHECK(trace.steps.back().dropped == -1);
  CHECK(trace.steps.back().active.size() == 1);

  const auto data = generate_synthetic(planted_schema(2, 4), 200, 3, planted_relevance_rules(2, 4));
  p.explain_rows = 50;
  const auto t6 = backward_eliminate(data, p);
  REQUIRE(t6.steps.size() == 6);
  std::set<int> dropped;
  for (std::size_t s = 0; s < t6.steps.size(); ++s) {
    const auto& step = t6.steps[s];
    CHECK(step.active.size() == 6 - s);
    CHECK(step.accuracy >= 0.0);
    CHECK(step.accuracy <= 1.0);
    CHECK(step.importance.size() == step.active.size());
    if (s + 1 < t6.steps.size()) {
      CHECK(dropped.insert(step.dropped).second);
      auto next = step.active;
      next.erase(std::find(next.begin(), next.end(), step.dropped));
      CHECK(next == t6.steps[s + 1].active);
    }
  }
  double best = 0.0;
  for (const auto& s : t6.steps) best = std::max(best, s.accuracy);
  CHECK(t6.steps[static_cast<std::size_t>(t6.selected)].accuracy == best);
  for (int s = 0; s < t6.selected; ++s) CHECK(t6.steps[static_cast<std::size_t>(s)].accuracy < best);
  CHECK(backward_eliminate(data, p) == t6);

  const auto one = testutil::random_signal_table(rng, 50, 1, 3);
  CHECK_THROWS_AS(backward_eliminate(one, p), UsageError);
}

TEST_CASE("attribution table layout") {
  const auto t = testutil::make_binary_table({{0, 1}, {1, 0}, {1, 1}, {0, 0}}, {0, 1, 1, 0});
  const auto tree = train_c50(t);
  const auto attrs = explain_rows(tree, t, BackgroundSet(t.codes()));
  const auto text = attribution_table(attrs, {0, 1, 2, 3}, t.schema());
  CHECK(text.rfind("row\tfeature\tphi\n0\tf0\t", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == 9);
}
