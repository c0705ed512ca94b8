#include <doctest.h>

#include <functional>
#include <set>

#include "helpers.hpp"
#include "oracles.hpp"
#include "treebench/baselines.hpp"

using namespace treebench;
using testutil::make_binary_table;
using testutil::make_table;

namespace {

// Single binary feature: code 0 has `ones0` positives out of n0, code 1 has ones1 of n1.
CategoricalTable two_by_two(int n0, int ones0, int n1, int ones1) {
  std::vector<std::vector<int>> rows;
  std::vector<int> y;
  for (int k = 0; k < n0; ++k) rows.push_back({0}), y.push_back(k < ones0 ? 1 : 0);
  for (int k = 0; k < n1; ++k) rows.push_back({1}), y.push_back(k < ones1 ? 1 : 0);
  return make_binary_table(rows, y);
}

double accuracy(const Classifier& model, const CategoricalTable& data) {
  int ok = 0;
  for (Eigen::Index i = 0; i < data.rows(); ++i) ok += model.predict_label(data.row(i)) == data.label(i);
  return static_cast<double>(ok) / static_cast<double>(data.rows());
}

}  // namespace

TEST_CASE("one-hot encoding drops the first code") {
  const auto t = make_table({{0, 2}, {1, 0}}, {0, 1}, {2, 3});
  const OneHotEncoder enc(t.schema());
  CHECK(enc.width() == 3);
  const VectorXd a = enc.encode(t.row(0));
  CHECK(a == (VectorXd(3) << 0, 0, 1).finished());
  const VectorXd b = enc.encode(t.row(1));
  CHECK(b == (VectorXd(3) << 1, 0, 0).finished());
  CHECK_THROWS_AS(enc.encode(testutil::to_row({0})), UsageError);
}

TEST_CASE("logistic null model") {
  // Every code of both features has the same 3/8 class-1 rate.
  std::vector<std::vector<int>> rows;
  std::vector<int> y;
  for (int a = 0; a < 2; ++a) {
    for (int b = 0; b < 3; ++b) {
      for (int k = 0; k < 8; ++k) {
        rows.push_back({a, b});
        y.push_back(k < 3 ? 1 : 0);
      }
    }
  }
  const auto t = make_table(rows, y, {2, 3});
  const auto m = train_logistic(t);
  CHECK(m.beta().lpNorm<Eigen::Infinity>() < 1e-6);
  CHECK(std::abs(m.intercept() - oracle::logit(3.0 / 8.0)) < 1e-6);
  for (Eigen::Index i = 0; i < t.rows(); ++i) CHECK(m.predict_proba(t.row(i)) == doctest::Approx(3.0 / 8.0).epsilon(1e-6));
}

TEST_CASE("logistic coefficient matches the 2x2 closed form") {
  const auto t = two_by_two(100, 20, 100, 80);
  const auto m = train_logistic(t);
  const double closed = oracle::logit(0.8) - oracle::logit(0.2);
  CHECK(closed == doctest::Approx(2.7726).epsilon(1e-4));
  CHECK(std::abs(m.beta()(0) - closed) < 1e-3);
  CHECK(std::abs(m.intercept() - oracle::logit(0.2)) < 1e-3);
}

TEST_CASE("logistic score equations hold at convergence") {
  Rng rng(3);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = testutil::random_signal_table(rng, 300, 4, 3);
    LogisticOptions opt;
    opt.l2 = 0.5;
    const auto m = train_logistic(t, opt);
    const MatrixXd X = m.encoder().encode(t);
    VectorXd resid(t.rows());
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const double p = m.predict_proba(t.row(i));
      CHECK(p > 0.0);
      CHECK(p < 1.0);
      resid(i) = t.label(i) - p;
    }
    CHECK(std::abs(resid.sum()) <= opt.tolerance * t.rows());
    const VectorXd score = X.transpose() * resid - opt.l2 * m.beta();
    CHECK(score.lpNorm<Eigen::Infinity>() <= opt.tolerance * t.rows());
  }
}

TEST_CASE("logistic failure carries iteration count and gradient norm") {
  Rng rng(4);
  const auto t = testutil::random_signal_table(rng, 200, 3, 3);
  LogisticOptions opt;
  opt.max_iterations = 0;
  try {
    train_logistic(t, opt);
    FAIL("expected ComputeError");
  } catch (const ComputeError& e) {
    const std::string msg = e.what();
    CHECK(msg.find("0 iterations") != std::string::npos);
    CHECK(msg.find("gradient norm") != std::string::npos);
  }
  // Separable data still converges thanks to the penalty.
  const auto sep = two_by_two(20, 0, 20, 20);
  const auto m = train_logistic(sep);
  CHECK(std::isfinite(m.beta()(0)));
  CHECK(m.beta()(0) > 5.0);
}

TEST_CASE("MLP analytic gradient matches central differences") {
  Rng rng(9);
  const auto t = testutil::random_signal_table(rng, 40, 3, 3);
  const OneHotEncoder enc(t.schema());
  MlpModel model(enc, {16, 16, 16, 16, 16}, 42);
  const MatrixXd X = enc.encode(t).transpose();
  const VectorXd y = t.target().cast<double>();
  VectorXd grad;
  const VectorXd theta = model.parameters();
  model.loss_and_gradient(X, y, &grad);
  REQUIRE(grad.size() == model.parameter_count());
  const double eps = 1e-5;
  int checked = 0;
  for (int k = 0; k < 25; ++k) {
    const auto idx = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(theta.size())));
    VectorXd plus = theta;
    VectorXd minus = theta;
    plus(idx) += eps;
    minus(idx) -= eps;
    model.set_parameters(plus);
    const double lp = model.loss_and_gradient(X, y, nullptr);
    model.set_parameters(minus);
    const double lm = model.loss_and_gradient(X, y, nullptr);
    model.set_parameters(theta);
    const double fd = (lp - lm) / (2.0 * eps);
    if (std::abs(grad(idx)) < 1e-7 && std::abs(fd) < 1e-7) continue;  // relative error meaningless at zero
    CHECK(std::abs(fd - grad(idx)) / std::max(std::abs(fd), std::abs(grad(idx))) < 1e-4);
    ++checked;
  }
  CHECK(checked >= 5);
}

TEST_CASE("MLP learns separable data and is deterministic") {
  SyntheticRules rules;
  rules.deterministic = true;
  rules.intercept = -1.0;
  rules.main_effects = {{0, 1, 1.5}, {1, 1, 1.5}};
  const auto t = generate_synthetic(planted_schema(2, 0), 300, 5, rules);
  MlpOptions opt;
  opt.seed = 1;
  const auto m = train_mlp(t, opt);
  CHECK(accuracy(m, t) >= 0.95);
  const auto again = train_mlp(t, opt);
  CHECK(m.parameters() == again.parameters());
  CHECK(m.epochs_run() <= opt.epochs);
}

TEST_CASE("zero-epoch MLP is its initialisation") {
  Rng rng(2);
  const auto t = testutil::random_signal_table(rng, 100, 3, 3);
  MlpOptions opt;
  opt.epochs = 0;
  opt.seed = 17;
  const auto m = train_mlp(t, opt);
  const MlpModel init(OneHotEncoder(t.schema()), opt.widths, derive_seed(opt.seed, "mlp/init"));
  CHECK(m.parameters() == init.parameters());
  CHECK(m.epochs_run() == 0);
  double lo = 1.0, hi = 0.0;
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    const double p = m.predict_proba(t.row(i));
    CHECK(p == init.predict_proba(t.row(i)));
    lo = std::min(lo, p);
    hi = std::max(hi, p);
  }
  MESSAGE("untrained output range " << lo << " .. " << hi);
  CHECK(hi - lo < 0.5);
}

TEST_CASE("MLP option validation") {
  MlpOptions opt;
  opt.widths = {};
  CHECK_THROWS_AS(opt.validate(), UsageError);
  opt = {};
  opt.batch_size = 0;
  CHECK_THROWS_AS(opt.validate(), UsageError);
  opt = {};
  opt.holdout = 1.0;
  CHECK_THROWS_AS(opt.validate(), UsageError);
}

TEST_CASE("naive Bayes posterior on a 2x2 table") {
  const auto t = two_by_two(10, 2, 30, 21);  // n = 40, 23 positives
  BayesNetOptions opt;
  opt.alpha = 1.0;
  const auto m = train_bayes_net(t, opt);
  CHECK(m.has_edge(1, 0));
  CHECK_FALSE(m.has_edge(0, 1));
  // Hand calculation with add-one smoothing.
  const double prior1 = (23.0 + 1.0) / (40.0 + 2.0);
  const double prior0 = 1.0 - prior1;
  const double x1_given_y1 = (21.0 + 1.0) / (23.0 + 2.0);
  const double x1_given_y0 = (9.0 + 1.0) / (17.0 + 2.0);
  const double odds = prior1 / prior0 * x1_given_y1 / x1_given_y0;
  const double p = m.predict_proba(testutil::to_row({1}));
  CHECK(std::abs(p / (1.0 - p) - odds) < 1e-12);
  const double q = m.predict_proba(testutil::to_row({0}));
  const double odds0 = prior1 / prior0 * (1.0 - x1_given_y1) / (1.0 - x1_given_y0);
  CHECK(std::abs(q / (1.0 - q) - odds0) < 1e-12);
}

TEST_CASE("heavy smoothing flattens every CPT") {
  Rng rng(1);
  const auto t = testutil::random_signal_table(rng, 100, 3, 4);
  BayesNetOptions opt;
  opt.alpha = 1e12;
  const auto m = train_bayes_net(t, opt);
  for (int v = 0; v < m.variables(); ++v) {
    const auto& cpt = m.cpts()[static_cast<std::size_t>(v)];
    for (Eigen::Index r = 0; r < cpt.rows(); ++r) {
      for (Eigen::Index c = 0; c < cpt.cols(); ++c) CHECK(std::abs(cpt(r, c) - 1.0 / cpt.cols()) < 1e-9);
    }
  }
}

TEST_CASE("Bayes net joint sums to one over the full space") {
  Rng rng(12);
  for (int trial = 0; trial < 20; ++trial) {
    const int m_feat = 1 + static_cast<int>(rng.below(3));
    const auto t = testutil::random_signal_table(rng, 150, m_feat, 3);
    for (auto structure : {BayesStructure::naive, BayesStructure::greedy}) {
      BayesNetOptions opt;
      opt.structure = structure;
      const auto model = train_bayes_net(t, opt);
      REQUIRE(model.variables() <= 4);
      for (const auto& cpt : model.cpts()) {
        for (Eigen::Index r = 0; r < cpt.rows(); ++r) CHECK(std::abs(cpt.row(r).sum() - 1.0) < 1e-12);
      }
      double total = 0.0;
      std::vector<int> values(static_cast<std::size_t>(model.variables()), 0);
      std::function<void(int)> rec = [&](int v) {
        if (v == model.variables()) {
          total += model.joint_probability(values);
          return;
        }
        for (int k = 0; k < model.cardinality(v); ++k) {
          values[static_cast<std::size_t>(v)] = k;
          rec(v + 1);
        }
      };
      rec(0);
      CHECK(std::abs(total - 1.0) < 1e-12);
      for (Eigen::Index i = 0; i < 5; ++i) {
        const double p = model.predict_proba(t.row(i));
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
      }
    }
  }
}

TEST_CASE("greedy structure search never scores below the naive start") {
  // Chain x0 -> x1 -> x2 with the target driven by x2.
  Rng rng(77);
  for (int trial = 0; trial < 10; ++trial) {
    std::vector<std::vector<int>> rows;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
      const int a = rng.bernoulli(0.5);
      const int b = rng.bernoulli(a ? 0.85 : 0.15);
      const int c = rng.bernoulli(b ? 0.8 : 0.2);
      rows.push_back({a, b, c});
      y.push_back(rng.bernoulli(c ? 0.75 : 0.25));
    }
    const auto t = make_binary_table(rows, y);
    BayesNetOptions naive;
    BayesNetOptions greedy;
    greedy.structure = BayesStructure::greedy;
    const auto mn = train_bayes_net(t, naive);
    const auto mg = train_bayes_net(t, greedy);
    CHECK(mg.score() >= mn.score() - 1e-9);
    CHECK(std::abs(mn.score() - bayes_structure_score(t, mn.parents())) < 1e-9);
    CHECK(std::abs(mg.score() - bayes_structure_score(t, mg.parents())) < 1e-9);
    for (const auto& ps : mg.parents()) CHECK(static_cast<int>(ps.size()) <= greedy.max_parents);
    // Acyclic: some topological order exists.
    std::vector<int> indeg(static_cast<std::size_t>(mg.variables()), 0);
    for (int v = 0; v < mg.variables(); ++v) indeg[static_cast<std::size_t>(v)] = static_cast<int>(mg.parents()[static_cast<std::size_t>(v)].size());
    std::vector<bool> done(indeg.size(), false);
    for (int round = 0; round < mg.variables(); ++round) {
      int pick = -1;
      for (int v = 0; v < mg.variables() && pick < 0; ++v) {
        if (done[static_cast<std::size_t>(v)]) continue;
        bool ready = true;
        for (int p : mg.parents()[static_cast<std::size_t>(v)]) ready = ready && done[static_cast<std::size_t>(p)];
        if (ready) pick = v;
      }
      REQUIRE(pick >= 0);
      done[static_cast<std::size_t>(pick)] = true;
    }
    CHECK(train_bayes_net(t, greedy).parents() == mg.parents());
  }
}

TEST_CASE("decision list on a pure single-feature table") {
  const auto t = make_binary_table({{0, 1}, {0, 0}, {0, 1}, {0, 0}, {0, 1}, {1, 0}, {1, 1}, {1, 0}, {1, 1}, {1, 0}},
                                   {0, 0, 0, 0, 0, 1, 1, 1, 1, 1});
  const auto m = train_decision_list(t);
  CHECK(m.rules().size() == 1);
  CHECK(m.default_rule().literals.empty());
  CHECK(accuracy(m, t) == 1.0);
  const auto& r = m.rules()[0];
  CHECK(r.precision == doctest::Approx(6.0 / 7.0));
  CHECK(r.coverage == 5);
  for (Eigen::Index i = 0; i < t.rows(); ++i) {
    if (r.matches(t.row(i))) CHECK(m.predict_proba(t.row(i)) == doctest::Approx(r.predicted == 1 ? r.precision : 1.0 - r.precision));
  }
}

TEST_CASE("decision list order semantics and disjoint coverage") {
  Rng rng(5);
  for (int trial = 0; trial < 10; ++trial) {
    const auto t = testutil::random_signal_table(rng, 300, 4, 3);
    const auto m = train_decision_list(t);
    // Training coverage counts are of rows not taken by earlier rules.
    int covered = 0;
    std::vector<bool> taken(static_cast<std::size_t>(t.rows()), false);
    for (const auto& rule : m.rules()) {
      int n = 0;
      for (Eigen::Index i = 0; i < t.rows(); ++i) {
        if (!taken[static_cast<std::size_t>(i)] && rule.matches(t.row(i))) {
          taken[static_cast<std::size_t>(i)] = true;
          ++n;
        }
      }
      CHECK(n == rule.coverage);
      covered += n;
    }
    CHECK(covered + m.default_rule().coverage == t.rows());

    // Rewriting every rule after the first match leaves predictions unchanged.
    for (Eigen::Index i = 0; i < t.rows(); ++i) {
      const std::size_t first = m.matching_rule(t.row(i));
      std::vector<Rule> rules = m.rules();
      for (std::size_t k = first + 1; k < rules.size(); ++k) rules[k].predicted = 1 - rules[k].predicted;
      Rule def = m.default_rule();
      if (first < rules.size()) def.predicted = 1 - def.predicted;
      const DecisionListModel altered(t.schema(), rules, def);
      CHECK(altered.predict_label(t.row(i)) == m.predict_label(t.row(i)));
      CHECK(altered.predict_proba(t.row(i)) == m.predict_proba(t.row(i)));
    }
  }
}

TEST_CASE("decision list recovers planted rules") {
  // if x0 = 1 and x1 = 1 then 1; else if x2 = 1 then 1; else 0.
  const auto planted = [](const std::vector<int>& r) { return (r[0] == 1 && r[1] == 1) || r[2] == 1 ? 1 : 0; };
  int recovered = 0;
  const int runs = 20;
  for (int seed = 0; seed < runs; ++seed) {
    Rng rng(static_cast<std::uint64_t>(1000 + seed));
    std::vector<std::vector<int>> rows;
    std::vector<int> y;
    for (int i = 0; i < 400; ++i) {
      std::vector<int> r;
      for (int j = 0; j < 5; ++j) r.push_back(static_cast<int>(rng.below(2)));
      y.push_back(planted(r));
      rows.push_back(r);
    }
    const auto t = make_binary_table(rows, y);
    const auto m = train_decision_list(t);
    bool same = true;
    for (int code = 0; code < 32; ++code) {
      std::vector<int> r;
      for (int j = 0; j < 5; ++j) r.push_back((code >> j) & 1);
      same = same && m.predict_label(testutil::to_row(r)) == planted(r);
    }
    recovered += same;
  }
  MESSAGE("planted decision lists recovered: " << recovered << "/" << runs);
  CHECK(recovered >= 18);
}
