#include <doctest.h>

#include "oracles.hpp"
#include "treebench/criteria.hpp"

using namespace treebench;

namespace {

VectorXi counts(std::initializer_list<int> c) {
  VectorXi v(static_cast<Eigen::Index>(c.size()));
  Eigen::Index i = 0;
  for (int x : c) v(i++) = x;
  return v;
}

oracle::Counts to_oracle(const VectorXi& v) {
  oracle::Counts c;
  for (Eigen::Index i = 0; i < v.size(); ++i) c.push_back(v(i));
  return c;
}

VectorXi random_counts(Rng& rng, int classes, int max_count) {
  VectorXi v(classes);
  do {
    for (int i = 0; i < classes; ++i) v(i) = static_cast<int>(rng.below(static_cast<std::uint64_t>(max_count + 1)));
  } while (v.sum() == 0);
  return v;
}

}  // namespace

TEST_CASE("entropy worked values") {
  CHECK(entropy(counts({10, 0})) == 0.0);
  CHECK(entropy(counts({5, 5})) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(entropy(counts({346, 394})) == doctest::Approx(0.996963).epsilon(1e-6));
  CHECK(std::abs(entropy(counts({346, 394})) - oracle::entropy({346, 394})) < 1e-14);
  CHECK_THROWS_AS(entropy(counts({0, 0})), UsageError);
  CHECK_THROWS_AS(entropy(VectorXi()), UsageError);
}

TEST_CASE("info gain worked values") {
  const VectorXi parent = counts({6, 4});
  MatrixXi same(2, 1);
  same << 6, 4;
  CHECK(std::abs(info_gain(parent, same)) < 1e-15);

  MatrixXi perfect(2, 2);
  perfect << 5, 0, 0, 5;
  CHECK(info_gain(counts({5, 5}), perfect) == doctest::Approx(1.0).epsilon(1e-15));

  MatrixXi split(2, 2);
  split << 4, 2, 1, 3;  // columns (4,1) and (2,3)
  const double g = info_gain(parent, split);
  CHECK(g == doctest::Approx(0.1245).epsilon(1e-3));
  CHECK(std::abs(g - oracle::info_gain({6, 4}, {{4, 1}, {2, 3}})) < 1e-14);

  MatrixXi bad(2, 2);
  bad << 4, 2, 1, 2;
  CHECK_THROWS_AS(info_gain(parent, bad), UsageError);
}

TEST_CASE("gini worked values") {
  CHECK(gini(counts({10, 0})) == 0.0);
  CHECK(gini(counts({5, 5})) == doctest::Approx(0.5).epsilon(1e-15));
  CostMatrix cost(2, 2);
  cost << 0.0, 2.0, 1.0, 0.0;  // C(0|1) = 2, C(1|0) = 1
  CHECK(std::abs(gini(counts({3, 7}), cost) - 0.63) < 1e-12);
  CHECK_THROWS_AS(gini(counts({0, 0})), UsageError);

  CostMatrix diag(2, 2);
  diag << 1.0, 1.0, 1.0, 0.0;
  CHECK_THROWS_AS(validate_cost(diag), UsageError);
}

TEST_CASE("gini decrease worked values") {
  CHECK(std::abs(gini_decrease(counts({6, 4}), counts({4, 1}), counts({2, 3})) - 0.08) < 1e-12);
  CHECK(gini_decrease(counts({5, 5}), counts({5, 0}), counts({0, 5})) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(std::abs(gini_decrease(counts({6, 4}), counts({6, 4}), counts({0, 0}))) < 1e-15);
  CHECK_THROWS_AS(gini_decrease(counts({6, 4}), counts({4, 1}), counts({2, 2})), UsageError);
}

TEST_CASE("chi-square worked values") {
  MatrixXi indep(2, 2);
  indep << 10, 10, 10, 10;
  const auto r0 = chi_square(indep);
  CHECK(r0.statistic == 0.0);
  CHECK(r0.p_value == doctest::Approx(1.0));

  MatrixXi diag(2, 2);
  diag << 20, 0, 0, 20;
  const auto r1 = chi_square(diag);
  CHECK(r1.statistic == 40.0);
  CHECK(r1.dof == 1);

  CHECK(stats::chi_square_sf(3.841, 1) == doctest::Approx(0.05).epsilon(1e-3));
  CHECK(std::abs(stats::chi_square_sf(3.841, 1) - 0.0500) < 5e-5);

  MatrixXi degenerate(2, 2);
  degenerate << 10, 0, 10, 0;
  CHECK_THROWS_AS(chi_square(degenerate), UsageError);

  // A zero-marginal row is dropped rather than poisoning the statistic.
  MatrixXi padded(3, 2);
  padded << 20, 0, 0, 0, 0, 20;
  CHECK(chi_square(padded).statistic == 40.0);
  CHECK(chi_square(padded).dof == 1);
}

TEST_CASE("kernels agree with direct formulas on random inputs") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(3));
    const VectorXi c = random_counts(rng, classes, 50);
    const auto oc = to_oracle(c);
    REQUIRE(std::abs(entropy(c) - oracle::entropy(oc)) < 1e-12);
    REQUIRE(std::abs(gini(c) - oracle::gini_unit(oc)) < 1e-12);

    CostMatrix cost(classes, classes);
    std::vector<std::vector<double>> oc_cost(static_cast<std::size_t>(classes),
                                             std::vector<double>(static_cast<std::size_t>(classes)));
    for (int i = 0; i < classes; ++i) {
      for (int j = 0; j < classes; ++j) {
        cost(i, j) = i == j ? 0.0 : 0.5 + rng.uniform() * 2.0;
        oc_cost[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = cost(i, j);
      }
    }
    REQUIRE(std::abs(gini(c, cost) - oracle::gini_cost(oc, oc_cost)) < 1e-12);

    // Random multiway partition of the parent's rows.
    const int branches = 2 + static_cast<int>(rng.below(3));
    MatrixXi children = MatrixXi::Zero(classes, branches);
    for (int k = 0; k < classes; ++k) {
      for (int r = 0; r < c(k); ++r) children(k, static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(branches))))++;
    }
    std::vector<oracle::Counts> och;
    for (int b = 0; b < branches; ++b) och.push_back(to_oracle(children.col(b)));
    const double g = info_gain(c, children);
    REQUIRE(std::abs(g - oracle::info_gain(oc, och)) < 1e-12);
    REQUIRE(g >= -1e-12);
    REQUIRE(g <= entropy(c) + 1e-12);

    if (classes == 2) {
      const VectorXi left = children.col(0);
      const VectorXi right = c - left;
      const double d = gini_decrease(c, left, right);
      REQUIRE(std::abs(d - oracle::gini_decrease(to_oracle(left), to_oracle(right))) < 1e-12);
      REQUIRE(d >= -1e-12);
    }
  }
}

TEST_CASE("entropy is permutation invariant and maximal at uniform") {
  Rng rng(5);
  for (int trial = 0; trial < 200; ++trial) {
    const int classes = 2 + static_cast<int>(rng.below(4));
    VectorXi c = random_counts(rng, classes, 30);
    VectorXi p = c.reverse();
    CHECK(std::abs(entropy(c) - entropy(p)) < 1e-12);
    CHECK(entropy(c) <= std::log2(classes) + 1e-12);
  }
  CHECK(entropy(counts({7, 7, 7, 7})) == doctest::Approx(2.0).epsilon(1e-15));
}

TEST_CASE("Pearson matches the direct formula") {
  Rng rng(21);
  for (int trial = 0; trial < 200; ++trial) {
    const int r = 2 + static_cast<int>(rng.below(3));
    const int c = 2 + static_cast<int>(rng.below(2));
    MatrixXi t(r, c);
    std::vector<std::vector<double>> ot(static_cast<std::size_t>(r), std::vector<double>(static_cast<std::size_t>(c)));
    for (int i = 0; i < r; ++i) {
      for (int j = 0; j < c; ++j) {
        t(i, j) = 1 + static_cast<int>(rng.below(40));
        ot[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = t(i, j);
      }
    }
    const auto res = chi_square(t);
    CHECK(std::abs(res.statistic - oracle::pearson(ot)) < 1e-9 * std::max(1.0, res.statistic));
    CHECK(res.dof == (r - 1) * (c - 1));
    CHECK(res.p_value >= 0.0);
    CHECK(res.p_value <= 1.0);
  }
}

TEST_CASE("Pearson and likelihood-ratio agree on large independent tables") {
  Rng rng(99);
  int close = 0;
  const int trials = 200;
  for (int trial = 0; trial < trials; ++trial) {
    MatrixXi t = MatrixXi::Zero(3, 2);
    for (int k = 0; k < 10000; ++k) {
      const int row = static_cast<int>(rng.categorical({0.5, 0.3, 0.2}));
      const int col = rng.bernoulli(0.4) ? 1 : 0;
      t(row, col)++;
    }
    const double p = chi_square(t, ChiSquareVariant::pearson).statistic;
    const double lr = chi_square(t, ChiSquareVariant::likelihood_ratio).statistic;
    if (p > 0.0 && std::abs(p - lr) / p < 0.1) ++close;
  }
  CHECK(close >= 190);
}

TEST_CASE("survival function and binomial helpers") {
  CHECK(stats::chi_square_sf(0.0, 3) == doctest::Approx(1.0));
  CHECK(stats::chi_square_sf(6.635, 1) == doctest::Approx(0.01).epsilon(1e-2));
  CHECK(stats::chi_square_sf(5.991, 2) == doctest::Approx(0.05).epsilon(1e-3));
  // chi-square with 2 dof is exponential with mean 2.
  for (double x : {0.5, 1.0, 4.0, 10.0}) CHECK(std::abs(stats::chi_square_sf(x, 2) - std::exp(-x / 2.0)) < 1e-10);

  CHECK(stats::binomial_cdf(0, 5, 0.5) == doctest::Approx(1.0 / 32.0));
  CHECK(stats::binomial_cdf(5, 5, 0.3) == doctest::Approx(1.0));
  // Zero observed errors: the upper bound solves (1-U)^n = cf.
  CHECK(stats::binomial_upper_bound(0, 10, 0.25) == doctest::Approx(1.0 - std::pow(0.25, 0.1)).epsilon(1e-9));
  for (int e = 0; e <= 6; ++e) {
    const double u = stats::binomial_upper_bound(e, 12, 0.25);
    CHECK(u >= e / 12.0);
    CHECK(stats::binomial_cdf(e, 12, u) == doctest::Approx(0.25).epsilon(1e-6));
  }
  CHECK(stats::stirling2(3, 2) == 3.0);
  CHECK(stats::stirling2(4, 2) == 7.0);
  CHECK(stats::stirling2(5, 3) == 25.0);
}
