#pragma once

#include <cstdint>

namespace treebench::stats {

/// Regularized lower incomplete gamma P(a, x).
double gamma_p(double a, double x);

/// Regularized upper incomplete gamma Q(a, x) = 1 - P(a, x).
double gamma_q(double a, double x);

/// Survival function of the chi-square distribution with `dof` degrees of freedom.
double chi_square_sf(double statistic, double dof);

/// P(X <= k) for X ~ Binomial(n, p).
double binomial_cdf(std::int64_t k, std::int64_t n, double p);

/// Exact upper confidence limit U for a binomial proportion: the p solving
/// P(X <= errors | n, p) = cf. Never below the observed rate errors / n.
double binomial_upper_bound(std::int64_t errors, std::int64_t n, double cf);

/// Stirling number of the second kind S(n, k), as a double.
double stirling2(int n, int k);

}  // namespace treebench::stats
