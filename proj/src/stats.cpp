#include "treebench/stats.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "treebench/core.hpp"

namespace treebench {

std::string format_fixed(double value, int precision) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", precision, value);
  std::string s(buf);
  if (s == "-0" || s.rfind("-0.", 0) == 0) {
    // Avoid "-0.000" for values that round to zero.
    bool all_zero = true;
    for (char c : s) {
      if (c != '-' && c != '0' && c != '.') all_zero = false;
    }
    if (all_zero) s.erase(0, 1);
  }
  return s;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, value);
  if (ec != std::errc{}) throw Error("format_double failed");
  return std::string(buf, ptr);
}

}  // namespace treebench

namespace treebench::stats {
namespace {

constexpr double kRelTol = 1e-10;
constexpr int kMaxIter = 10000;

// Series expansion, converges for x < a + 1.
double gamma_p_series(double a, double x) {
  double term = 1.0 / a;
  double sum = term;
  for (int n = 1; n < kMaxIter; ++n) {
    term *= x / (a + n);
    sum += term;
    if (std::abs(term) < std::abs(sum) * kRelTol * 1e-3) break;
  }
  return sum * std::exp(-x + a * std::log(x) - std::lgamma(a));
}

// Continued fraction (modified Lentz), converges for x >= a + 1.
double gamma_q_fraction(double a, double x) {
  constexpr double tiny = 1e-300;
  double b = x + 1.0 - a;
  double c = 1.0 / tiny;
  double d = 1.0 / b;
  double h = d;
  for (int i = 1; i < kMaxIter; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    d = an * d + b;
    if (std::abs(d) < tiny) d = tiny;
    c = b + an / c;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = d * c;
    h *= delta;
    if (std::abs(delta - 1.0) < kRelTol * 1e-3) break;
  }
  return std::exp(-x + a * std::log(x) - std::lgamma(a)) * h;
}

}  // namespace

double gamma_p(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw UsageError("gamma_p: requires a > 0 and x >= 0");
  if (x == 0.0) return 0.0;
  if (x < a + 1.0) return gamma_p_series(a, x);
  return 1.0 - gamma_q_fraction(a, x);
}

double gamma_q(double a, double x) {
  if (a <= 0.0 || x < 0.0) throw UsageError("gamma_q: requires a > 0 and x >= 0");
  if (x == 0.0) return 1.0;
  if (x < a + 1.0) return 1.0 - gamma_p_series(a, x);
  return gamma_q_fraction(a, x);
}

double chi_square_sf(double statistic, double dof) {
  if (dof <= 0.0) throw UsageError("chi_square_sf: dof must be positive");
  if (statistic <= 0.0) return 1.0;
  return gamma_q(dof / 2.0, statistic / 2.0);
}

double binomial_cdf(std::int64_t k, std::int64_t n, double p) {
  if (n < 0) throw UsageError("binomial_cdf: negative n");
  if (k < 0) return 0.0;
  if (k >= n) return 1.0;
  if (p <= 0.0) return 1.0;
  if (p >= 1.0) return 0.0;
  // Sum pmf terms in log space; n stays in the thousands here.
  const double lp = std::log(p);
  const double lq = std::log1p(-p);
  const double lgn = std::lgamma(static_cast<double>(n) + 1.0);
  double sum = 0.0;
  for (std::int64_t i = 0; i <= k; ++i) {
    const double lpmf = lgn - std::lgamma(static_cast<double>(i) + 1.0) -
                        std::lgamma(static_cast<double>(n - i) + 1.0) + i * lp + (n - i) * lq;
    sum += std::exp(lpmf);
  }
  return std::min(sum, 1.0);
}

double binomial_upper_bound(std::int64_t errors, std::int64_t n, double cf) {
  if (n <= 0) throw UsageError("binomial_upper_bound: n must be positive");
  if (errors < 0 || errors > n) throw UsageError("binomial_upper_bound: errors out of range");
  if (!(cf > 0.0 && cf <= 1.0)) throw UsageError("binomial_upper_bound: cf must lie in (0, 1]");
  const double observed = static_cast<double>(errors) / static_cast<double>(n);
  if (errors == n) return 1.0;
  if (errors == 0) return std::max(observed, 1.0 - std::pow(cf, 1.0 / static_cast<double>(n)));
  // P(X <= errors | p) decreases in p; bisect for the crossing with cf.
  double lo = 0.0;
  double hi = 1.0;
  for (int it = 0; it < 200 && hi - lo > 1e-15; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (binomial_cdf(errors, n, mid) > cf) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return std::max(observed, 0.5 * (lo + hi));
}

double stirling2(int n, int k) {
  if (n < 0 || k < 0) throw UsageError("stirling2: negative argument");
  if (k > n) return 0.0;
  std::vector<double> row(static_cast<std::size_t>(k) + 1, 0.0);
  row[0] = 1.0;  // S(0, 0)
  for (int i = 1; i <= n; ++i) {
    for (int j = std::min(i, k); j >= 1; --j) {
      row[j] = j * row[j] + row[j - 1];
    }
    row[0] = 0.0;
  }
  return row[k];
}

}  // namespace treebench::stats
