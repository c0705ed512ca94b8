#include <algorithm>
#include <sstream>

#include "treebench/baselines.hpp"

namespace treebench {

bool Rule::matches(RowRef row) const {
  for (const auto& l : literals) {
    if (row(l.feature) != l.code) return false;
  }
  return true;
}

DecisionListModel::DecisionListModel(std::vector<FeatureSpec> schema, std::vector<Rule> rules, Rule default_rule)
    : schema_(std::move(schema)), rules_(std::move(rules)), default_(std::move(default_rule)) {
  if (!default_.literals.empty()) throw DataError("default rule must be unconditional");
}

std::size_t DecisionListModel::matching_rule(RowRef row) const {
  if (row.size() != static_cast<Eigen::Index>(schema_.size())) throw UsageError("row does not match the model schema");
  for (std::size_t r = 0; r < rules_.size(); ++r) {
    if (rules_[r].matches(row)) return r;
  }
  return rules_.size();
}

double DecisionListModel::predict_proba(RowRef row) const {
  const std::size_t r = matching_rule(row);
  const Rule& rule = r < rules_.size() ? rules_[r] : default_;
  return rule.predicted == 1 ? rule.precision : 1.0 - rule.precision;
}

int DecisionListModel::predict_label(RowRef row) const {
  const std::size_t r = matching_rule(row);
  return (r < rules_.size() ? rules_[r] : default_).predicted;
}

std::string DecisionListModel::to_text() const {
  std::ostringstream os;
  for (const auto& rule : rules_) {
    os << "if ";
    for (std::size_t k = 0; k < rule.literals.size(); ++k) {
      if (k) os << " and ";
      os << schema_[static_cast<std::size_t>(rule.literals[k].feature)].name << " = " << rule.literals[k].code;
    }
    os << " then " << rule.predicted << "  (precision " << format_fixed(rule.precision, 4) << ", coverage "
       << rule.coverage << ")\n";
  }
  os << "else " << default_.predicted << "  (precision " << format_fixed(default_.precision, 4) << ", coverage "
     << default_.coverage << ")\n";
  return os.str();
}

namespace {

double laplace(int n_c, int n) { return (n_c + 1.0) / (n + 2.0); }

struct Stats {
  int n = 0;
  int n1 = 0;
  int predicted() const { return n1 * 2 >= n ? 1 : 0; }
  int n_c() const { return predicted() == 1 ? n1 : n - n1; }
  double precision() const { return laplace(n_c(), n); }
};

Stats stats_of(const CategoricalTable& data, const std::vector<Eigen::Index>& rows) {
  Stats s;
  for (auto i : rows) {
    ++s.n;
    s.n1 += data.label(i);
  }
  return s;
}

}  // namespace

DecisionListModel train_decision_list(const CategoricalTable& data, const DecisionListOptions& options) {
  if (options.min_coverage < 1 || options.max_literals < 1 || !(options.min_precision >= 0.0 && options.min_precision <= 1.0)) {
    throw UsageError("invalid decision list options");
  }
  if (data.rows() == 0) throw UsageError("cannot train a decision list on an empty table");
  std::vector<Eigen::Index> remaining(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) remaining[static_cast<std::size_t>(i)] = i;

  std::vector<Rule> rules;
  for (;;) {
    const Stats rest = stats_of(data, remaining);
    if (rest.n == 0 || rest.n1 == 0 || rest.n1 == rest.n) break;

    // Grow one conjunction literal by literal; every prefix meeting the
    // thresholds is a candidate.
    std::vector<Literal> lits;
    std::vector<Eigen::Index> covered = remaining;
    std::optional<Rule> best;
    for (int depth = 0; depth < options.max_literals; ++depth) {
      std::optional<Literal> pick;
      Stats pick_stats;
      std::vector<Eigen::Index> pick_rows;
      for (Eigen::Index f = 0; f < data.features(); ++f) {
        if (std::any_of(lits.begin(), lits.end(), [&](const Literal& l) { return l.feature == f; })) continue;
        for (int code : data.feature(f).allowed_codes) {
          std::vector<Eigen::Index> sub;
          for (auto i : covered) {
            if (data.code(i, f) == code) sub.push_back(i);
          }
          if (static_cast<int>(sub.size()) < options.min_coverage) continue;
          const Stats s = stats_of(data, sub);
          const bool better = !pick || s.precision() > pick_stats.precision() ||
                              (s.precision() == pick_stats.precision() && s.n > pick_stats.n);
          if (better) {
            pick = Literal{static_cast<int>(f), code};
            pick_stats = s;
            pick_rows = std::move(sub);
          }
        }
      }
      if (!pick) break;
      lits.push_back(*pick);
      covered = std::move(pick_rows);
      if (pick_stats.precision() >= options.min_precision) {
        const bool better = !best || pick_stats.precision() > best->precision ||
                            (pick_stats.precision() == best->precision && pick_stats.n > best->coverage);
        if (better) best = Rule{lits, pick_stats.predicted(), pick_stats.precision(), pick_stats.n};
      }
      if (pick_stats.n1 == 0 || pick_stats.n1 == pick_stats.n) break;
    }
    if (!best) break;
    std::vector<Eigen::Index> keep;
    for (auto i : remaining) {
      if (!best->matches(data.row(i))) keep.push_back(i);
    }
    remaining = std::move(keep);
    rules.push_back(std::move(*best));
  }

  Stats rest = stats_of(data, remaining);
  if (rest.n == 0) rest = stats_of(data, [&] {
                      std::vector<Eigen::Index> all(static_cast<std::size_t>(data.rows()));
                      for (Eigen::Index i = 0; i < data.rows(); ++i) all[static_cast<std::size_t>(i)] = i;
                      return all;
                    }());
  Rule def{{}, rest.predicted(), rest.precision(), static_cast<int>(remaining.size())};
  return DecisionListModel(data.schema(), std::move(rules), std::move(def));
}

}  // namespace treebench
