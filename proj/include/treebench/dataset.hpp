#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "treebench/core.hpp"

namespace treebench {

/// One categorical predictor (or the target) after recoding.
struct FeatureSpec {
  std::string name;
  std::vector<int> allowed_codes;           // sorted, unique
  std::vector<std::int64_t> missing_codes;  // raw codes meaning "not reported"/"unknown"
  std::map<int, std::string> code_labels;

  void validate() const;
  bool allows(int code) const;
  std::string label(int code) const;
  /// Position of `code` in allowed_codes, or -1.
  int code_index(int code) const;
};

/// Schema-free integer table as read from disk; keeps raw codes verbatim.
struct RawTable {
  std::vector<std::string> columns;
  RawMatrix values;

  Eigen::Index rows() const { return values.rows(); }
  /// Case-insensitive lookup; throws DataError("column not found: X").
  Eigen::Index column_index(const std::string& name) const;
  RawTable select_rows(const std::vector<Eigen::Index>& rows) const;
};

/// Coded training table: small-integer codes per feature plus a binary target.
class CategoricalTable {
 public:
  CategoricalTable() = default;
  /// Validates every cell against its spec and the target against {0,1}.
  CategoricalTable(std::vector<FeatureSpec> schema, CodeMatrix codes, VectorXi target,
                   FeatureSpec target_spec = default_target_spec());

  static FeatureSpec default_target_spec();

  const std::vector<FeatureSpec>& schema() const { return schema_; }
  const FeatureSpec& feature(Eigen::Index j) const { return schema_.at(static_cast<std::size_t>(j)); }
  const FeatureSpec& target_spec() const { return target_spec_; }
  const CodeMatrix& codes() const { return codes_; }
  const VectorXi& target() const { return target_; }

  Eigen::Index rows() const { return codes_.rows(); }
  Eigen::Index features() const { return codes_.cols(); }
  RowRef row(Eigen::Index i) const { return codes_.row(i); }
  int code(Eigen::Index i, Eigen::Index j) const { return codes_(i, j); }
  int label(Eigen::Index i) const { return target_(i); }

  /// Index of the named feature; throws DataError when absent.
  Eigen::Index feature_index(const std::string& name) const;
  std::vector<std::string> feature_names() const;

  CategoricalTable select_rows(std::span<const Eigen::Index> rows) const;
  CategoricalTable select_features(std::span<const Eigen::Index> features) const;

  /// Class counts (index = class code) over all rows.
  ClassCounts class_counts() const;

  bool operator==(const CategoricalTable& other) const;

 private:
  std::vector<FeatureSpec> schema_;
  FeatureSpec target_spec_;
  CodeMatrix codes_;
  VectorXi target_;
};

/// Stable hash over names, codes and labels of a schema.
std::uint64_t schema_hash(const std::vector<FeatureSpec>& schema);
std::string hash_hex(std::uint64_t h);

// ---------------------------------------------------------------- loading

struct DelimitedOptions {
  char delimiter = ',';
  bool header = true;
};

/// Reads the named columns of a delimited file (header names matched case
/// insensitively). Only the requested columns must parse as integers.
RawTable load_delimited(const std::filesystem::path& path, const std::vector<std::string>& columns,
                        const DelimitedOptions& options = {});

/// Same, reading every column present in the header.
RawTable load_delimited(const std::filesystem::path& path, const DelimitedOptions& options = {});

void write_delimited(const std::filesystem::path& path, const RawTable& table, char delimiter = ',');

// ---------------------------------------------------------------- recoding

/// One raw-value predicate. Ranges are inclusive.
struct Predicate {
  enum class Kind { in, range, lt, le, gt, ge, any };
  Kind kind = Kind::any;
  std::vector<std::int64_t> values;  // `in`
  std::int64_t lo = 0;               // range lower / comparison operand
  std::int64_t hi = 0;               // range upper

  bool matches(std::int64_t raw) const;
  std::string to_string() const;
};

struct RecodeRule {
  Predicate when;
  int code = 0;
};

/// Maps one raw source field to one coded output feature. First match wins.
struct OutputRule {
  FeatureSpec spec;
  std::string source;
  std::vector<RecodeRule> rules;
  /// What happens to a non-missing raw code no rule covers: drop the row,
  /// assign a code, or (when unset) fail.
  enum class Default { error, drop, assign };
  Default default_action = Default::error;
  int default_code = 0;

  std::optional<int> apply(std::int64_t raw) const;
};

struct CohortFilter {
  std::string alignment_field;
  std::vector<std::int64_t> curve_codes;
  std::string negotiating_field;  // empty: no movement predicate
  std::vector<std::int64_t> negotiating_codes;
};

struct RecodeRuleSet {
  std::vector<OutputRule> features;
  OutputRule target;
  std::optional<CohortFilter> cohort;

  /// Raw columns the rules read (features, target, cohort predicates).
  std::vector<std::string> source_columns() const;
  std::vector<FeatureSpec> schema() const;
};

/// Parses the declarative rule text format (see README).
RecodeRuleSet parse_rules(const std::string& text);
RecodeRuleSet load_rules(const std::filesystem::path& path);
std::string format_rules(const RecodeRuleSet& rules);

/// Rules mapping each allowed code of `schema` to itself.
RecodeRuleSet identity_rules(const std::vector<FeatureSpec>& schema, const FeatureSpec& target_spec);

struct RecodeAudit {
  std::int64_t rows_in = 0;
  std::int64_t rows_out = 0;
  /// Per output feature: rows dropped because of a missing code.
  std::map<std::string, std::int64_t> dropped_missing;
  /// Per output feature: rows dropped by a `default = drop` action.
  std::map<std::string, std::int64_t> dropped_default;

  std::string to_text() const;
};

struct RecodeResult {
  CategoricalTable table;
  RecodeAudit audit;
};

/// Applies the rule set. Strict mode drops rows with a missing code in any
/// source field (attributed to the first such feature); non-strict mode
/// fails on a missing code since no imputation exists.
RecodeResult recode(const RawTable& raw, const RecodeRuleSet& rules, bool strict = true);

/// Inverse view of a coded table as a raw table (codes and target verbatim).
RawTable to_raw(const CategoricalTable& table);

struct FilterResult {
  RawTable table;
  std::int64_t retained = 0;
  std::int64_t discarded = 0;
  /// Set when no row survives; not an error.
  bool empty_warning = false;
};

/// Keeps rows on a curve alignment that also pass the negotiating-a-curve predicate.
FilterResult filter_curve_cohort(const RawTable& raw, const CohortFilter& filter);

// ---------------------------------------------------------------- crosstab

struct CrosstabReport {
  std::string row_variable;
  std::string column_variable;
  std::vector<std::int64_t> row_values;
  std::vector<std::int64_t> column_values;
  Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> counts;

  std::int64_t grand_total() const { return counts.sum(); }
  std::int64_t row_total(Eigen::Index r) const { return counts.row(r).sum(); }
  std::int64_t column_total(Eigen::Index c) const { return counts.col(c).sum(); }
  /// Exact percentages in [0, 100].
  double row_percent(Eigen::Index r, Eigen::Index c) const;
  double column_percent(Eigen::Index r, Eigen::Index c) const;
  double cell_percent(Eigen::Index r, Eigen::Index c) const;

  /// Text layout: count, Row%, Col%, Cell% per column, integer percentages.
  std::string to_text(const std::map<std::int64_t, std::string>& row_labels = {},
                      const std::map<std::int64_t, std::string>& column_labels = {}) const;
};

CrosstabReport crosstab(const RawTable& table, const std::string& row_var, const std::string& target_var);
/// Feature vs target on a coded table.
CrosstabReport crosstab(const CategoricalTable& table, const std::string& row_var);

/// Integer display rounding (half away from zero).
int display_percent(double percent);

// ---------------------------------------------------------------- synthetic data

/// Generative model for synthetic tables. The target is drawn from a logistic
/// model over main effects and pairwise interactions, optionally thresholded,
/// then flipped with probability `label_noise`.
struct SyntheticRules {
  /// Per feature: sampling weights over allowed codes (empty = uniform).
  std::vector<std::vector<double>> code_weights;
  double intercept = 0.0;
  struct MainEffect {
    int feature;
    int code;
    double weight;
  };
  struct Interaction {
    int feature_a;
    int code_a;
    int feature_b;
    int code_b;
    double weight;  // added when exactly one of the two indicators holds (XOR)
  };
  std::vector<MainEffect> main_effects;
  std::vector<Interaction> interactions;
  bool deterministic = false;  // y = [eta > 0] instead of Bernoulli(sigmoid(eta))
  double label_noise = 0.0;

  /// Features carrying signal (the planted ground truth).
  std::vector<int> relevant_features() const;
};

CategoricalTable generate_synthetic(const std::vector<FeatureSpec>& schema, std::int64_t n, std::uint64_t seed,
                                    const SyntheticRules& rules);

/// Binary feature spec named `name` with codes {0,1}.
FeatureSpec binary_feature(const std::string& name, const std::string& label0 = "0",
                           const std::string& label1 = "1");

/// The 22 coded curve-crash predictors, including a
/// month-of-crash winter indicator.
std::vector<FeatureSpec> crash_schema();

/// Default generator over crash_schema(): planted signal on extent of damage,
/// pre-impact location, first harmful event and winter month, class-1 rate
/// near 394/740.
SyntheticRules crash_rules();

/// `relevant` informative binary features followed by `noise` pure-noise ones.
std::vector<FeatureSpec> planted_schema(int relevant, int noise);
SyntheticRules planted_relevance_rules(int relevant, int noise, double weight = 2.0);

/// XOR interaction between features 0 and 1 plus noise features; invisible to
/// main-effects models.
SyntheticRules planted_interaction_rules(int noise, double weight = 3.0, double label_noise = 0.1);

/// CRSS-style raw vehicle records with missing codes and non-curve rows,
/// together with the matching rule set (see data/fixture).
struct RawFixture {
  RawTable table;
  RecodeRuleSet rules;
};
RawFixture make_crss_fixture(std::int64_t n, std::uint64_t seed);
std::string crss_rules_text();

}  // namespace treebench
