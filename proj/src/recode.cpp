#include <algorithm>
#include <charconv>
#include <fstream>
#include <set>
#include <sstream>

#include "treebench/dataset.hpp"

namespace treebench {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> tokens(const std::string& s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == ' ' || c == '\t' || c == ',') {
      if (!cur.empty()) out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!cur.empty()) out.push_back(cur);
  return out;
}

std::int64_t parse_int(const std::string& s, std::size_t line) {
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || ec != std::errc{} || ptr != s.data() + s.size()) {
    throw DataError("rules line " + std::to_string(line) + ": expected integer, got '" + s + "'");
  }
  return v;
}

std::vector<std::int64_t> parse_ints(const std::string& s, std::size_t line) {
  std::vector<std::int64_t> out;
  for (const auto& t : tokens(s)) out.push_back(parse_int(t, line));
  return out;
}

Predicate parse_predicate(const std::string& text, std::size_t line) {
  auto t = tokens(text);
  if (t.empty()) throw DataError("rules line " + std::to_string(line) + ": empty predicate");
  Predicate p;
  const std::string& op = t[0];
  auto need = [&](std::size_t n) {
    if (t.size() != n + 1) {
      throw DataError("rules line " + std::to_string(line) + ": '" + op + "' takes " + std::to_string(n) +
                      " operand(s)");
    }
  };
  if (op == "in") {
    if (t.size() < 2) throw DataError("rules line " + std::to_string(line) + ": 'in' needs values");
    p.kind = Predicate::Kind::in;
    for (std::size_t i = 1; i < t.size(); ++i) p.values.push_back(parse_int(t[i], line));
  } else if (op == "range") {
    need(2);
    p.kind = Predicate::Kind::range;
    p.lo = parse_int(t[1], line);
    p.hi = parse_int(t[2], line);
    if (p.lo > p.hi) throw DataError("rules line " + std::to_string(line) + ": empty range");
  } else if (op == "lt" || op == "le" || op == "gt" || op == "ge") {
    need(1);
    p.kind = op == "lt" ? Predicate::Kind::lt
             : op == "le" ? Predicate::Kind::le
             : op == "gt" ? Predicate::Kind::gt
                          : Predicate::Kind::ge;
    p.lo = parse_int(t[1], line);
  } else if (op == "any") {
    need(0);
    p.kind = Predicate::Kind::any;
  } else {
    throw DataError("rules line " + std::to_string(line) + ": unknown predicate '" + op + "'");
  }
  return p;
}

}  // namespace

bool Predicate::matches(std::int64_t raw) const {
  switch (kind) {
    case Kind::in:
      return std::find(values.begin(), values.end(), raw) != values.end();
    case Kind::range:
      return raw >= lo && raw <= hi;
    case Kind::lt:
      return raw < lo;
    case Kind::le:
      return raw <= lo;
    case Kind::gt:
      return raw > lo;
    case Kind::ge:
      return raw >= lo;
    case Kind::any:
      return true;
  }
  return false;
}

std::string Predicate::to_string() const {
  switch (kind) {
    case Kind::in: {
      std::string s = "in";
      for (auto v : values) s += " " + std::to_string(v);
      return s;
    }
    case Kind::range:
      return "range " + std::to_string(lo) + " " + std::to_string(hi);
    case Kind::lt:
      return "lt " + std::to_string(lo);
    case Kind::le:
      return "le " + std::to_string(lo);
    case Kind::gt:
      return "gt " + std::to_string(lo);
    case Kind::ge:
      return "ge " + std::to_string(lo);
    case Kind::any:
      return "any";
  }
  return {};
}

std::optional<int> OutputRule::apply(std::int64_t raw) const {
  for (const auto& r : rules) {
    if (r.when.matches(raw)) return r.code;
  }
  switch (default_action) {
    case Default::assign:
      return default_code;
    case Default::drop:
      return std::nullopt;
    case Default::error:
      break;
  }
  throw DataError("raw code " + std::to_string(raw) + " in field " + source + " not covered by any rule for '" +
                  spec.name + "'");
}

std::vector<std::string> RecodeRuleSet::source_columns() const {
  std::vector<std::string> out;
  auto add = [&](const std::string& c) {
    if (!c.empty() && std::find(out.begin(), out.end(), c) == out.end()) out.push_back(c);
  };
  for (const auto& f : features) add(f.source);
  add(target.source);
  if (cohort) {
    add(cohort->alignment_field);
    add(cohort->negotiating_field);
  }
  return out;
}

std::vector<FeatureSpec> RecodeRuleSet::schema() const {
  std::vector<FeatureSpec> out;
  for (const auto& f : features) out.push_back(f.spec);
  return out;
}

// ---------------------------------------------------------------- rule text format

namespace {

void finish_rule(OutputRule& rule, std::size_t line) {
  if (rule.source.empty()) throw DataError("rules: section '" + rule.spec.name + "' has no source");
  std::set<int> codes;
  for (const auto& [c, _] : rule.spec.code_labels) codes.insert(c);
  if (codes.empty()) {
    for (const auto& r : rule.rules) codes.insert(r.code);
    if (rule.default_action == OutputRule::Default::assign) codes.insert(rule.default_code);
    for (int c : codes) rule.spec.code_labels[c] = std::to_string(c);
  }
  rule.spec.allowed_codes.assign(codes.begin(), codes.end());
  for (const auto& r : rule.rules) {
    if (!codes.contains(r.code)) {
      throw DataError("rules near line " + std::to_string(line) + ": '" + rule.spec.name + "' maps to code " +
                      std::to_string(r.code) + " which has no label");
    }
  }
  if (rule.default_action == OutputRule::Default::assign && !codes.contains(rule.default_code)) {
    throw DataError("rules: default code for '" + rule.spec.name + "' has no label");
  }
  rule.spec.validate();
}

}  // namespace

RecodeRuleSet parse_rules(const std::string& text) {
  RecodeRuleSet set;
  enum class Section { none, feature, target, cohort } section = Section::none;
  OutputRule current;
  bool have_target = false;
  CohortFilter cohort;
  bool have_cohort = false;
  std::size_t line_no = 0;
  std::size_t section_line = 0;

  auto flush = [&]() {
    if (section == Section::feature) {
      finish_rule(current, section_line);
      set.features.push_back(current);
    } else if (section == Section::target) {
      finish_rule(current, section_line);
      set.target = current;
      have_target = true;
    }
    current = OutputRule{};
  };

  std::istringstream in(text);
  std::string raw_line;
  while (std::getline(in, raw_line)) {
    ++line_no;
    std::string line = raw_line;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw DataError("rules line " + std::to_string(line_no) + ": unterminated section");
      flush();
      auto parts = tokens(line.substr(1, line.size() - 2));
      if (parts.empty()) throw DataError("rules line " + std::to_string(line_no) + ": empty section");
      section_line = line_no;
      if (parts[0] == "feature" || parts[0] == "target") {
        if (parts.size() != 2) throw DataError("rules line " + std::to_string(line_no) + ": section needs a name");
        section = parts[0] == "feature" ? Section::feature : Section::target;
        if (section == Section::target && have_target) throw DataError("rules: duplicate [target] section");
        current.spec.name = parts[1];
      } else if (parts[0] == "cohort") {
        section = Section::cohort;
        have_cohort = true;
      } else {
        throw DataError("rules line " + std::to_string(line_no) + ": unknown section '" + parts[0] + "'");
      }
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw DataError("rules line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    if (section == Section::none) throw DataError("rules line " + std::to_string(line_no) + ": key outside section");

    if (section == Section::cohort) {
      if (key == "alignment_field") {
        cohort.alignment_field = value;
      } else if (key == "curve_codes") {
        cohort.curve_codes = parse_ints(value, line_no);
      } else if (key == "negotiating_field") {
        cohort.negotiating_field = value;
      } else if (key == "negotiating_codes") {
        cohort.negotiating_codes = parse_ints(value, line_no);
      } else {
        throw DataError("rules line " + std::to_string(line_no) + ": unknown cohort key '" + key + "'");
      }
      continue;
    }

    if (key == "source") {
      current.source = value;
    } else if (key == "missing") {
      current.spec.missing_codes = parse_ints(value, line_no);
    } else if (key.rfind("label", 0) == 0) {
      auto parts = tokens(key);
      if (parts.size() != 2) throw DataError("rules line " + std::to_string(line_no) + ": expected 'label <code>'");
      current.spec.code_labels[static_cast<int>(parse_int(parts[1], line_no))] = value;
    } else if (key == "rule") {
      const auto arrow = value.find("->");
      if (arrow == std::string::npos) throw DataError("rules line " + std::to_string(line_no) + ": rule needs '->'");
      RecodeRule r;
      r.when = parse_predicate(value.substr(0, arrow), line_no);
      r.code = static_cast<int>(parse_int(trim(value.substr(arrow + 2)), line_no));
      current.rules.push_back(std::move(r));
    } else if (key == "default") {
      if (value == "drop") {
        current.default_action = OutputRule::Default::drop;
      } else if (value == "error") {
        current.default_action = OutputRule::Default::error;
      } else {
        current.default_action = OutputRule::Default::assign;
        current.default_code = static_cast<int>(parse_int(value, line_no));
      }
    } else {
      throw DataError("rules line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  flush();
  if (!have_target) throw DataError("rules: missing [target] section");
  if (set.features.empty()) throw DataError("rules: no [feature] sections");
  if (have_cohort) {
    if (cohort.alignment_field.empty() || cohort.curve_codes.empty()) {
      throw DataError("rules: [cohort] needs alignment_field and curve_codes");
    }
    set.cohort = cohort;
  }
  return set;
}

RecodeRuleSet load_rules(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read rules file: " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_rules(ss.str());
}

std::string format_rules(const RecodeRuleSet& rules) {
  std::ostringstream os;
  auto emit = [&](const char* kind, const OutputRule& r) {
    os << '[' << kind << ' ' << r.spec.name << "]\n";
    os << "source = " << r.source << '\n';
    if (!r.spec.missing_codes.empty()) {
      os << "missing =";
      for (auto m : r.spec.missing_codes) os << ' ' << m;
      os << '\n';
    }
    for (const auto& [c, l] : r.spec.code_labels) os << "label " << c << " = " << l << '\n';
    for (const auto& rule : r.rules) os << "rule = " << rule.when.to_string() << " -> " << rule.code << '\n';
    switch (r.default_action) {
      case OutputRule::Default::drop:
        os << "default = drop\n";
        break;
      case OutputRule::Default::assign:
        os << "default = " << r.default_code << '\n';
        break;
      case OutputRule::Default::error:
        break;
    }
    os << '\n';
  };
  if (rules.cohort) {
    os << "[cohort]\nalignment_field = " << rules.cohort->alignment_field << "\ncurve_codes =";
    for (auto c : rules.cohort->curve_codes) os << ' ' << c;
    os << '\n';
    if (!rules.cohort->negotiating_field.empty()) {
      os << "negotiating_field = " << rules.cohort->negotiating_field << "\nnegotiating_codes =";
      for (auto c : rules.cohort->negotiating_codes) os << ' ' << c;
      os << '\n';
    }
    os << '\n';
  }
  emit("target", rules.target);
  for (const auto& f : rules.features) emit("feature", f);
  return os.str();
}

RecodeRuleSet identity_rules(const std::vector<FeatureSpec>& schema, const FeatureSpec& target_spec) {
  auto make = [](const FeatureSpec& spec) {
    OutputRule r;
    r.spec = spec;
    r.source = spec.name;
    for (int c : spec.allowed_codes) {
      RecodeRule rule;
      rule.when.kind = Predicate::Kind::in;
      rule.when.values = {c};
      rule.code = c;
      r.rules.push_back(rule);
    }
    return r;
  };
  RecodeRuleSet set;
  for (const auto& f : schema) set.features.push_back(make(f));
  set.target = make(target_spec);
  return set;
}

// ---------------------------------------------------------------- recode

std::string RecodeAudit::to_text() const {
  std::ostringstream os;
  os << "rows_in = " << rows_in << '\n';
  os << "rows_out = " << rows_out << '\n';
  os << "rows_dropped = " << (rows_in - rows_out) << '\n';
  for (const auto& [name, n] : dropped_missing) os << "dropped_missing." << name << " = " << n << '\n';
  for (const auto& [name, n] : dropped_default) os << "dropped_default." << name << " = " << n << '\n';
  return os.str();
}

RecodeResult recode(const RawTable& raw, const RecodeRuleSet& rules, bool strict) {
  std::vector<const OutputRule*> outputs;
  for (const auto& f : rules.features) outputs.push_back(&f);
  outputs.push_back(&rules.target);
  std::vector<Eigen::Index> cols;
  for (const auto* o : outputs) cols.push_back(raw.column_index(o->source));

  RecodeAudit audit;
  audit.rows_in = raw.rows();
  for (const auto* o : outputs) {
    audit.dropped_missing[o->spec.name] = 0;
    audit.dropped_default[o->spec.name] = 0;
  }

  const auto m = static_cast<Eigen::Index>(rules.features.size());
  std::vector<std::vector<int>> kept;
  std::vector<int> row_codes(outputs.size());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    bool drop = false;
    // Missing codes are checked across all fields first so the audit
    // attributes a drop to the first missing field, not to a later rule.
    for (std::size_t k = 0; k < outputs.size() && !drop; ++k) {
      const auto v = raw.values(i, cols[k]);
      const auto& miss = outputs[k]->spec.missing_codes;
      if (std::find(miss.begin(), miss.end(), v) != miss.end()) {
        if (!strict) {
          throw DataError("row " + std::to_string(i + 1) + ": missing code " + std::to_string(v) + " in " +
                          outputs[k]->source + " (non-strict mode has no imputation)");
        }
        ++audit.dropped_missing[outputs[k]->spec.name];
        drop = true;
      }
    }
    for (std::size_t k = 0; k < outputs.size() && !drop; ++k) {
      auto code = outputs[k]->apply(raw.values(i, cols[k]));
      if (!code) {
        ++audit.dropped_default[outputs[k]->spec.name];
        drop = true;
      } else {
        row_codes[k] = *code;
      }
    }
    if (!drop) kept.push_back(row_codes);
  }

  CodeMatrix codes(static_cast<Eigen::Index>(kept.size()), m);
  VectorXi target(static_cast<Eigen::Index>(kept.size()));
  for (std::size_t i = 0; i < kept.size(); ++i) {
    for (Eigen::Index j = 0; j < m; ++j) codes(static_cast<Eigen::Index>(i), j) = kept[i][static_cast<std::size_t>(j)];
    target(static_cast<Eigen::Index>(i)) = kept[i].back();
  }
  audit.rows_out = static_cast<std::int64_t>(kept.size());
  return {CategoricalTable(rules.schema(), std::move(codes), std::move(target), rules.target.spec), audit};
}

RawTable to_raw(const CategoricalTable& table) {
  RawTable raw;
  raw.columns = table.feature_names();
  raw.columns.push_back(table.target_spec().name);
  raw.values.resize(table.rows(), table.features() + 1);
  raw.values.leftCols(table.features()) = table.codes().cast<std::int64_t>();
  raw.values.col(table.features()) = table.target().cast<std::int64_t>();
  return raw;
}

FilterResult filter_curve_cohort(const RawTable& raw, const CohortFilter& filter) {
  const auto align = raw.column_index(filter.alignment_field);
  std::optional<Eigen::Index> move;
  if (!filter.negotiating_field.empty()) move = raw.column_index(filter.negotiating_field);
  auto in = [](const std::vector<std::int64_t>& set, std::int64_t v) {
    return std::find(set.begin(), set.end(), v) != set.end();
  };
  std::vector<Eigen::Index> keep;
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    if (!in(filter.curve_codes, raw.values(i, align))) continue;
    if (move && !in(filter.negotiating_codes, raw.values(i, *move))) continue;
    keep.push_back(i);
  }
  FilterResult r;
  r.table = raw.select_rows(keep);
  r.retained = static_cast<std::int64_t>(keep.size());
  r.discarded = raw.rows() - r.retained;
  r.empty_warning = keep.empty();
  return r;
}

}  // namespace treebench
