#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "treebench/dataset.hpp"

namespace treebench {
namespace {

std::string lower(std::string s) {
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  return s;
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_line(const std::string& line, char delim) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (char c : line) {
    if (c == '"') {
      quoted = !quoted;
    } else if (c == delim && !quoted) {
      out.push_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  out.push_back(trim(cur));
  return out;
}

}  // namespace

// ---------------------------------------------------------------- FeatureSpec

void FeatureSpec::validate() const {
  if (name.empty()) throw DataError("feature spec with empty name");
  if (allowed_codes.empty()) throw DataError("feature '" + name + "': allowed codes empty");
  if (!std::is_sorted(allowed_codes.begin(), allowed_codes.end()) ||
      std::adjacent_find(allowed_codes.begin(), allowed_codes.end()) != allowed_codes.end()) {
    throw DataError("feature '" + name + "': allowed codes must be sorted and unique");
  }
  for (int c : allowed_codes) {
    if (c < 0) throw DataError("feature '" + name + "': negative code");
    if (std::find(missing_codes.begin(), missing_codes.end(), c) != missing_codes.end()) {
      throw DataError("feature '" + name + "': code " + std::to_string(c) + " is both allowed and missing");
    }
    if (!code_labels.contains(c)) {
      throw DataError("feature '" + name + "': no label for code " + std::to_string(c));
    }
  }
}

bool FeatureSpec::allows(int code) const {
  return std::binary_search(allowed_codes.begin(), allowed_codes.end(), code);
}

std::string FeatureSpec::label(int code) const {
  auto it = code_labels.find(code);
  return it == code_labels.end() ? std::to_string(code) : it->second;
}

int FeatureSpec::code_index(int code) const {
  auto it = std::lower_bound(allowed_codes.begin(), allowed_codes.end(), code);
  if (it == allowed_codes.end() || *it != code) return -1;
  return static_cast<int>(it - allowed_codes.begin());
}

// ---------------------------------------------------------------- RawTable

Eigen::Index RawTable::column_index(const std::string& name) const {
  const std::string key = lower(name);
  for (std::size_t j = 0; j < columns.size(); ++j) {
    if (lower(columns[j]) == key) return static_cast<Eigen::Index>(j);
  }
  throw DataError("column not found: " + name);
}

RawTable RawTable::select_rows(const std::vector<Eigen::Index>& rows) const {
  RawTable out;
  out.columns = columns;
  out.values.resize(static_cast<Eigen::Index>(rows.size()), values.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) out.values.row(static_cast<Eigen::Index>(i)) = values.row(rows[i]);
  return out;
}

// ---------------------------------------------------------------- CategoricalTable

FeatureSpec CategoricalTable::default_target_spec() {
  FeatureSpec t;
  t.name = "injury";
  t.allowed_codes = {0, 1};
  t.code_labels = {{0, "vehicle without injury"}, {1, "vehicle with injury"}};
  return t;
}

CategoricalTable::CategoricalTable(std::vector<FeatureSpec> schema, CodeMatrix codes, VectorXi target,
                                   FeatureSpec target_spec)
    : schema_(std::move(schema)), target_spec_(std::move(target_spec)), codes_(std::move(codes)),
      target_(std::move(target)) {
  if (static_cast<Eigen::Index>(schema_.size()) != codes_.cols()) {
    throw DataError("schema has " + std::to_string(schema_.size()) + " features but table has " +
                    std::to_string(codes_.cols()) + " columns");
  }
  if (target_.size() != codes_.rows()) throw DataError("target length differs from row count");
  std::set<std::string> names;
  for (const auto& f : schema_) {
    f.validate();
    if (!names.insert(f.name).second) throw DataError("duplicate feature name: " + f.name);
  }
  target_spec_.validate();
  if (target_spec_.allowed_codes != std::vector<int>{0, 1}) throw DataError("target must be coded {0,1}");
  for (Eigen::Index j = 0; j < codes_.cols(); ++j) {
    const auto& spec = schema_[static_cast<std::size_t>(j)];
    for (Eigen::Index i = 0; i < codes_.rows(); ++i) {
      if (!spec.allows(codes_(i, j))) {
        throw DataError("row " + std::to_string(i) + ", feature '" + spec.name + "': code " +
                        std::to_string(codes_(i, j)) + " not allowed");
      }
    }
  }
  for (Eigen::Index i = 0; i < target_.size(); ++i) {
    if (target_(i) != 0 && target_(i) != 1) {
      throw DataError("row " + std::to_string(i) + ": target must be 0 or 1");
    }
  }
}

Eigen::Index CategoricalTable::feature_index(const std::string& name) const {
  for (std::size_t j = 0; j < schema_.size(); ++j) {
    if (schema_[j].name == name) return static_cast<Eigen::Index>(j);
  }
  throw DataError("column not found: " + name);
}

std::vector<std::string> CategoricalTable::feature_names() const {
  std::vector<std::string> out;
  for (const auto& f : schema_) out.push_back(f.name);
  return out;
}

CategoricalTable CategoricalTable::select_rows(std::span<const Eigen::Index> rows) const {
  CodeMatrix c(static_cast<Eigen::Index>(rows.size()), codes_.cols());
  VectorXi t(static_cast<Eigen::Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    c.row(static_cast<Eigen::Index>(i)) = codes_.row(rows[i]);
    t(static_cast<Eigen::Index>(i)) = target_(rows[i]);
  }
  CategoricalTable out;
  out.schema_ = schema_;
  out.target_spec_ = target_spec_;
  out.codes_ = std::move(c);
  out.target_ = std::move(t);
  return out;
}

CategoricalTable CategoricalTable::select_features(std::span<const Eigen::Index> features) const {
  CodeMatrix c(codes_.rows(), static_cast<Eigen::Index>(features.size()));
  std::vector<FeatureSpec> schema;
  for (std::size_t k = 0; k < features.size(); ++k) {
    c.col(static_cast<Eigen::Index>(k)) = codes_.col(features[k]);
    schema.push_back(schema_.at(static_cast<std::size_t>(features[k])));
  }
  return CategoricalTable(std::move(schema), std::move(c), target_, target_spec_);
}

ClassCounts CategoricalTable::class_counts() const {
  ClassCounts c = ClassCounts::Zero(2);
  for (Eigen::Index i = 0; i < target_.size(); ++i) ++c(target_(i));
  return c;
}

bool CategoricalTable::operator==(const CategoricalTable& o) const {
  if (schema_hash(schema_) != schema_hash(o.schema_)) return false;
  return codes_.rows() == o.codes_.rows() && codes_.cols() == o.codes_.cols() && codes_ == o.codes_ &&
         target_ == o.target_;
}

std::uint64_t schema_hash(const std::vector<FeatureSpec>& schema) {
  std::string canon;
  for (const auto& f : schema) {
    canon += f.name;
    canon += '{';
    for (int c : f.allowed_codes) {
      canon += std::to_string(c) + ':' + f.label(c) + ';';
    }
    canon += '}';
  }
  return fnv1a64(canon);
}

std::string hash_hex(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

// ---------------------------------------------------------------- delimited IO

namespace {

RawTable load_impl(const std::filesystem::path& path, const std::vector<std::string>* wanted,
                   const DelimitedOptions& options) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read file: " + path.string());
  std::string line;
  std::vector<std::string> header;
  std::size_t line_no = 0;
  if (options.header) {
    while (std::getline(in, line)) {
      ++line_no;
      if (!trim(line).empty()) break;
    }
    header = split_line(line, options.delimiter);
  }

  RawTable table;
  std::vector<std::size_t> source_cols;
  if (wanted) {
    if (!options.header) throw UsageError("named columns require a header row");
    for (const auto& name : *wanted) {
      const std::string key = lower(name);
      auto it = std::find_if(header.begin(), header.end(), [&](const std::string& h) { return lower(h) == key; });
      if (it == header.end()) throw DataError("column not found: " + name);
      source_cols.push_back(static_cast<std::size_t>(it - header.begin()));
      table.columns.push_back(name);
    }
  } else {
    for (std::size_t j = 0; j < header.size(); ++j) {
      source_cols.push_back(j);
      table.columns.push_back(header[j]);
    }
  }

  std::vector<std::vector<std::int64_t>> rows;
  std::size_t data_row = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto cells = split_line(line, options.delimiter);
    if (!options.header && table.columns.empty()) {
      for (std::size_t j = 0; j < cells.size(); ++j) {
        source_cols.push_back(j);
        table.columns.push_back("c" + std::to_string(j));
      }
    }
    std::vector<std::int64_t> values;
    values.reserve(source_cols.size());
    for (std::size_t k = 0; k < source_cols.size(); ++k) {
      const std::size_t j = source_cols[k];
      if (j >= cells.size()) {
        throw DataError("row " + std::to_string(data_row + 1) + ", column " + table.columns[k] + ": missing cell");
      }
      const std::string& cell = cells[j];
      std::int64_t v = 0;
      auto [ptr, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (cell.empty() || ec != std::errc{} || ptr != cell.data() + cell.size()) {
        throw DataError("parse error at row " + std::to_string(data_row + 1) + ", column " + table.columns[k] +
                        ": '" + cell + "' is not an integer");
      }
      values.push_back(v);
    }
    rows.push_back(std::move(values));
    ++data_row;
  }
  table.values.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(table.columns.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      table.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = rows[i][j];
    }
  }
  return table;
}

}  // namespace

RawTable load_delimited(const std::filesystem::path& path, const std::vector<std::string>& columns,
                        const DelimitedOptions& options) {
  return load_impl(path, &columns, options);
}

RawTable load_delimited(const std::filesystem::path& path, const DelimitedOptions& options) {
  return load_impl(path, nullptr, options);
}

void write_delimited(const std::filesystem::path& path, const RawTable& table, char delimiter) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write file: " + path.string());
  for (std::size_t j = 0; j < table.columns.size(); ++j) {
    if (j) out << delimiter;
    out << table.columns[j];
  }
  out << '\n';
  for (Eigen::Index i = 0; i < table.values.rows(); ++i) {
    for (Eigen::Index j = 0; j < table.values.cols(); ++j) {
      if (j) out << delimiter;
      out << table.values(i, j);
    }
    out << '\n';
  }
}

// ---------------------------------------------------------------- crosstab

int display_percent(double percent) { return static_cast<int>(std::lround(percent)); }

double CrosstabReport::row_percent(Eigen::Index r, Eigen::Index c) const {
  const auto t = row_total(r);
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(counts(r, c)) / static_cast<double>(t);
}

double CrosstabReport::column_percent(Eigen::Index r, Eigen::Index c) const {
  const auto t = column_total(c);
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(counts(r, c)) / static_cast<double>(t);
}

double CrosstabReport::cell_percent(Eigen::Index r, Eigen::Index c) const {
  const auto t = grand_total();
  return t == 0 ? 0.0 : 100.0 * static_cast<double>(counts(r, c)) / static_cast<double>(t);
}

std::string CrosstabReport::to_text(const std::map<std::int64_t, std::string>& row_labels,
                                    const std::map<std::int64_t, std::string>& column_labels) const {
  auto name_of = [](const std::map<std::int64_t, std::string>& labels, std::int64_t v) {
    auto it = labels.find(v);
    return it == labels.end() ? std::to_string(v) : it->second;
  };
  std::ostringstream os;
  os << row_variable << " x " << column_variable << '\n';
  os << "value";
  for (auto cv : column_values) {
    const std::string n = name_of(column_labels, cv);
    os << '\t' << n << "\tRow%\tCol%\tCell%";
  }
  os << "\tTotal\n";
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    os << name_of(row_labels, row_values[static_cast<std::size_t>(r)]);
    for (Eigen::Index c = 0; c < counts.cols(); ++c) {
      os << '\t' << counts(r, c) << '\t' << display_percent(row_percent(r, c)) << '\t'
         << display_percent(column_percent(r, c)) << '\t' << display_percent(cell_percent(r, c));
    }
    os << '\t' << row_total(r) << '\n';
  }
  os << "Total";
  const auto g = grand_total();
  for (Eigen::Index c = 0; c < counts.cols(); ++c) {
    const double share = g == 0 ? 0.0 : 100.0 * static_cast<double>(column_total(c)) / static_cast<double>(g);
    os << '\t' << column_total(c) << '\t' << display_percent(share) << "\t100\t" << display_percent(share);
  }
  os << '\t' << g << '\n';
  return os.str();
}

namespace {

CrosstabReport build_crosstab(std::string row_name, std::string col_name, const std::vector<std::int64_t>& rv,
                              const std::vector<std::int64_t>& cv) {
  CrosstabReport rep;
  rep.row_variable = std::move(row_name);
  rep.column_variable = std::move(col_name);
  std::set<std::int64_t> rs(rv.begin(), rv.end());
  std::set<std::int64_t> cs(cv.begin(), cv.end());
  rep.row_values.assign(rs.begin(), rs.end());
  rep.column_values.assign(cs.begin(), cs.end());
  rep.counts.setZero(static_cast<Eigen::Index>(rep.row_values.size()),
                     static_cast<Eigen::Index>(rep.column_values.size()));
  for (std::size_t i = 0; i < rv.size(); ++i) {
    const auto r = std::lower_bound(rep.row_values.begin(), rep.row_values.end(), rv[i]) - rep.row_values.begin();
    const auto c =
        std::lower_bound(rep.column_values.begin(), rep.column_values.end(), cv[i]) - rep.column_values.begin();
    ++rep.counts(r, c);
  }
  return rep;
}

}  // namespace

CrosstabReport crosstab(const RawTable& table, const std::string& row_var, const std::string& target_var) {
  const auto r = table.column_index(row_var);
  const auto c = table.column_index(target_var);
  std::vector<std::int64_t> rv(static_cast<std::size_t>(table.rows()));
  std::vector<std::int64_t> cv(rv.size());
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    rv[static_cast<std::size_t>(i)] = table.values(i, r);
    cv[static_cast<std::size_t>(i)] = table.values(i, c);
  }
  return build_crosstab(table.columns[static_cast<std::size_t>(r)], table.columns[static_cast<std::size_t>(c)], rv,
                        cv);
}

CrosstabReport crosstab(const CategoricalTable& table, const std::string& row_var) {
  const auto j = table.feature_index(row_var);
  std::vector<std::int64_t> rv(static_cast<std::size_t>(table.rows()));
  std::vector<std::int64_t> cv(rv.size());
  for (Eigen::Index i = 0; i < table.rows(); ++i) {
    rv[static_cast<std::size_t>(i)] = table.code(i, j);
    cv[static_cast<std::size_t>(i)] = table.label(i);
  }
  return build_crosstab(row_var, table.target_spec().name, rv, cv);
}

}  // namespace treebench
