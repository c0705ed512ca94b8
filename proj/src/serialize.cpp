#include <fstream>
#include <sstream>

#include "treebench/serialize.hpp"

namespace treebench {

namespace {

constexpr int kFormatVersion = 1;

template <typename Fn>
auto guarded(const char* what, Fn&& fn) {
  try {
    return fn();
  } catch (const Json::exception& e) {
    throw DataError(std::string("malformed ") + what + " document: " + e.what());
  }
}

Json counts_to_json(const ClassCounts& c) {
  Json a = Json::array();
  for (Eigen::Index k = 0; k < c.size(); ++k) a.push_back(c(k));
  return a;
}

ClassCounts counts_from_json(const Json& j) {
  const auto v = j.get<std::vector<int>>();
  ClassCounts c(static_cast<Eigen::Index>(v.size()));
  for (std::size_t k = 0; k < v.size(); ++k) c(static_cast<Eigen::Index>(k)) = v[k];
  return c;
}

Json matrix_to_json(const MatrixXd& m) {
  Json rows = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Json vector_to_json(const VectorXd& v) { return std::vector<double>(v.data(), v.data() + v.size()); }

std::string kind_name(SplitKind k) {
  switch (k) {
    case SplitKind::multiway:
      return "multiway";
    case SplitKind::binary:
      return "binary";
    case SplitKind::merged:
      return "merged";
  }
  return "?";
}

SplitKind kind_from(const std::string& s) {
  if (s == "multiway") return SplitKind::multiway;
  if (s == "binary") return SplitKind::binary;
  if (s == "merged") return SplitKind::merged;
  throw DataError("unknown split kind: " + s);
}

Json tree_params_to_json(const TreeParams& p) {
  Json j;
  j["min_records_per_branch"] = p.min_records_per_branch;
  j["pruning_severity"] = p.pruning_severity;
  j["max_depth"] = p.max_depth;
  j["alpha"] = p.alpha;
  if (p.cost.size() != 0) j["cost"] = matrix_to_json(p.cost);
  return j;
}

TreeParams tree_params_from_json(const Json& j) {
  TreeParams p;
  p.min_records_per_branch = j.at("min_records_per_branch").get<int>();
  p.pruning_severity = j.at("pruning_severity").get<double>();
  p.max_depth = j.at("max_depth").get<int>();
  p.alpha = j.at("alpha").get<double>();
  if (j.contains("cost")) {
    const auto rows = j.at("cost").get<std::vector<std::vector<double>>>();
    p.cost.resize(static_cast<Eigen::Index>(rows.size()), static_cast<Eigen::Index>(rows.size()));
    for (std::size_t r = 0; r < rows.size(); ++r) {
      for (std::size_t c = 0; c < rows[r].size(); ++c) {
        p.cost(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r].at(c);
      }
    }
  }
  return p;
}

void check_hash(const Json& j, const std::vector<FeatureSpec>& schema) {
  if (j.at("schema_hash").get<std::string>() != hash_hex(schema_hash(schema))) {
    throw DataError("schema hash mismatch");
  }
}

}  // namespace

Json feature_to_json(const FeatureSpec& spec) {
  Json j;
  j["name"] = spec.name;
  j["codes"] = spec.allowed_codes;
  j["missing"] = spec.missing_codes;
  Json labels = Json::object();
  for (const auto& [code, label] : spec.code_labels) labels[std::to_string(code)] = label;
  j["labels"] = labels;
  return j;
}

FeatureSpec feature_from_json(const Json& j) {
  return guarded("feature", [&] {
    FeatureSpec s;
    s.name = j.at("name").get<std::string>();
    s.allowed_codes = j.at("codes").get<std::vector<int>>();
    s.missing_codes = j.value("missing", std::vector<std::int64_t>{});
    if (j.contains("labels")) {
      for (const auto& [k, v] : j.at("labels").items()) s.code_labels[std::stoi(k)] = v.get<std::string>();
    }
    s.validate();
    return s;
  });
}

Json schema_to_json(const std::vector<FeatureSpec>& schema, const FeatureSpec& target_spec) {
  Json j;
  j["format"] = "treebench-schema";
  j["version"] = kFormatVersion;
  j["schema_hash"] = hash_hex(schema_hash(schema));
  Json feats = Json::array();
  for (const auto& f : schema) feats.push_back(feature_to_json(f));
  j["features"] = std::move(feats);
  j["target"] = feature_to_json(target_spec);
  return j;
}

std::vector<FeatureSpec> schema_from_json(const Json& j, FeatureSpec* target_spec) {
  return guarded("schema", [&] {
    std::vector<FeatureSpec> schema;
    for (const auto& f : j.at("features")) schema.push_back(feature_from_json(f));
    check_hash(j, schema);
    if (target_spec) *target_spec = feature_from_json(j.at("target"));
    return schema;
  });
}

Json tree_to_json(const DecisionTree& tree) {
  Json j;
  j["format"] = "treebench-tree";
  j["version"] = kFormatVersion;
  j["algorithm"] = to_string(tree.algorithm());
  j["schema_hash"] = hash_hex(schema_hash(tree.schema()));
  Json feats = Json::array();
  for (const auto& f : tree.schema()) feats.push_back(feature_to_json(f));
  j["features"] = std::move(feats);
  j["params"] = tree_params_to_json(tree.params());
  Json nodes = Json::array();
  for (const auto& n : tree.nodes()) {
    Json jn;
    jn["counts"] = counts_to_json(n.counts);
    jn["depth"] = n.depth;
    jn["source_id"] = n.source_id;
    if (n.split) {
      jn["feature"] = n.split->feature;
      jn["kind"] = kind_name(n.split->kind);
      jn["branches"] = n.split->branches;
      jn["children"] = n.children;
    }
    if (!n.eligible_features.empty()) jn["eligible"] = n.eligible_features;
    nodes.push_back(std::move(jn));
  }
  j["nodes"] = std::move(nodes);
  return j;
}

DecisionTree tree_from_json(const Json& j) {
  return guarded("tree", [&] {
    if (j.at("format") != "treebench-tree") throw DataError("not a tree document");
    std::vector<FeatureSpec> schema;
    for (const auto& f : j.at("features")) schema.push_back(feature_from_json(f));
    check_hash(j, schema);
    std::vector<TreeNode> nodes;
    for (const auto& jn : j.at("nodes")) {
      TreeNode n;
      n.counts = counts_from_json(jn.at("counts"));
      n.depth = jn.at("depth").get<int>();
      n.source_id = jn.at("source_id").get<int>();
      if (jn.contains("feature")) {
        SplitDescriptor s;
        s.feature = jn.at("feature").get<int>();
        s.kind = kind_from(jn.at("kind").get<std::string>());
        s.branches = jn.at("branches").get<std::vector<std::vector<int>>>();
        n.split = std::move(s);
        n.children = jn.at("children").get<std::vector<int>>();
      }
      n.eligible_features = jn.value("eligible", std::vector<int>{});
      nodes.push_back(std::move(n));
    }
    DecisionTree tree(std::move(nodes), algorithm_from_string(j.at("algorithm").get<std::string>()),
                      tree_params_from_json(j.at("params")), std::move(schema));
    try {
      tree.check_invariants();
    } catch (const Error& e) {
      throw DataError(std::string("invalid tree: ") + e.what());
    }
    return tree;
  });
}

Json forest_to_json(const Forest& forest) {
  Json j;
  j["format"] = "treebench-forest";
  j["version"] = kFormatVersion;
  j["schema_hash"] = hash_hex(schema_hash(forest.schema()));
  const auto& p = forest.params();
  j["params"] = {{"n_trees", p.n_trees},
                 {"features_per_split", p.features_per_split},
                 {"bootstrap", p.bootstrap},
                 {"bootstrap_size", p.bootstrap_size},
                 {"min_records_per_branch", p.min_records_per_branch},
                 {"max_depth", p.max_depth},
                 {"seed", std::to_string(p.seed)}};
  Json trees = Json::array();
  for (std::size_t t = 0; t < forest.trees().size(); ++t) {
    Json jt = tree_to_json(forest.trees()[t]);
    jt["bag"] = forest.bags()[t];
    trees.push_back(std::move(jt));
  }
  j["trees"] = std::move(trees);
  return j;
}

Forest forest_from_json(const Json& j) {
  return guarded("forest", [&] {
    if (j.at("format") != "treebench-forest") throw DataError("not a forest document");
    const Json& jp = j.at("params");
    ForestParams p;
    p.n_trees = jp.at("n_trees").get<int>();
    p.features_per_split = jp.at("features_per_split").get<int>();
    p.bootstrap = jp.at("bootstrap").get<bool>();
    p.bootstrap_size = jp.at("bootstrap_size").get<Eigen::Index>();
    p.min_records_per_branch = jp.at("min_records_per_branch").get<int>();
    p.max_depth = jp.at("max_depth").get<int>();
    p.seed = std::stoull(jp.at("seed").get<std::string>());
    std::vector<DecisionTree> trees;
    std::vector<std::vector<Eigen::Index>> bags;
    for (const auto& jt : j.at("trees")) {
      trees.push_back(tree_from_json(jt));
      bags.push_back(jt.at("bag").get<std::vector<Eigen::Index>>());
    }
    if (trees.empty()) throw DataError("forest document has no trees");
    auto schema = trees.front().schema();
    check_hash(j, schema);
    return Forest(std::move(trees), std::move(bags), p, std::move(schema));
  });
}

Json trace_to_json(const EliminationTrace& trace) {
  Json j;
  j["format"] = "treebench-elimination";
  j["version"] = kFormatVersion;
  j["features"] = trace.feature_names;
  j["selected"] = trace.selected;
  Json steps = Json::array();
  for (const auto& s : trace.steps) {
    Json js;
    js["active"] = s.active;
    js["importance"] = s.importance;
    js["accuracy"] = s.accuracy;
    js["fold_accuracy"] = s.fold_accuracy;
    js["dropped"] = s.dropped;
    steps.push_back(std::move(js));
  }
  j["steps"] = std::move(steps);
  return j;
}

EliminationTrace trace_from_json(const Json& j) {
  return guarded("elimination trace", [&] {
    if (j.at("format") != "treebench-elimination") throw DataError("not an elimination trace");
    EliminationTrace t;
    t.feature_names = j.at("features").get<std::vector<std::string>>();
    t.selected = j.at("selected").get<int>();
    for (const auto& js : j.at("steps")) {
      EliminationStep s;
      s.active = js.at("active").get<std::vector<int>>();
      s.importance = js.at("importance").get<std::vector<double>>();
      s.accuracy = js.at("accuracy").get<double>();
      s.fold_accuracy = js.at("fold_accuracy").get<std::vector<double>>();
      s.dropped = js.at("dropped").get<int>();
      t.steps.push_back(std::move(s));
    }
    if (t.selected < 0 || t.selected >= static_cast<int>(t.steps.size())) {
      throw DataError("elimination trace selects a missing step");
    }
    return t;
  });
}

Json model_to_json(const Classifier& model) {
  Json j;
  j["format"] = "treebench-model";
  j["version"] = kFormatVersion;
  j["family"] = model.family();
  if (const auto* t = dynamic_cast<const TreeClassifier*>(&model)) {
    j["model"] = tree_to_json(t->tree());
  } else if (const auto* f = dynamic_cast<const ForestClassifier*>(&model)) {
    j["model"] = forest_to_json(f->forest());
  } else if (const auto* l = dynamic_cast<const LogisticModel*>(&model)) {
    j["schema_hash"] = hash_hex(schema_hash(l->encoder().schema()));
    j["intercept"] = l->intercept();
    j["beta"] = vector_to_json(l->beta());
    j["iterations"] = l->iterations();
    j["gradient_norm"] = l->gradient_norm();
  } else if (const auto* m = dynamic_cast<const MlpModel*>(&model)) {
    j["schema_hash"] = hash_hex(schema_hash(m->encoder().schema()));
    j["activation"] = "tanh";
    j["epochs_run"] = m->epochs_run();
    Json layers = Json::array();
    for (std::size_t l = 0; l < m->weights().size(); ++l) {
      layers.push_back({{"weights", matrix_to_json(m->weights()[l])}, {"bias", vector_to_json(m->biases()[l])}});
    }
    j["layers"] = std::move(layers);
  } else if (const auto* b = dynamic_cast<const BayesNetModel*>(&model)) {
    j["schema_hash"] = hash_hex(schema_hash(b->schema()));
    j["score"] = b->score();
    j["parents"] = b->parents();
    Json cpts = Json::array();
    for (const auto& c : b->cpts()) cpts.push_back(matrix_to_json(c));
    j["cpts"] = std::move(cpts);
  } else if (const auto* d = dynamic_cast<const DecisionListModel*>(&model)) {
    j["schema_hash"] = hash_hex(schema_hash(d->schema()));
    auto rule_json = [](const Rule& r) {
      Json lits = Json::array();
      for (const auto& l : r.literals) lits.push_back({{"feature", l.feature}, {"code", l.code}});
      return Json{{"literals", lits}, {"predicted", r.predicted}, {"precision", r.precision}, {"coverage", r.coverage}};
    };
    Json rules = Json::array();
    for (const auto& r : d->rules()) rules.push_back(rule_json(r));
    j["rules"] = std::move(rules);
    j["default"] = rule_json(d->default_rule());
  } else if (const auto* mj = dynamic_cast<const MajorityModel*>(&model)) {
    j["rate"] = mj->rate();
  }
  return j;
}

// ---------------------------------------------------------------- files

std::filesystem::path schema_sidecar(const std::filesystem::path& csv) {
  std::filesystem::path p = csv;
  p.replace_extension(".schema.json");
  return p;
}

void write_coded_table(const std::filesystem::path& csv, const CategoricalTable& table) {
  write_delimited(csv, to_raw(table));
  write_json_file(schema_sidecar(csv), schema_to_json(table.schema(), table.target_spec()));
}

CategoricalTable read_coded_table(const std::filesystem::path& csv) {
  const auto sidecar = schema_sidecar(csv);
  if (!std::filesystem::exists(sidecar)) throw UsageError("schema sidecar not found: " + sidecar.string());
  FeatureSpec target;
  auto schema = schema_from_json(read_json_file(sidecar), &target);
  std::vector<std::string> columns;
  for (const auto& f : schema) columns.push_back(f.name);
  columns.push_back(target.name);
  const RawTable raw = load_delimited(csv, columns);
  CodeMatrix codes(raw.rows(), static_cast<Eigen::Index>(schema.size()));
  VectorXi y(raw.rows());
  for (Eigen::Index i = 0; i < raw.rows(); ++i) {
    for (Eigen::Index j = 0; j < codes.cols(); ++j) codes(i, j) = static_cast<int>(raw.values(i, j));
    y(i) = static_cast<int>(raw.values(i, codes.cols()));
  }
  return CategoricalTable(std::move(schema), std::move(codes), std::move(y), std::move(target));
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("write failed: " + path.string());
}

Json read_json_file(const std::filesystem::path& path) {
  const std::string text = read_text_file(path);
  try {
    return Json::parse(text);
  } catch (const Json::exception& e) {
    throw DataError("invalid JSON in " + path.string() + ": " + e.what());
  }
}

void write_json_file(const std::filesystem::path& path, const Json& j) { write_text_file(path, j.dump(2) + "\n"); }

}  // namespace treebench
