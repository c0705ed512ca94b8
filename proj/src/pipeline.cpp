#include <algorithm>
#include <sstream>

#include "treebench/pipeline.hpp"
#include "treebench/serialize.hpp"

namespace treebench {

namespace fs = std::filesystem;

PipelineContext make_context(Config config, std::optional<fs::path> out, std::optional<std::uint64_t> seed) {
  PipelineContext ctx;
  if (out) {
    ctx.out = *out;
  } else if (config.has("out")) {
    ctx.out = config.path("out");
  } else {
    throw UsageError("no output directory: pass --out or set `out` in the config");
  }
  if (seed) {
    ctx.seed = *seed;
  } else if (config.has("seed")) {
    ctx.seed = config.get_u64("seed");
  } else {
    throw UsageError("no seed: pass --seed or set `seed` in the config");
  }
  ctx.config = std::move(config);
  return ctx;
}

PipelineContext make_context(const fs::path& config_path, std::optional<fs::path> out,
                             std::optional<std::uint64_t> seed) {
  return make_context(Config::load(config_path), std::move(out), seed);
}

namespace {

class Writer {
 public:
  explicit Writer(const fs::path& dir) : dir_(dir) { fs::create_directories(dir_); }

  void text(const std::string& name, const std::string& body) {
    const fs::path p = dir_ / name;
    write_text_file(p, body);
    files_.push_back(p);
  }
  void json(const std::string& name, const Json& j) { text(name, j.dump(2) + "\n"); }
  void table(const std::string& name, const CategoricalTable& t) {
    const fs::path p = dir_ / name;
    write_coded_table(p, t);
    files_.push_back(p);
    files_.push_back(schema_sidecar(p));
  }
  std::vector<fs::path> take() { return std::move(files_); }

 private:
  fs::path dir_;
  std::vector<fs::path> files_;
};

fs::path table_path(const PipelineContext& ctx) {
  return ctx.config.has("table") ? ctx.config.path("table") : ctx.out / "coded.csv";
}

CategoricalTable load_table(const PipelineContext& ctx) {
  const fs::path p = table_path(ctx);
  if (!fs::exists(p)) throw UsageError("coded table not found: " + p.string() + " (run ingest first)");
  return read_coded_table(p);
}

std::vector<Eigen::Index> feature_indices(const CategoricalTable& table, const std::vector<std::string>& names) {
  std::vector<Eigen::Index> idx;
  for (const auto& n : names) idx.push_back(table.feature_index(n));
  return idx;
}

std::vector<std::string> read_name_list(const fs::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> out;
  for (std::string line; std::getline(in, line);) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) out.push_back(line);
  }
  return out;
}

ForestParams forest_params(const Config& c, const std::string& prefix, const ForestParams& base) {
  ForestParams p = base;
  p.n_trees = c.get_int(prefix + "n_trees", p.n_trees);
  p.features_per_split = c.get_int(prefix + "features_per_split", p.features_per_split);
  p.min_records_per_branch = c.get_int(prefix + "min_records", p.min_records_per_branch);
  p.max_depth = c.get_int(prefix + "max_depth", p.max_depth);
  return p;
}

Json params_json(const ParamSet& p) {
  Json j = Json::object();
  for (const auto& [k, v] : p) j[k] = v;
  return j;
}

Json matrix_json(const CoincidenceMatrix& m) {
  return Json::array({Json::array({m.counts[0][0], m.counts[0][1]}), Json::array({m.counts[1][0], m.counts[1][1]})});
}

bool is_tree_family(ModelFamily f) {
  return f == ModelFamily::c50 || f == ModelFamily::chaid || f == ModelFamily::cart || f == ModelFamily::quest;
}

}  // namespace

// ---------------------------------------------------------------- ingest

CommandResult cmd_ingest(const PipelineContext& ctx) {
  const Config& c = ctx.config;
  const fs::path input = c.path("input");
  const fs::path rules_path = c.path("rules");
  if (!fs::exists(rules_path)) throw UsageError("rules file not found: " + rules_path.string());
  if (!fs::exists(input)) throw UsageError("input file not found: " + input.string());
  const RecodeRuleSet rules = load_rules(rules_path);
  DelimitedOptions opts;
  const std::string delim = c.get("delimiter", "comma");
  if (delim == "comma" || delim == ",") {
    opts.delimiter = ',';
  } else if (delim == "tab") {
    opts.delimiter = '\t';
  } else {
    throw UsageError("delimiter must be comma or tab");
  }
  RawTable raw = load_delimited(input, rules.source_columns(), opts);
  std::ostringstream audit;
  audit << "input = " << input.filename().string() << '\n';
  audit << "records_read = " << raw.rows() << '\n';
  if (rules.cohort) {
    FilterResult fr = filter_curve_cohort(raw, *rules.cohort);
    audit << "cohort_retained = " << fr.retained << '\n';
    audit << "cohort_discarded = " << fr.discarded << '\n';
    if (fr.empty_warning) audit << "warning = no records matched the cohort filter\n";
    raw = std::move(fr.table);
  }
  const RecodeResult rr = recode(raw, rules, c.get_bool("strict", true));
  audit << rr.audit.to_text();
  if (c.has("expected_rows")) {
    const std::int64_t expected = c.get_int64("expected_rows", 0);
    audit << "expected_rows = " << expected << '\n';
    audit << "expected_rows_status = " << (rr.table.rows() == expected ? "matched" : "unmatched") << '\n';
  }
  Writer w(ctx.out);
  w.table("coded.csv", rr.table);
  w.text("ingest_audit.txt", audit.str());
  std::string crosstabs;
  auto widen = [](const std::map<int, std::string>& labels) {
    return std::map<std::int64_t, std::string>(labels.begin(), labels.end());
  };
  for (const auto& f : rr.table.schema()) {
    crosstabs += "# " + f.name + "\n" +
                 crosstab(rr.table, f.name).to_text(widen(f.code_labels), widen(rr.table.target_spec().code_labels)) +
                 "\n";
  }
  w.text("crosstabs.txt", crosstabs);
  CommandResult res{w.take(), "coded " + std::to_string(rr.table.rows()) + " of " +
                                  std::to_string(rr.audit.rows_in) + " cohort records into " +
                                  std::to_string(rr.table.features()) + " features"};
  return res;
}

// ---------------------------------------------------------------- select-features

CommandResult cmd_select_features(const PipelineContext& ctx) {
  const Config& c = ctx.config;
  const CategoricalTable table = load_table(ctx);
  EliminationParams ep;
  ep.forest = forest_params(c, "forest.", ForestParams{});
  ep.forest = forest_params(c, "elimination.", ep.forest);
  ep.folds = c.get_int("folds", 10);
  ep.stratified = c.get_bool("stratified", true);
  ep.explain_rows = c.get_int64("elimination.explain_rows", 0);
  ep.background_rows = c.get_int64("elimination.background", 128);
  ep.seed = derive_seed(ctx.seed, "select-features");
  const EliminationTrace trace = backward_eliminate(table, ep);

  const auto& selected = trace.selected_features();
  std::string names;
  std::vector<Eigen::Index> sel;
  for (int j : selected) {
    names += trace.feature_names[static_cast<std::size_t>(j)] + "\n";
    sel.push_back(j);
  }
  ForestParams fp = forest_params(c, "forest.", ForestParams{});
  fp.seed = derive_seed(ctx.seed, "forest");
  const CategoricalTable sub = table.select_features(sel);
  if (fp.features_per_split > sub.features()) fp.features_per_split = static_cast<int>(sub.features());
  const Forest forest = train_forest(sub, fp);

  Writer w(ctx.out);
  Json tj = trace_to_json(trace);
  tj["seed"] = std::to_string(ep.seed);
  w.json("elimination_trace.json", tj);
  w.text("selected_features.txt", names);
  w.json("forest.json", forest_to_json(forest));
  std::ostringstream s;
  s << "selected " << selected.size() << " of " << table.features() << " features (cv accuracy "
    << format_fixed(trace.steps[static_cast<std::size_t>(trace.selected)].accuracy, 4) << ")";
  return {w.take(), s.str()};
}

// ---------------------------------------------------------------- compare

std::vector<RosterEntry> roster_from_config(const Config& c) {
  std::vector<ModelFamily> families;
  if (c.has("roster")) {
    for (const auto& k : c.get_list("roster")) families.push_back(family_from_key(k));
  } else {
    families = standard_roster();
  }
  std::vector<RosterEntry> roster;
  for (ModelFamily f : families) {
    RosterEntry e;
    e.family = f;
    const std::string key = family_key(f);
    for (const auto& [param, value] : c.section("model." + key + ".")) {
      e.params[param] = c.get_double("model." + key + "." + param, 0.0);
      (void)value;
    }
    SearchSpec spec;
    for (const auto& [param, value] : c.section("search." + key + ".")) {
      const std::string full = "search." + key + "." + param;
      if (param == "mode") {
        if (value == "grid") {
          spec.mode = SearchMode::grid;
        } else if (value == "random") {
          spec.mode = SearchMode::random;
        } else {
          throw UsageError(full + " must be grid or random");
        }
      } else if (param == "budget") {
        spec.budget = c.get_int(full, 0);
      } else {
        spec.domains.emplace_back(param, c.get_doubles(full));
      }
    }
    if (!spec.domains.empty()) {
      spec.validate();
      e.search = spec;
    }
    roster.push_back(std::move(e));
  }
  return roster;
}

CommandResult cmd_compare(const PipelineContext& ctx) {
  const Config& c = ctx.config;
  CategoricalTable table = load_table(ctx);
  std::vector<std::string> used_features = table.feature_names();
  if (auto list = c.optional_path("features")) {
    if (!fs::exists(*list)) throw UsageError("feature list not found: " + list->string());
    used_features = read_name_list(*list);
    table = table.select_features(feature_indices(table, used_features));
  }
  const int k = c.get_int("folds", 10);
  const bool stratified = c.get_bool("stratified", true);
  const std::uint64_t fold_seed = derive_seed(ctx.seed, "folds");
  const FoldPlan plan = make_folds(table.rows(), k, stratified, table.target(), fold_seed);
  const auto roster = roster_from_config(c);
  const std::uint64_t model_seed = derive_seed(ctx.seed, "models");
  const Leaderboard board = compare_models(table, roster, plan, model_seed);

  Writer w(ctx.out);
  w.text("leaderboard.tsv", board.to_text());
  for (const auto& row : board.rows) {
    w.text("coincidence_" + family_key(row.family) + ".txt", row.name + "\n" + row.matrix.to_text(table.target_spec()));
  }

  // C5.0 on the full table for the importance ranking.
  ParamSet c50_params;
  for (const auto& row : board.rows) {
    if (row.family == ModelFamily::c50) c50_params = row.params;
  }
  if (std::none_of(board.rows.begin(), board.rows.end(), [](const auto& r) { return r.family == ModelFamily::c50; })) {
    for (const auto& [param, value] : c.section("model.c50.")) c50_params[param] = c.get_double("model.c50." + param, 0.0);
  }
  const auto c50 = train_model(ModelFamily::c50, table, c50_params, derive_seed(ctx.seed, "final/c50"));
  const auto& c50_tree = dynamic_cast<const TreeClassifier&>(*c50).tree();
  const auto importance = predictor_importance(c50_tree, table);
  w.text("importance_c50.txt", importance_text(importance, 4));

  Json report;
  report["format"] = "treebench-report";
  report["seed"] = std::to_string(ctx.seed);
  report["fold_seed"] = std::to_string(fold_seed);
  report["model_seed"] = std::to_string(model_seed);
  report["rows"] = table.rows();
  report["features"] = used_features;
  report["schema_hash"] = hash_hex(schema_hash(table.schema()));
  report["folds"] = {{"k", plan.k}, {"stratified", plan.stratified}, {"hash", hash_hex(plan.hash())}};
  Json rows = Json::array();
  for (const auto& row : board.rows) {
    if (row.fold_hash != board.fold_hash) throw Error("fold plan differs between roster families");
    Json jr;
    jr["model"] = row.name;
    jr["family"] = family_key(row.family);
    jr["accuracy_percent"] = row.accuracy_percent;
    jr["pooled_percent"] = row.pooled_percent;
    jr["params"] = params_json(row.params);
    jr["seed"] = std::to_string(row.seed);
    jr["fold_hash"] = hash_hex(row.fold_hash);
    jr["fold_accuracy"] = row.fold_accuracy;
    jr["coincidence"] = matrix_json(row.matrix);
    if (!row.trials.empty()) {
      Json trials = Json::array();
      for (const auto& t : row.trials) trials.push_back({{"params", params_json(t.params)}, {"accuracy", t.mean_accuracy}});
      jr["search_trials"] = std::move(trials);
    }
    rows.push_back(std::move(jr));
  }
  report["leaderboard"] = std::move(rows);
  Json imp = Json::array();
  for (const auto& e : importance) imp.push_back({{"feature", e.name}, {"weight", e.weight}});
  report["importance_c50"] = std::move(imp);

  const auto winner = std::find_if(board.rows.begin(), board.rows.end(), [](const auto& r) { return is_tree_family(r.family); });
  if (winner != board.rows.end()) {
    const auto model = train_model(winner->family, table, winner->params, derive_seed(ctx.seed, "final/" + family_key(winner->family)));
    const auto& tree = dynamic_cast<const TreeClassifier&>(*model).tree();
    w.text("winning_tree.dot", export_dot(tree, table.target_spec()));
    w.json("winning_tree.json", tree_to_json(tree));
    report["winning_tree"] = {{"family", family_key(winner->family)},
                              {"nodes", tree.node_count()},
                              {"leaves", tree.leaf_count()},
                              {"depth", tree.depth()}};
  }
  w.json("report.json", report);

  std::ostringstream s;
  s << "compared " << board.rows.size() << " models on " << table.rows() << " rows; best "
    << board.rows.front().name << " " << format_fixed(board.rows.front().accuracy_percent, 3) << "%";
  return {w.take(), s.str()};
}

// ---------------------------------------------------------------- explain

std::vector<Eigen::Index> parse_row_selector(const std::string& text, Eigen::Index rows) {
  std::vector<Eigen::Index> out;
  if (text == "all") {
    for (Eigen::Index i = 0; i < rows; ++i) out.push_back(i);
    return out;
  }
  std::string t = text;
  std::replace(t.begin(), t.end(), ',', ' ');
  std::istringstream in(t);
  auto number = [&](const std::string& s) {
    std::size_t used = 0;
    long long v = -1;
    try {
      v = std::stoll(s, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != s.size() || v < 0) throw UsageError("invalid row selector: " + s);
    if (v >= rows) throw UsageError("row " + s + " out of range (table has " + std::to_string(rows) + " rows)");
    return static_cast<Eigen::Index>(v);
  };
  for (std::string tok; in >> tok;) {
    const auto dash = tok.find('-');
    if (dash == std::string::npos) {
      out.push_back(number(tok));
    } else {
      const Eigen::Index a = number(tok.substr(0, dash));
      const Eigen::Index b = number(tok.substr(dash + 1));
      if (b < a) throw UsageError("invalid row range: " + tok);
      for (Eigen::Index i = a; i <= b; ++i) out.push_back(i);
    }
  }
  if (out.empty()) throw UsageError("row selector selects no rows");
  return out;
}

CommandResult cmd_explain(const PipelineContext& ctx) {
  const Config& c = ctx.config;
  const fs::path forest_path = c.has("forest") ? c.path("forest") : ctx.out / "forest.json";
  if (!fs::exists(forest_path)) throw UsageError("forest not found: " + forest_path.string() + " (run select-features first)");
  const Forest forest = forest_from_json(read_json_file(forest_path));
  const CategoricalTable full = load_table(ctx);
  std::vector<std::string> names;
  for (const auto& f : forest.schema()) names.push_back(f.name);
  const CategoricalTable table = full.select_features(feature_indices(full, names));
  if (schema_hash(table.schema()) != schema_hash(forest.schema())) {
    throw UsageError("coded table schema does not match the forest");
  }
  const auto rows = parse_row_selector(c.get("explain.rows", "all"), table.rows());
  const BackgroundSet bg =
      BackgroundSet::sample(table, c.get_int64("explain.background", 128), derive_seed(ctx.seed, "explain/background"));

  std::vector<ShapAttribution> attr;
  for (auto i : rows) {
    ShapAttribution a = shap_values(forest, table.row(i), bg);
    if (!(a.local_accuracy_gap() < 1e-9)) {
      throw ComputeError("local accuracy violated for row " + std::to_string(i) + " (gap " +
                         format_double(a.local_accuracy_gap()) + ")");
    }
    attr.push_back(std::move(a));
  }
  std::ostringstream summary;
  summary << "row\tbase\toutput\tsum_phi\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    summary << rows[r] << '\t' << format_double(attr[r].base) << '\t' << format_double(attr[r].output) << '\t'
            << format_double(attr[r].phi.sum()) << '\n';
  }
  const auto ranking = global_importance(attr, forest.schema());
  std::ostringstream rank;
  rank << "rank\tfeature\tmean_abs_phi\n";
  for (std::size_t r = 0; r < ranking.size(); ++r) {
    rank << r + 1 << '\t' << ranking[r].name << '\t' << format_double(ranking[r].weight) << '\n';
  }
  Writer w(ctx.out);
  w.text("shap_values.tsv", attribution_table(attr, rows, forest.schema()));
  w.text("shap_summary.tsv", summary.str());
  w.text("shap_ranking.tsv", rank.str());
  return {w.take(), "explained " + std::to_string(rows.size()) + " rows against " + std::to_string(bg.size()) +
                        " background rows"};
}

// ---------------------------------------------------------------- synth

CommandResult cmd_synth(const PipelineContext& ctx) {
  const Config& c = ctx.config;
  const std::string kind = c.get("synth.kind", "crss");
  const std::int64_t n = c.get_int64("synth.rows", 740);
  const std::uint64_t seed = derive_seed(ctx.seed, "synth");
  Writer w(ctx.out);
  if (kind == "crss") {
    const RawFixture fx = make_crss_fixture(n, seed);
    const fs::path raw = ctx.out / "crss_vehicles.csv";
    write_delimited(raw, fx.table);
    w.text("rules.cfg", crss_rules_text());
    auto files = w.take();
    files.insert(files.begin(), raw);
    return {files, "wrote " + std::to_string(fx.table.rows()) + " raw vehicle records"};
  }
  CategoricalTable table;
  if (kind == "planted_relevance") {
    const int relevant = c.get_int("synth.relevant", 2);
    const int noise = c.get_int("synth.noise", 8);
    table = generate_synthetic(planted_schema(relevant, noise), n, seed,
                               planted_relevance_rules(relevant, noise, c.get_double("synth.weight", 2.0)));
  } else if (kind == "planted_interaction") {
    const int noise = c.get_int("synth.noise", 8);
    table = generate_synthetic(planted_schema(2, noise), n, seed, planted_interaction_rules(noise));
  } else if (kind == "crash") {
    table = generate_synthetic(crash_schema(), n, seed, crash_rules());
  } else {
    throw UsageError("unknown synth.kind: " + kind);
  }
  w.table("coded.csv", table);
  return {w.take(), "wrote " + std::to_string(table.rows()) + " coded rows"};
}

}  // namespace treebench
