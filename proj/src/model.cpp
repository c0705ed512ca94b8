#include <cmath>
#include <set>

#include "treebench/baselines.hpp"
#include "treebench/model.hpp"

namespace treebench {

namespace {

struct FamilyInfo {
  ModelFamily family;
  const char* key;
  const char* display;
};

constexpr FamilyInfo kFamilies[] = {
    {ModelFamily::c50, "c50", "C5.0"},
    {ModelFamily::chaid, "chaid", "CHAID"},
    {ModelFamily::cart, "cart", "CART"},
    {ModelFamily::quest, "quest", "QUEST"},
    {ModelFamily::bayes_net, "bayes_net", "Bayesian network"},
    {ModelFamily::logistic, "logistic", "Logistic regression"},
    {ModelFamily::mlp, "mlp", "Neural network"},
    {ModelFamily::decision_list, "decision_list", "Decision list"},
    {ModelFamily::forest, "forest", "Random forest"},
    {ModelFamily::majority, "majority", "Majority"},
};

const FamilyInfo& info(ModelFamily f) {
  for (const auto& i : kFamilies) {
    if (i.family == f) return i;
  }
  throw UsageError("unknown model family");
}

class ParamReader {
 public:
  ParamReader(const ParamSet& params, ModelFamily family) : params_(params), family_(family) {}

  double real(const std::string& key, double fallback) {
    seen_.insert(key);
    auto it = params_.find(key);
    return it == params_.end() ? fallback : it->second;
  }

  int integer(const std::string& key, int fallback) {
    const double v = real(key, fallback);
    if (v != std::floor(v) || std::abs(v) > 1e9) {
      throw UsageError(family_key(family_) + ": parameter " + key + " must be an integer");
    }
    return static_cast<int>(v);
  }

  bool flag(const std::string& key, bool fallback) { return integer(key, fallback ? 1 : 0) != 0; }

  void finish() const {
    for (const auto& [k, v] : params_) {
      if (!seen_.count(k)) throw UsageError(family_key(family_) + ": unknown parameter " + k);
    }
  }

 private:
  const ParamSet& params_;
  ModelFamily family_;
  std::set<std::string> seen_;
};

TreeParams tree_params(ParamReader& r) {
  TreeParams p;
  p.min_records_per_branch = r.integer("min_records", p.min_records_per_branch);
  p.max_depth = r.integer("max_depth", p.max_depth);
  return p;
}

}  // namespace

std::string family_key(ModelFamily f) { return info(f).key; }
std::string family_display_name(ModelFamily f) { return info(f).display; }

ModelFamily family_from_key(const std::string& key) {
  for (const auto& i : kFamilies) {
    if (key == i.key) return i.family;
  }
  throw UsageError("unknown model family: " + key);
}

std::vector<ModelFamily> standard_roster() {
  return {ModelFamily::c50,      ModelFamily::chaid, ModelFamily::cart,         ModelFamily::quest,
          ModelFamily::bayes_net, ModelFamily::logistic, ModelFamily::mlp, ModelFamily::decision_list};
}

std::string format_params(const ParamSet& params) {
  std::string out;
  for (const auto& [k, v] : params) {
    if (!out.empty()) out += ' ';
    out += k + '=' + format_double(v);
  }
  return out;
}

MajorityModel::MajorityModel(const CategoricalTable& data) {
  if (data.rows() == 0) throw UsageError("cannot fit a majority model on an empty table");
  rate_ = data.target().cast<double>().mean();
}

std::unique_ptr<Classifier> train_model(ModelFamily family, const CategoricalTable& data, const ParamSet& params,
                                        std::uint64_t seed) {
  ParamReader r(params, family);
  std::unique_ptr<Classifier> out;
  switch (family) {
    case ModelFamily::c50: {
      TreeParams p = tree_params(r);
      p.pruning_severity = r.real("severity", p.pruning_severity);
      const bool prune = r.flag("prune", true);
      r.finish();
      DecisionTree t = train_c50(data, p);
      out = std::make_unique<TreeClassifier>(prune ? prune_c50(t, p.pruning_severity) : std::move(t));
      break;
    }
    case ModelFamily::chaid: {
      TreeParams p = tree_params(r);
      p.alpha = r.real("alpha", p.alpha);
      r.finish();
      out = std::make_unique<TreeClassifier>(train_chaid(data, p));
      break;
    }
    case ModelFamily::cart: {
      TreeParams p = tree_params(r);
      r.finish();
      out = std::make_unique<TreeClassifier>(train_cart(data, p));
      break;
    }
    case ModelFamily::quest: {
      TreeParams p = tree_params(r);
      r.finish();
      out = std::make_unique<TreeClassifier>(train_quest(data, p));
      break;
    }
    case ModelFamily::forest: {
      ForestParams p;
      p.n_trees = r.integer("n_trees", p.n_trees);
      p.features_per_split = r.integer("features_per_split", p.features_per_split);
      p.min_records_per_branch = r.integer("min_records", p.min_records_per_branch);
      p.max_depth = r.integer("max_depth", p.max_depth);
      r.finish();
      p.seed = seed;
      out = std::make_unique<ForestClassifier>(train_forest(data, p));
      break;
    }
    case ModelFamily::logistic: {
      LogisticOptions o;
      o.max_iterations = r.integer("max_iterations", o.max_iterations);
      o.tolerance = r.real("tolerance", o.tolerance);
      o.l2 = r.real("l2", o.l2);
      r.finish();
      out = std::make_unique<LogisticModel>(train_logistic(data, o));
      break;
    }
    case ModelFamily::mlp: {
      MlpOptions o;
      const int layers = r.integer("layers", static_cast<int>(o.widths.size()));
      const int width = r.integer("width", o.widths.front());
      if (layers < 1) throw UsageError("mlp: layers must be >= 1");
      o.widths.assign(static_cast<std::size_t>(layers), width);
      o.learning_rate = r.real("learning_rate", o.learning_rate);
      o.epochs = r.integer("epochs", o.epochs);
      o.batch_size = r.integer("batch_size", o.batch_size);
      o.patience = r.integer("patience", o.patience);
      o.holdout = r.real("holdout", o.holdout);
      r.finish();
      o.seed = seed;
      out = std::make_unique<MlpModel>(train_mlp(data, o));
      break;
    }
    case ModelFamily::bayes_net: {
      BayesNetOptions o;
      o.structure = r.flag("greedy", false) ? BayesStructure::greedy : BayesStructure::naive;
      o.alpha = r.real("alpha", o.alpha);
      o.max_parents = r.integer("max_parents", o.max_parents);
      r.finish();
      out = std::make_unique<BayesNetModel>(train_bayes_net(data, o));
      break;
    }
    case ModelFamily::decision_list: {
      DecisionListOptions o;
      o.min_coverage = r.integer("min_coverage", o.min_coverage);
      o.min_precision = r.real("min_precision", o.min_precision);
      o.max_literals = r.integer("max_literals", o.max_literals);
      r.finish();
      out = std::make_unique<DecisionListModel>(train_decision_list(data, o));
      break;
    }
    case ModelFamily::majority:
      r.finish();
      out = std::make_unique<MajorityModel>(data);
      break;
  }
  return out;
}

}  // namespace treebench
