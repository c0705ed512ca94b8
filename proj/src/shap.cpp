#include <algorithm>
#include <cmath>
#include <sstream>

#include "treebench/eval.hpp"
#include "treebench/shap.hpp"

namespace treebench {

BackgroundSet::BackgroundSet(CodeMatrix rows) : rows_(std::move(rows)) {
  if (rows_.rows() < 1) throw UsageError("background set is empty");
}

BackgroundSet BackgroundSet::sample(const CategoricalTable& data, Eigen::Index max_rows, std::uint64_t seed) {
  if (max_rows < 1) throw UsageError("background size must be >= 1");
  if (data.rows() <= max_rows) return BackgroundSet(data.codes());
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
  Rng rng(seed);
  rng.shuffle(idx);
  idx.resize(static_cast<std::size_t>(max_rows));
  std::sort(idx.begin(), idx.end());
  CodeMatrix rows(max_rows, data.features());
  for (Eigen::Index r = 0; r < max_rows; ++r) rows.row(r) = data.codes().row(idx[static_cast<std::size_t>(r)]);
  return BackgroundSet(std::move(rows));
}

namespace {

std::vector<double> node_values(const DecisionTree& tree, TreeOutput output) {
  std::vector<double> v;
  v.reserve(tree.nodes().size());
  for (const auto& n : tree.nodes()) {
    v.push_back(output == TreeOutput::probability ? n.probability() : (n.predicted == 1 ? 1.0 : 0.0));
  }
  return v;
}

void check_conforms(Eigen::Index features, RowRef row, const BackgroundSet& background) {
  if (row.size() != features) throw UsageError("row does not match the model's feature count");
  if (background.features() != features) throw UsageError("background does not match the model's feature count");
}

double factorial(int n) {
  double f = 1.0;
  for (int i = 2; i <= n; ++i) f *= i;
  return f;
}

// One (x, z) pair of the interventional recursion. Each path node sends x and
// z to a child, or to the node itself when the code has no branch. Where they
// part on a feature not yet claimed, both sides are explored with the feature
// credited to x's or z's coalition respectively.
class PairWalker {
 public:
  PairWalker(const DecisionTree& tree, const std::vector<double>& values, RowRef x, RowRef z, VectorXd& phi,
             const std::vector<double>& fact)
      : nodes_(tree.nodes()),
        values_(values),
        x_(x),
        z_(z),
        phi_(phi),
        fact_(fact),
        in_x_(static_cast<std::size_t>(x.size()), 0),
        in_z_(static_cast<std::size_t>(x.size()), 0) {}

  void run() { go(0, 0, 0); }

 private:
  using Pair = std::pair<double, double>;

  Pair leaf(double v, int a, int b) const {
    const double pos = a > 0 ? fact_[a - 1] * fact_[b] / fact_[a + b] * v : 0.0;
    const double neg = b > 0 ? fact_[a] * fact_[b - 1] / fact_[a + b] * v : 0.0;
    return {pos, neg};
  }

  int route(const TreeNode& n, int code) const {
    const int b = n.split->branch_of(code);
    return b < 0 ? -1 : n.children[static_cast<std::size_t>(b)];
  }

  Pair follow(int next, int here, int a, int b) {
    return next < 0 ? leaf(values_[static_cast<std::size_t>(here)], a, b) : go(next, a, b);
  }

  Pair go(int id, int a, int b) {
    const TreeNode& n = nodes_[static_cast<std::size_t>(id)];
    if (n.is_leaf()) return leaf(values_[static_cast<std::size_t>(id)], a, b);
    const int f = n.split->feature;
    const auto fi = static_cast<std::size_t>(f);
    const int xr = route(n, x_(f));
    const int zr = route(n, z_(f));
    if (xr == zr) return follow(xr, id, a, b);
    if (in_x_[fi]) return follow(xr, id, a, b);
    if (in_z_[fi]) return follow(zr, id, a, b);
    in_x_[fi] = 1;
    const Pair px = follow(xr, id, a + 1, b);
    in_x_[fi] = 0;
    in_z_[fi] = 1;
    const Pair pz = follow(zr, id, a, b + 1);
    in_z_[fi] = 0;
    phi_(f) += px.first - pz.second;
    return {px.first + pz.first, px.second + pz.second};
  }

  const std::vector<TreeNode>& nodes_;
  const std::vector<double>& values_;
  RowRef x_;
  RowRef z_;
  VectorXd& phi_;
  const std::vector<double>& fact_;
  std::vector<char> in_x_;
  std::vector<char> in_z_;
};

ShapAttribution tree_shap(const DecisionTree& tree, const std::vector<double>& values, RowRef row,
                          const BackgroundSet& background, const std::vector<double>& fact) {
  const Eigen::Index m = static_cast<Eigen::Index>(tree.schema().size());
  check_conforms(m, row, background);
  ShapAttribution out;
  out.phi = VectorXd::Zero(m);
  VectorXd sum = VectorXd::Zero(m);
  double base = 0.0;
  for (Eigen::Index r = 0; r < background.size(); ++r) {
    const RowRef z = background.rows().row(r);
    VectorXd phi = VectorXd::Zero(m);
    PairWalker(tree, values, row, z, phi, fact).run();
    sum += phi;
    base += values[static_cast<std::size_t>(tree.find_node(z))];
  }
  const double b = static_cast<double>(background.size());
  out.phi = sum / b;
  out.base = base / b;
  out.output = values[static_cast<std::size_t>(tree.find_node(row))];
  return out;
}

std::vector<double> factorial_table(Eigen::Index m) {
  std::vector<double> fact(static_cast<std::size_t>(m + 2));
  for (std::size_t i = 0; i < fact.size(); ++i) fact[i] = factorial(static_cast<int>(i));
  return fact;
}

}  // namespace

double model_output(const DecisionTree& tree, RowRef row, TreeOutput output) {
  const TreeNode& n = tree.node(tree.find_node(row));
  return output == TreeOutput::probability ? n.probability() : (n.predicted == 1 ? 1.0 : 0.0);
}

double model_output(const Forest& forest, RowRef row) { return forest.predict_proba(row); }

ShapAttribution shap_values(const DecisionTree& tree, RowRef row, const BackgroundSet& background,
                            TreeOutput output) {
  return tree_shap(tree, node_values(tree, output), row, background,
                   factorial_table(static_cast<Eigen::Index>(tree.schema().size())));
}

ShapAttribution shap_values(const Forest& forest, RowRef row, const BackgroundSet& background) {
  const Eigen::Index m = static_cast<Eigen::Index>(forest.schema().size());
  check_conforms(m, row, background);
  const auto fact = factorial_table(m);
  ShapAttribution out;
  out.phi = VectorXd::Zero(m);
  for (const auto& tree : forest.trees()) {
    const ShapAttribution t = tree_shap(tree, node_values(tree, TreeOutput::vote), row, background, fact);
    out.phi += t.phi;
    out.base += t.base;
    out.output += t.output;
  }
  const double n = static_cast<double>(forest.size());
  out.phi /= n;
  out.base /= n;
  out.output = forest.predict_proba(row);
  return out;
}

double shapley_weight(int m, int k) {
  if (m < 1 || k < 0 || k >= m) throw UsageError("shapley_weight: need 0 <= k < m");
  return factorial(k) * factorial(m - k - 1) / factorial(m);
}

ShapAttribution brute_force_shap(const ModelFunction& model, RowRef row, const BackgroundSet& background) {
  const Eigen::Index m = row.size();
  if (background.features() != m) throw UsageError("background does not match the row's feature count");
  if (m > 20) throw UsageError("brute_force_shap: too many features for coalition enumeration");
  const std::size_t coalitions = std::size_t{1} << m;
  std::vector<double> value(coalitions, 0.0);
  Eigen::RowVectorXi hybrid(m);
  for (std::size_t mask = 0; mask < coalitions; ++mask) {
    double s = 0.0;
    for (Eigen::Index r = 0; r < background.size(); ++r) {
      for (Eigen::Index j = 0; j < m; ++j) hybrid(j) = (mask >> j) & 1u ? row(j) : background.rows()(r, j);
      s += model(hybrid);
    }
    value[mask] = s / static_cast<double>(background.size());
  }
  std::vector<double> weight(static_cast<std::size_t>(m));
  for (int k = 0; k < m; ++k) weight[static_cast<std::size_t>(k)] = shapley_weight(static_cast<int>(m), k);
  ShapAttribution out;
  out.phi = VectorXd::Zero(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    const std::size_t bit = std::size_t{1} << i;
    for (std::size_t mask = 0; mask < coalitions; ++mask) {
      if (mask & bit) continue;
      const int k = std::popcount(mask);
      out.phi(i) += weight[static_cast<std::size_t>(k)] * (value[mask | bit] - value[mask]);
    }
  }
  out.base = value[0];
  out.output = value[coalitions - 1];
  return out;
}

ShapAttribution brute_force_shap(const DecisionTree& tree, RowRef row, const BackgroundSet& background,
                                 TreeOutput output) {
  return brute_force_shap([&](RowRef r) { return model_output(tree, r, output); }, row, background);
}

ShapAttribution brute_force_shap(const Forest& forest, RowRef row, const BackgroundSet& background) {
  return brute_force_shap([&](RowRef r) { return forest.predict_proba(r); }, row, background);
}

std::vector<ShapAttribution> explain_rows(const Forest& forest, const CategoricalTable& data,
                                          const BackgroundSet& background) {
  std::vector<ShapAttribution> out;
  out.reserve(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) out.push_back(shap_values(forest, data.row(i), background));
  return out;
}

std::vector<ShapAttribution> explain_rows(const DecisionTree& tree, const CategoricalTable& data,
                                          const BackgroundSet& background) {
  std::vector<ShapAttribution> out;
  out.reserve(static_cast<std::size_t>(data.rows()));
  for (Eigen::Index i = 0; i < data.rows(); ++i) out.push_back(shap_values(tree, data.row(i), background));
  return out;
}

std::vector<ImportanceEntry> global_importance(const std::vector<ShapAttribution>& attributions,
                                               const std::vector<FeatureSpec>& schema) {
  VectorXd mean = VectorXd::Zero(static_cast<Eigen::Index>(schema.size()));
  for (const auto& a : attributions) mean += a.phi.cwiseAbs();
  if (!attributions.empty()) mean /= static_cast<double>(attributions.size());
  std::vector<ImportanceEntry> out;
  for (std::size_t j = 0; j < schema.size(); ++j) {
    out.push_back({static_cast<int>(j), schema[j].name, mean(static_cast<Eigen::Index>(j))});
  }
  std::stable_sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.weight > b.weight; });
  return out;
}

std::vector<ImportanceEntry> global_importance(const Forest& forest, const CategoricalTable& data,
                                               const BackgroundSet& background) {
  return global_importance(explain_rows(forest, data, background), forest.schema());
}

// ---------------------------------------------------------------- elimination

void EliminationParams::validate() const {
  forest.validate();
  if (folds < 2) throw UsageError("elimination needs at least 2 folds");
  if (explain_rows < 0) throw UsageError("explain_rows must be >= 0");
  if (background_rows < 1) throw UsageError("background_rows must be >= 1");
}

EliminationTrace backward_eliminate(const CategoricalTable& data, const EliminationParams& params) {
  params.validate();
  if (data.features() < 2) throw UsageError("backward elimination needs at least 2 features");
  EliminationTrace trace;
  trace.feature_names = data.feature_names();

  const FoldPlan plan =
      make_folds(data.rows(), params.folds, params.stratified, data.target(), derive_seed(params.seed, "elimination/folds"));

  CategoricalTable explain_data = data;
  if (params.explain_rows > 0 && params.explain_rows < data.rows()) {
    std::vector<Eigen::Index> idx(static_cast<std::size_t>(data.rows()));
    for (Eigen::Index i = 0; i < data.rows(); ++i) idx[static_cast<std::size_t>(i)] = i;
    Rng rng(derive_seed(params.seed, "elimination/explain"));
    rng.shuffle(idx);
    idx.resize(static_cast<std::size_t>(params.explain_rows));
    std::sort(idx.begin(), idx.end());
    explain_data = data.select_rows(idx);
  }

  std::vector<Eigen::Index> active(static_cast<std::size_t>(data.features()));
  for (Eigen::Index j = 0; j < data.features(); ++j) active[static_cast<std::size_t>(j)] = j;

  for (int step = 0; !active.empty(); ++step) {
    const CategoricalTable sub = data.select_features(active);
    EliminationStep s;
    for (auto j : active) s.active.push_back(static_cast<int>(j));

    ForestParams fp = params.forest;
    fp.features_per_split = std::min<int>(fp.features_per_split, static_cast<int>(active.size()));
    const std::uint64_t step_seed = derive_seed(params.seed, static_cast<std::uint64_t>(step));
    const Trainer trainer = [&fp](const CategoricalTable& train, std::uint64_t seed) -> std::unique_ptr<Classifier> {
      ForestParams p = fp;
      p.seed = seed;
      return std::make_unique<ForestClassifier>(train_forest(train, p));
    };
    const CvResult cv = cross_validate(trainer, sub, plan, derive_seed(step_seed, "cv"));
    s.accuracy = cv.mean_accuracy;
    s.fold_accuracy = cv.fold_accuracy;

    if (active.size() > 1) {
      ForestParams full = fp;
      full.seed = derive_seed(step_seed, "forest");
      const Forest forest = train_forest(sub, full);
      const BackgroundSet bg =
          BackgroundSet::sample(sub, params.background_rows, derive_seed(params.seed, "elimination/background"));
      const auto ranking = global_importance(forest, explain_data.select_features(active), bg);
      s.importance.assign(active.size(), 0.0);
      for (const auto& e : ranking) s.importance[static_cast<std::size_t>(e.feature)] = e.weight;
      const std::size_t drop = static_cast<std::size_t>(ranking.back().feature);
      s.dropped = static_cast<int>(active[drop]);
      active.erase(active.begin() + static_cast<std::ptrdiff_t>(drop));
    } else {
      s.importance.assign(1, 0.0);
      active.clear();
    }
    trace.steps.push_back(std::move(s));
  }

  trace.selected = 0;
  for (std::size_t i = 1; i < trace.steps.size(); ++i) {
    if (trace.steps[i].accuracy > trace.steps[static_cast<std::size_t>(trace.selected)].accuracy) {
      trace.selected = static_cast<int>(i);
    }
  }
  return trace;
}

std::string attribution_table(const std::vector<ShapAttribution>& attributions,
                              const std::vector<Eigen::Index>& row_ids, const std::vector<FeatureSpec>& schema) {
  if (attributions.size() != row_ids.size()) throw UsageError("attribution_table: row id count mismatch");
  std::ostringstream os;
  os << "row\tfeature\tphi\n";
  for (std::size_t r = 0; r < attributions.size(); ++r) {
    for (std::size_t j = 0; j < schema.size(); ++j) {
      os << row_ids[r] << '\t' << schema[j].name << '\t'
         << format_double(attributions[r].phi(static_cast<Eigen::Index>(j))) << '\n';
    }
  }
  return os.str();
}

}  // namespace treebench
