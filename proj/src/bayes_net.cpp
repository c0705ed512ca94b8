#include <cmath>
#include <functional>

#include "treebench/baselines.hpp"

namespace treebench {

namespace {

// Value indices per variable: features as code indices, target last.
std::vector<VectorXi> value_columns(const CategoricalTable& data) {
  std::vector<VectorXi> cols;
  for (Eigen::Index j = 0; j < data.features(); ++j) {
    VectorXi c(data.rows());
    for (Eigen::Index i = 0; i < data.rows(); ++i) c(i) = data.feature(j).code_index(data.code(i, j));
    cols.push_back(std::move(c));
  }
  cols.push_back(data.target());
  return cols;
}

std::vector<int> cardinalities(const CategoricalTable& data) {
  std::vector<int> card;
  for (const auto& f : data.schema()) card.push_back(static_cast<int>(f.allowed_codes.size()));
  card.push_back(2);
  return card;
}

// Parent-configuration x value counts for variable v.
MatrixXd family_counts(const std::vector<VectorXi>& cols, const std::vector<int>& card, int v,
                       const std::vector<int>& parents) {
  Eigen::Index q = 1;
  for (int p : parents) q *= card[static_cast<std::size_t>(p)];
  MatrixXd counts = MatrixXd::Zero(q, card[static_cast<std::size_t>(v)]);
  const Eigen::Index n = cols.front().size();
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index cfg = 0;
    for (int p : parents) cfg = cfg * card[static_cast<std::size_t>(p)] + cols[static_cast<std::size_t>(p)](i);
    counts(cfg, cols[static_cast<std::size_t>(v)](i)) += 1.0;
  }
  return counts;
}

double local_score(const MatrixXd& counts, double n) {
  double ll = 0.0;
  for (Eigen::Index r = 0; r < counts.rows(); ++r) {
    const double nr = counts.row(r).sum();
    for (Eigen::Index c = 0; c < counts.cols(); ++c) {
      if (counts(r, c) > 0) ll += counts(r, c) * std::log(counts(r, c) / nr);
    }
  }
  const double params = static_cast<double>(counts.rows()) * static_cast<double>(counts.cols() - 1);
  return ll - 0.5 * std::log(n) * params;
}

bool reaches(const std::vector<std::vector<int>>& parents, int from, int to) {
  // true if a directed path from -> ... -> to exists (walk parents of `to`)
  std::vector<char> seen(parents.size(), 0);
  std::function<bool(int)> up = [&](int v) {
    if (v == from) return true;
    if (seen[static_cast<std::size_t>(v)]) return false;
    seen[static_cast<std::size_t>(v)] = 1;
    for (int p : parents[static_cast<std::size_t>(v)]) {
      if (up(p)) return true;
    }
    return false;
  };
  return up(to);
}

}  // namespace

double bayes_structure_score(const CategoricalTable& data, const std::vector<std::vector<int>>& parents) {
  const auto cols = value_columns(data);
  const auto card = cardinalities(data);
  if (parents.size() != cols.size()) throw UsageError("structure does not match the variable count");
  double s = 0.0;
  for (std::size_t v = 0; v < parents.size(); ++v) {
    s += local_score(family_counts(cols, card, static_cast<int>(v), parents[v]), static_cast<double>(data.rows()));
  }
  return s;
}

BayesNetModel::BayesNetModel(std::vector<FeatureSpec> schema, std::vector<std::vector<int>> parents,
                             std::vector<MatrixXd> cpts, double score)
    : schema_(std::move(schema)), parents_(std::move(parents)), cpts_(std::move(cpts)), score_(score) {
  if (parents_.size() != schema_.size() + 1 || cpts_.size() != parents_.size()) {
    throw DataError("Bayes net structure does not match its schema");
  }
}

int BayesNetModel::cardinality(int v) const {
  return v == target_variable() ? 2 : static_cast<int>(schema_.at(static_cast<std::size_t>(v)).allowed_codes.size());
}

bool BayesNetModel::has_edge(int from, int to) const {
  const auto& p = parents_.at(static_cast<std::size_t>(to));
  return std::find(p.begin(), p.end(), from) != p.end();
}

Eigen::Index BayesNetModel::config_index(int v, const std::vector<int>& values) const {
  Eigen::Index cfg = 0;
  for (int p : parents_[static_cast<std::size_t>(v)]) cfg = cfg * cardinality(p) + values[static_cast<std::size_t>(p)];
  return cfg;
}

double BayesNetModel::joint_probability(const std::vector<int>& values) const {
  if (values.size() != parents_.size()) throw UsageError("assignment does not cover every variable");
  double p = 1.0;
  for (int v = 0; v < variables(); ++v) {
    p *= cpts_[static_cast<std::size_t>(v)](config_index(v, values), values[static_cast<std::size_t>(v)]);
  }
  return p;
}

double BayesNetModel::predict_proba(RowRef row) const {
  if (row.size() != static_cast<Eigen::Index>(schema_.size())) throw UsageError("row does not match the model schema");
  std::vector<int> values(parents_.size());
  for (std::size_t j = 0; j < schema_.size(); ++j) values[j] = schema_[j].code_index(row(static_cast<Eigen::Index>(j)));
  double logp[2];
  for (int c = 0; c < 2; ++c) {
    values.back() = c;
    logp[c] = 0.0;
    for (int v = 0; v < variables(); ++v) {
      logp[c] += std::log(cpts_[static_cast<std::size_t>(v)](config_index(v, values), values[static_cast<std::size_t>(v)]));
    }
  }
  if (std::isinf(logp[0]) && std::isinf(logp[1])) return 0.5;
  const double mx = std::max(logp[0], logp[1]);
  const double e0 = std::exp(logp[0] - mx);
  const double e1 = std::exp(logp[1] - mx);
  return e1 / (e0 + e1);
}

BayesNetModel train_bayes_net(const CategoricalTable& data, const BayesNetOptions& options) {
  if (!(options.alpha >= 0.0)) throw UsageError("smoothing alpha must be >= 0");
  if (options.max_parents < 1) throw UsageError("max_parents must be >= 1");
  if (data.rows() == 0) throw UsageError("cannot train a Bayes net on an empty table");
  const auto cols = value_columns(data);
  const auto card = cardinalities(data);
  const int V = static_cast<int>(cols.size());
  const int target = V - 1;
  const double n = static_cast<double>(data.rows());

  std::vector<std::vector<int>> parents(static_cast<std::size_t>(V));
  for (int v = 0; v < target; ++v) parents[static_cast<std::size_t>(v)] = {target};
  std::vector<double> local(static_cast<std::size_t>(V));
  for (int v = 0; v < V; ++v) {
    local[static_cast<std::size_t>(v)] = local_score(family_counts(cols, card, v, parents[static_cast<std::size_t>(v)]), n);
  }

  if (options.structure == BayesStructure::greedy) {
    for (;;) {
      double best_gain = 1e-9;
      int best_from = -1;
      int best_to = -1;
      double best_local = 0.0;
      for (int to = 0; to < V; ++to) {
        const auto& pt = parents[static_cast<std::size_t>(to)];
        if (static_cast<int>(pt.size()) >= options.max_parents) continue;
        for (int from = 0; from < V; ++from) {
          if (from == to || std::find(pt.begin(), pt.end(), from) != pt.end()) continue;
          if (reaches(parents, to, from)) continue;  // from already descends from to
          std::vector<int> cand = pt;
          cand.push_back(from);
          const double s = local_score(family_counts(cols, card, to, cand), n);
          const double gain = s - local[static_cast<std::size_t>(to)];
          if (gain > best_gain) {
            best_gain = gain;
            best_from = from;
            best_to = to;
            best_local = s;
          }
        }
      }
      if (best_from < 0) break;
      parents[static_cast<std::size_t>(best_to)].push_back(best_from);
      local[static_cast<std::size_t>(best_to)] = best_local;
    }
  }

  std::vector<MatrixXd> cpts;
  double score = 0.0;
  for (int v = 0; v < V; ++v) {
    const MatrixXd counts = family_counts(cols, card, v, parents[static_cast<std::size_t>(v)]);
    score += local[static_cast<std::size_t>(v)];
    MatrixXd cpt(counts.rows(), counts.cols());
    for (Eigen::Index r = 0; r < counts.rows(); ++r) {
      const double denom = counts.row(r).sum() + options.alpha * static_cast<double>(counts.cols());
      if (denom > 0.0) {
        cpt.row(r) = (counts.row(r).array() + options.alpha) / denom;
      } else {
        cpt.row(r).setConstant(1.0 / static_cast<double>(counts.cols()));
      }
    }
    cpts.push_back(std::move(cpt));
  }
  return BayesNetModel(data.schema(), std::move(parents), std::move(cpts), score);
}

}  // namespace treebench
