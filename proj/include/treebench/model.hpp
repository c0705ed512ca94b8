#pragma once

#include <functional>
#include <map>
#include <memory>
#include <string>

#include "treebench/dataset.hpp"
#include "treebench/forest.hpp"
#include "treebench/tree.hpp"

namespace treebench {

/// Common prediction contract for every trained model.
class Classifier {
 public:
  virtual ~Classifier() = default;
  /// Class-1 probability in [0, 1].
  virtual double predict_proba(RowRef row) const = 0;
  /// Hard label; 1 iff predict_proba >= 0.5 unless the model defines its own rule.
  virtual int predict_label(RowRef row) const { return predict_proba(row) >= 0.5 ? 1 : 0; }
  virtual std::string family() const = 0;
};

enum class ModelFamily { c50, chaid, cart, quest, bayes_net, logistic, mlp, decision_list, forest, majority };

std::string family_key(ModelFamily f);           // "c50", "bayes_net", ...
std::string family_display_name(ModelFamily f);  // "C5.0", "Bayesian network", ...
ModelFamily family_from_key(const std::string& key);

/// The eight families compared in the leaderboard.
std::vector<ModelFamily> standard_roster();

/// Named numeric hyper-parameters; keys unknown to a family raise UsageError.
using ParamSet = std::map<std::string, double>;

std::string format_params(const ParamSet& params);

std::unique_ptr<Classifier> train_model(ModelFamily family, const CategoricalTable& data, const ParamSet& params,
                                        std::uint64_t seed);

/// Always predicts the training majority (ties to class 1) with its rate.
class MajorityModel final : public Classifier {
 public:
  explicit MajorityModel(const CategoricalTable& data);
  double predict_proba(RowRef) const override { return rate_; }
  std::string family() const override { return "majority"; }
  double rate() const { return rate_; }

 private:
  double rate_ = 0.5;
};

class TreeClassifier final : public Classifier {
 public:
  explicit TreeClassifier(DecisionTree tree) : tree_(std::move(tree)) {}
  double predict_proba(RowRef row) const override { return tree_.predict(row).probability; }
  /// The majority class of the node where descent stops.
  int predict_label(RowRef row) const override { return tree_.predict(row).label; }
  std::string family() const override { return to_string(tree_.algorithm()); }
  const DecisionTree& tree() const { return tree_; }

 private:
  DecisionTree tree_;
};

class ForestClassifier final : public Classifier {
 public:
  explicit ForestClassifier(Forest forest) : forest_(std::move(forest)) {}
  double predict_proba(RowRef row) const override { return forest_.predict_proba(row); }
  std::string family() const override { return "forest"; }
  const Forest& forest() const { return forest_; }

 private:
  Forest forest_;
};

}  // namespace treebench
