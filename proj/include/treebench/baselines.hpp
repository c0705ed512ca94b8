#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "treebench/model.hpp"

namespace treebench {

/// One-hot encoding with the first allowed code of each feature as the dropped reference.
class OneHotEncoder {
 public:
  OneHotEncoder() = default;
  explicit OneHotEncoder(std::vector<FeatureSpec> schema);

  Eigen::Index width() const { return width_; }
  const std::vector<FeatureSpec>& schema() const { return schema_; }
  VectorXd encode(RowRef row) const;
  /// rows x width design matrix (no intercept column).
  MatrixXd encode(const CategoricalTable& data) const;

 private:
  std::vector<FeatureSpec> schema_;
  std::vector<Eigen::Index> offsets_;
  Eigen::Index width_ = 0;
};

// ---------------------------------------------------------------- logistic

struct LogisticOptions {
  int max_iterations = 100;
  double tolerance = 1e-8;  // on the gradient infinity norm
  double l2 = 1e-6;         // intercept is not penalized
};

class LogisticModel final : public Classifier {
 public:
  LogisticModel(OneHotEncoder encoder, double intercept, VectorXd beta, int iterations, double gradient_norm,
                std::vector<std::string> warnings = {});

  double predict_proba(RowRef row) const override;
  std::string family() const override { return "logistic"; }

  const OneHotEncoder& encoder() const { return encoder_; }
  double intercept() const { return intercept_; }
  const VectorXd& beta() const { return beta_; }
  int iterations() const { return iterations_; }
  double gradient_norm() const { return gradient_norm_; }
  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  OneHotEncoder encoder_;
  double intercept_;
  VectorXd beta_;
  int iterations_;
  double gradient_norm_;
  std::vector<std::string> warnings_;
};

/// Penalized maximum likelihood by Newton-Raphson (IRLS) with step halving.
/// Throws ComputeError if the gradient tolerance is not met.
LogisticModel train_logistic(const CategoricalTable& data, const LogisticOptions& options = {});

// ---------------------------------------------------------------- MLP

struct MlpOptions {
  std::vector<int> widths = {16, 16, 16, 16, 16};
  double learning_rate = 0.01;  // Adam step size
  int epochs = 200;
  int batch_size = 32;
  int patience = 10;
  double holdout = 0.1;
  std::uint64_t seed = 0;

  void validate() const;
};

/// tanh hidden layers, logistic output, cross-entropy loss.
class MlpModel final : public Classifier {
 public:
  MlpModel(OneHotEncoder encoder, const std::vector<int>& widths, std::uint64_t seed);

  double predict_proba(RowRef row) const override;
  std::string family() const override { return "mlp"; }

  const OneHotEncoder& encoder() const { return encoder_; }
  const std::vector<MatrixXd>& weights() const { return weights_; }
  const std::vector<VectorXd>& biases() const { return biases_; }
  int epochs_run() const { return epochs_run_; }

  Eigen::Index parameter_count() const;
  VectorXd parameters() const;
  void set_parameters(const VectorXd& theta);

  /// Mean cross-entropy over the columns of X (inputs x batch) and its
  /// gradient in parameters() order.
  double loss_and_gradient(const MatrixXd& X, const VectorXd& y, VectorXd* gradient) const;
  /// Class-1 probabilities for the columns of X.
  VectorXd forward(const MatrixXd& X) const;

 private:
  friend MlpModel train_mlp(const CategoricalTable& data, const MlpOptions& options);
  OneHotEncoder encoder_;
  std::vector<MatrixXd> weights_;  // layer l: out x in
  std::vector<VectorXd> biases_;
  int epochs_run_ = 0;
};

/// Adam mini-batch training with early stopping on a seeded validation holdout;
/// the best validation weights are kept.
MlpModel train_mlp(const CategoricalTable& data, const MlpOptions& options = {});

// ---------------------------------------------------------------- Bayes net

enum class BayesStructure { naive, greedy };

struct BayesNetOptions {
  BayesStructure structure = BayesStructure::naive;
  double alpha = 1.0;  // additive smoothing
  int max_parents = 2;
};

/// Variables 0..m-1 are the features, variable m the target. Values are code
/// indices into each variable's allowed codes.
class BayesNetModel final : public Classifier {
 public:
  BayesNetModel(std::vector<FeatureSpec> schema, std::vector<std::vector<int>> parents, std::vector<MatrixXd> cpts,
                double score);

  double predict_proba(RowRef row) const override;
  std::string family() const override { return "bayes_net"; }

  int variables() const { return static_cast<int>(parents_.size()); }
  int target_variable() const { return variables() - 1; }
  int cardinality(int v) const;
  const std::vector<std::vector<int>>& parents() const { return parents_; }
  /// cpts()[v]: parent configurations x values; rows sum to 1.
  const std::vector<MatrixXd>& cpts() const { return cpts_; }
  const std::vector<FeatureSpec>& schema() const { return schema_; }
  /// BIC score of the structure on its training data.
  double score() const { return score_; }
  bool has_edge(int from, int to) const;

  /// Product of CPT entries for a full assignment of value indices.
  double joint_probability(const std::vector<int>& values) const;

 private:
  Eigen::Index config_index(int v, const std::vector<int>& values) const;
  std::vector<FeatureSpec> schema_;
  std::vector<std::vector<int>> parents_;
  std::vector<MatrixXd> cpts_;
  double score_;
};

BayesNetModel train_bayes_net(const CategoricalTable& data, const BayesNetOptions& options = {});

/// BIC of an arbitrary structure: sum over variables of LL - (log n / 2) * free parameters.
double bayes_structure_score(const CategoricalTable& data, const std::vector<std::vector<int>>& parents);

// ---------------------------------------------------------------- decision list

struct DecisionListOptions {
  int min_coverage = 5;
  double min_precision = 0.6;  // Laplace-corrected
  int max_literals = 3;
};

struct Literal {
  int feature = -1;
  int code = 0;
  bool operator==(const Literal&) const = default;
};

struct Rule {
  std::vector<Literal> literals;  // conjunction; empty = default rule
  int predicted = 0;
  double precision = 0.5;  // (n_c + 1) / (n + 2) on the rows it covered when learned
  int coverage = 0;

  bool matches(RowRef row) const;
};

class DecisionListModel final : public Classifier {
 public:
  DecisionListModel(std::vector<FeatureSpec> schema, std::vector<Rule> rules, Rule default_rule);

  double predict_proba(RowRef row) const override;
  int predict_label(RowRef row) const override;
  std::string family() const override { return "decision_list"; }

  const std::vector<Rule>& rules() const { return rules_; }
  const Rule& default_rule() const { return default_; }
  const std::vector<FeatureSpec>& schema() const { return schema_; }
  /// Index of the first matching rule, or rules().size() for the default.
  std::size_t matching_rule(RowRef row) const;
  std::string to_text() const;

 private:
  std::vector<FeatureSpec> schema_;
  std::vector<Rule> rules_;
  Rule default_;
};

DecisionListModel train_decision_list(const CategoricalTable& data, const DecisionListOptions& options = {});

}  // namespace treebench
