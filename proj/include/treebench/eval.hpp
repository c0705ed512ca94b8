#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "treebench/model.hpp"

namespace treebench {

struct FoldPlan {
  Eigen::Index n = 0;
  int k = 0;
  bool stratified = false;
  std::uint64_t seed = 0;
  std::vector<std::vector<Eigen::Index>> folds;  // held-out rows per fold, ascending

  std::vector<Eigen::Index> train_rows(int fold) const;
  /// FNV-1a over (n, k, fold membership); equal plans hash equally.
  std::uint64_t hash() const;
  /// Throws when folds do not partition 0..n-1 or sizes/strata are unbalanced.
  void check(const VectorXi* labels = nullptr) const;
};

/// Seeded shuffle then round-robin assignment; stratified plans shuffle each
/// class separately and deal class 0 then class 1.
FoldPlan make_folds(Eigen::Index n, int k, bool stratified, const VectorXi& labels, std::uint64_t seed);

struct CoincidenceMatrix {
  std::array<std::array<std::int64_t, 2>, 2> counts{};  // [truth][predicted]

  std::int64_t total() const;
  std::int64_t correct() const { return counts[0][0] + counts[1][1]; }
  /// Correct share of truth row r, in percent.
  double row_percent(int r) const;
  int row_percent_rounded(int r) const;
  std::string to_text(const FeatureSpec& target_spec = CategoricalTable::default_target_spec()) const;
};

CoincidenceMatrix coincidence(const VectorXi& truth, const VectorXi& predicted);
/// 100 * trace / total.
double overall_accuracy(const CoincidenceMatrix& m);

using Trainer = std::function<std::unique_ptr<Classifier>(const CategoricalTable& train, std::uint64_t seed)>;

Trainer make_trainer(ModelFamily family, const ParamSet& params);

struct CvResult {
  std::vector<double> fold_accuracy;
  double mean_accuracy = 0.0;
  double pooled_accuracy = 0.0;
  VectorXi pooled_predictions;  // indexed by row
  CoincidenceMatrix matrix;
};

/// Fold f trains with seed derive_seed(seed, f).
CvResult cross_validate(const Trainer& trainer, const CategoricalTable& data, const FoldPlan& plan,
                        std::uint64_t seed);

enum class SearchMode { grid, random };

struct SearchSpec {
  SearchMode mode = SearchMode::grid;
  std::vector<std::pair<std::string, std::vector<double>>> domains;
  int budget = 0;  // random mode trial count
  std::uint64_t seed = 0;

  void validate() const;
};

struct SearchTrial {
  ParamSet params;
  double mean_accuracy = 0.0;
};

struct SearchResult {
  ParamSet best;
  int best_trial = 0;
  std::vector<SearchTrial> trials;
};

/// Candidates scored by cross_validate; the earliest trial wins ties.
SearchResult search(const SearchSpec& spec, ModelFamily family, const CategoricalTable& data, const FoldPlan& plan,
                    std::uint64_t seed, const ParamSet& fixed = {});

struct RosterEntry {
  ModelFamily family = ModelFamily::majority;
  ParamSet params;
  std::optional<SearchSpec> search;  // tuned over these domains when present
};

struct LeaderboardRow {
  std::string name;
  ModelFamily family = ModelFamily::majority;
  double accuracy_percent = 0.0;  // mean of fold accuracies * 100
  double pooled_percent = 0.0;
  ParamSet params;
  std::vector<double> fold_accuracy;
  CoincidenceMatrix matrix;
  std::uint64_t seed = 0;
  std::uint64_t fold_hash = 0;
  std::vector<SearchTrial> trials;
};

struct Leaderboard {
  std::vector<LeaderboardRow> rows;  // descending accuracy, ties by name
  std::uint64_t fold_hash = 0;

  std::string to_text() const;
};

/// Every family is evaluated on the same plan.
Leaderboard compare_models(const CategoricalTable& data, const std::vector<RosterEntry>& roster, const FoldPlan& plan,
                           std::uint64_t seed);

}  // namespace treebench
