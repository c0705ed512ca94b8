#include <algorithm>
#include <cmath>
#include <sstream>

#include "treebench/eval.hpp"

namespace treebench {

// ---------------------------------------------------------------- folds

std::vector<Eigen::Index> FoldPlan::train_rows(int fold) const {
  const auto& held = folds.at(static_cast<std::size_t>(fold));
  std::vector<Eigen::Index> out;
  out.reserve(static_cast<std::size_t>(n) - held.size());
  std::size_t h = 0;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (h < held.size() && held[h] == i) {
      ++h;
      continue;
    }
    out.push_back(i);
  }
  return out;
}

std::uint64_t FoldPlan::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto mix = [&h](std::uint64_t v) {
    for (int b = 0; b < 8; ++b) {
      h ^= (v >> (8 * b)) & 0xffu;
      h *= 0x100000001b3ULL;
    }
  };
  mix(static_cast<std::uint64_t>(n));
  mix(static_cast<std::uint64_t>(k));
  for (const auto& f : folds) {
    mix(f.size());
    for (auto i : f) mix(static_cast<std::uint64_t>(i));
  }
  return h;
}

void FoldPlan::check(const VectorXi* labels) const {
  if (static_cast<int>(folds.size()) != k) throw Error("fold plan: fold count differs from k");
  std::vector<int> seen(static_cast<std::size_t>(n), 0);
  std::size_t lo = folds.front().size();
  std::size_t hi = lo;
  for (const auto& f : folds) {
    lo = std::min(lo, f.size());
    hi = std::max(hi, f.size());
    for (auto i : f) {
      if (i < 0 || i >= n) throw Error("fold plan: row index out of range");
      ++seen[static_cast<std::size_t>(i)];
    }
  }
  if (std::any_of(seen.begin(), seen.end(), [](int c) { return c != 1; })) {
    throw Error("fold plan: folds do not partition the rows");
  }
  if (hi - lo > 1) throw Error("fold plan: fold sizes differ by more than one");
  if (stratified && labels) {
    int plo = n;
    int phi = 0;
    for (const auto& f : folds) {
      int pos = 0;
      for (auto i : f) pos += (*labels)(i);
      plo = std::min(plo, pos);
      phi = std::max(phi, pos);
    }
    if (phi - plo > 1) throw Error("fold plan: per-fold positive counts differ by more than one");
  }
}

FoldPlan make_folds(Eigen::Index n, int k, bool stratified, const VectorXi& labels, std::uint64_t seed) {
  if (k < 2) throw UsageError("need at least 2 folds");
  if (k > n) throw UsageError("more folds (" + std::to_string(k) + ") than rows (" + std::to_string(n) + ")");
  if (stratified && labels.size() != n) throw UsageError("label count does not match n");
  Rng rng(seed);
  std::vector<Eigen::Index> order;
  if (stratified) {
    for (int c = 0; c < 2; ++c) {
      std::vector<Eigen::Index> stratum;
      for (Eigen::Index i = 0; i < n; ++i) {
        if (labels(i) == c) stratum.push_back(i);
      }
      rng.shuffle(stratum);
      order.insert(order.end(), stratum.begin(), stratum.end());
    }
    if (static_cast<Eigen::Index>(order.size()) != n) throw UsageError("stratified folds need binary labels");
  } else {
    order.resize(static_cast<std::size_t>(n));
    for (Eigen::Index i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
    rng.shuffle(order);
  }
  FoldPlan plan;
  plan.n = n;
  plan.k = k;
  plan.stratified = stratified;
  plan.seed = seed;
  plan.folds.resize(static_cast<std::size_t>(k));
  for (std::size_t p = 0; p < order.size(); ++p) plan.folds[p % static_cast<std::size_t>(k)].push_back(order[p]);
  for (auto& f : plan.folds) std::sort(f.begin(), f.end());
  plan.check(stratified ? &labels : nullptr);
  return plan;
}

// ---------------------------------------------------------------- coincidence

std::int64_t CoincidenceMatrix::total() const {
  return counts[0][0] + counts[0][1] + counts[1][0] + counts[1][1];
}

double CoincidenceMatrix::row_percent(int r) const {
  const auto& row = counts.at(static_cast<std::size_t>(r));
  const std::int64_t n = row[0] + row[1];
  return n == 0 ? 0.0 : 100.0 * static_cast<double>(row[static_cast<std::size_t>(r)]) / static_cast<double>(n);
}

int CoincidenceMatrix::row_percent_rounded(int r) const { return display_percent(row_percent(r)); }

std::string CoincidenceMatrix::to_text(const FeatureSpec& target_spec) const {
  std::ostringstream os;
  os << "observed\tpredicted " << target_spec.label(0) << "\tpredicted " << target_spec.label(1)
     << "\tpercent correct\n";
  for (int r = 0; r < 2; ++r) {
    os << target_spec.label(r) << '\t' << counts[static_cast<std::size_t>(r)][0] << '\t'
       << counts[static_cast<std::size_t>(r)][1] << '\t' << row_percent_rounded(r) << '\n';
  }
  os << "overall\t\t\t" << format_fixed(overall_accuracy(*this), 3) << '\n';
  return os.str();
}

CoincidenceMatrix coincidence(const VectorXi& truth, const VectorXi& predicted) {
  if (truth.size() != predicted.size()) throw UsageError("coincidence: length mismatch");
  CoincidenceMatrix m;
  for (Eigen::Index i = 0; i < truth.size(); ++i) {
    const int t = truth(i);
    const int p = predicted(i);
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) throw UsageError("coincidence: labels must be binary");
    ++m.counts[static_cast<std::size_t>(t)][static_cast<std::size_t>(p)];
  }
  return m;
}

double overall_accuracy(const CoincidenceMatrix& m) {
  if (m.total() == 0) throw UsageError("overall_accuracy: empty matrix");
  return 100.0 * static_cast<double>(m.correct()) / static_cast<double>(m.total());
}

// ---------------------------------------------------------------- CV

Trainer make_trainer(ModelFamily family, const ParamSet& params) {
  return [family, params](const CategoricalTable& train, std::uint64_t seed) {
    return train_model(family, train, params, seed);
  };
}

CvResult cross_validate(const Trainer& trainer, const CategoricalTable& data, const FoldPlan& plan,
                        std::uint64_t seed) {
  if (plan.n != data.rows()) throw UsageError("fold plan does not match the table size");
  CvResult out;
  out.pooled_predictions = VectorXi::Constant(data.rows(), -1);
  for (int f = 0; f < plan.k; ++f) {
    const auto train_idx = plan.train_rows(f);
    std::unique_ptr<Classifier> model;
    try {
      model = trainer(data.select_rows(train_idx), derive_seed(seed, static_cast<std::uint64_t>(f)));
    } catch (const Error& e) {
      const std::string msg = "fold " + std::to_string(f) + ": " + e.what();
      if (dynamic_cast<const ComputeError*>(&e)) throw ComputeError(msg);
      if (dynamic_cast<const UsageError*>(&e)) throw UsageError(msg);
      throw Error(msg);
    }
    const auto& held = plan.folds[static_cast<std::size_t>(f)];
    int correct = 0;
    for (auto i : held) {
      const int p = model->predict_label(data.row(i));
      out.pooled_predictions(i) = p;
      correct += p == data.label(i);
    }
    out.fold_accuracy.push_back(static_cast<double>(correct) / static_cast<double>(held.size()));
  }
  double sum = 0.0;
  for (double a : out.fold_accuracy) sum += a;
  out.mean_accuracy = sum / static_cast<double>(out.fold_accuracy.size());
  out.matrix = coincidence(data.target(), out.pooled_predictions);
  out.pooled_accuracy = static_cast<double>(out.matrix.correct()) / static_cast<double>(out.matrix.total());
  return out;
}

// ---------------------------------------------------------------- search

void SearchSpec::validate() const {
  if (domains.empty()) throw UsageError("search needs at least one parameter domain");
  for (const auto& [name, values] : domains) {
    if (values.empty()) throw UsageError("search domain for " + name + " is empty");
  }
  if (mode == SearchMode::random && budget < 1) throw UsageError("random search budget must be >= 1");
}

namespace {

std::vector<ParamSet> candidates(const SearchSpec& spec, const ParamSet& fixed) {
  std::vector<ParamSet> out;
  if (spec.mode == SearchMode::grid) {
    std::size_t total = 1;
    for (const auto& d : spec.domains) total *= d.second.size();
    // Last domain varies fastest.
    for (std::size_t t = 0; t < total; ++t) {
      ParamSet p = fixed;
      std::size_t rest = t;
      for (std::size_t d = spec.domains.size(); d-- > 0;) {
        const auto& values = spec.domains[d].second;
        p[spec.domains[d].first] = values[rest % values.size()];
        rest /= values.size();
      }
      out.push_back(std::move(p));
    }
    return out;
  }
  Rng rng(spec.seed);
  for (int t = 0; t < spec.budget; ++t) {
    ParamSet p = fixed;
    for (const auto& [name, values] : spec.domains) p[name] = values[rng.below(values.size())];
    out.push_back(std::move(p));
  }
  return out;
}

}  // namespace

SearchResult search(const SearchSpec& spec, ModelFamily family, const CategoricalTable& data, const FoldPlan& plan,
                    std::uint64_t seed, const ParamSet& fixed) {
  spec.validate();
  SearchResult out;
  for (auto& p : candidates(spec, fixed)) {
    const CvResult cv = cross_validate(make_trainer(family, p), data, plan, seed);
    out.trials.push_back({std::move(p), cv.mean_accuracy});
  }
  for (std::size_t t = 1; t < out.trials.size(); ++t) {
    if (out.trials[t].mean_accuracy > out.trials[static_cast<std::size_t>(out.best_trial)].mean_accuracy) {
      out.best_trial = static_cast<int>(t);
    }
  }
  out.best = out.trials[static_cast<std::size_t>(out.best_trial)].params;
  return out;
}

// ---------------------------------------------------------------- leaderboard

Leaderboard compare_models(const CategoricalTable& data, const std::vector<RosterEntry>& roster, const FoldPlan& plan,
                           std::uint64_t seed) {
  if (roster.empty()) throw UsageError("model roster is empty");
  Leaderboard board;
  board.fold_hash = plan.hash();
  for (const auto& entry : roster) {
    const std::string key = family_key(entry.family);
    const std::uint64_t family_seed = derive_seed(seed, key);
    LeaderboardRow row;
    row.name = family_display_name(entry.family);
    row.family = entry.family;
    row.seed = family_seed;
    row.fold_hash = plan.hash();
    try {
      row.params = entry.params;
      if (entry.search) {
        SearchSpec spec = *entry.search;
        spec.seed = derive_seed(family_seed, "search");
        SearchResult sr = search(spec, entry.family, data, plan, derive_seed(family_seed, "search/cv"), entry.params);
        row.params = sr.best;
        row.trials = std::move(sr.trials);
      }
      const CvResult cv = cross_validate(make_trainer(entry.family, row.params), data, plan, family_seed);
      row.fold_accuracy = cv.fold_accuracy;
      row.accuracy_percent = 100.0 * cv.mean_accuracy;
      row.pooled_percent = 100.0 * cv.pooled_accuracy;
      row.matrix = cv.matrix;
    } catch (const ComputeError& e) {
      throw ComputeError(row.name + ": " + e.what());
    } catch (const UsageError& e) {
      throw UsageError(row.name + ": " + e.what());
    } catch (const Error& e) {
      throw Error(row.name + ": " + e.what());
    }
    board.rows.push_back(std::move(row));
  }
  std::stable_sort(board.rows.begin(), board.rows.end(), [](const auto& a, const auto& b) {
    if (a.accuracy_percent != b.accuracy_percent) return a.accuracy_percent > b.accuracy_percent;
    return a.name < b.name;
  });
  return board;
}

std::string Leaderboard::to_text() const {
  std::ostringstream os;
  os << "rank\tmodel\toverall accuracy (%)\tparams\n";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    os << r + 1 << '\t' << rows[r].name << '\t' << format_fixed(rows[r].accuracy_percent, 3) << '\t'
       << format_params(rows[r].params) << '\n';
  }
  return os.str();
}

}  // namespace treebench
