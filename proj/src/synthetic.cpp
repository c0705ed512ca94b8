#include <algorithm>
#include <cmath>
#include <set>

#include "treebench/dataset.hpp"

namespace treebench {

std::vector<int> SyntheticRules::relevant_features() const {
  std::set<int> s;
  for (const auto& e : main_effects) {
    if (e.weight != 0.0) s.insert(e.feature);
  }
  for (const auto& x : interactions) {
    if (x.weight != 0.0) {
      s.insert(x.feature_a);
      s.insert(x.feature_b);
    }
  }
  return {s.begin(), s.end()};
}

CategoricalTable generate_synthetic(const std::vector<FeatureSpec>& schema, std::int64_t n, std::uint64_t seed,
                                    const SyntheticRules& rules) {
  if (n < 1) throw UsageError("generate_synthetic: n must be >= 1");
  const auto m = static_cast<Eigen::Index>(schema.size());
  std::vector<std::vector<double>> weights(schema.size());
  for (std::size_t j = 0; j < schema.size(); ++j) {
    schema[j].validate();
    if (j < rules.code_weights.size() && !rules.code_weights[j].empty()) {
      if (rules.code_weights[j].size() != schema[j].allowed_codes.size()) {
        throw UsageError("generate_synthetic: code weights for '" + schema[j].name + "' do not match its codes");
      }
      weights[j] = rules.code_weights[j];
    } else {
      weights[j].assign(schema[j].allowed_codes.size(), 1.0);
    }
  }
  auto check_feature = [&](int f, int code) {
    if (f < 0 || f >= m || !schema[static_cast<std::size_t>(f)].allows(code)) {
      throw UsageError("generate_synthetic: effect refers to an unknown feature/code");
    }
  };
  for (const auto& e : rules.main_effects) check_feature(e.feature, e.code);
  for (const auto& x : rules.interactions) {
    check_feature(x.feature_a, x.code_a);
    check_feature(x.feature_b, x.code_b);
  }

  Rng rng(seed);
  CodeMatrix codes(n, m);
  VectorXi target(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    for (Eigen::Index j = 0; j < m; ++j) {
      const auto& spec = schema[static_cast<std::size_t>(j)];
      codes(i, j) = spec.allowed_codes[rng.categorical(weights[static_cast<std::size_t>(j)])];
    }
    double eta = rules.intercept;
    for (const auto& e : rules.main_effects) {
      if (codes(i, e.feature) == e.code) eta += e.weight;
    }
    for (const auto& x : rules.interactions) {
      const bool a = codes(i, x.feature_a) == x.code_a;
      const bool b = codes(i, x.feature_b) == x.code_b;
      if (a != b) eta += x.weight;
    }
    // Both uniforms are always drawn so the stream layout is independent of the options.
    const double u_target = rng.uniform();
    const double u_noise = rng.uniform();
    int y = rules.deterministic ? (eta > 0.0 ? 1 : 0) : (u_target < 1.0 / (1.0 + std::exp(-eta)) ? 1 : 0);
    if (u_noise < rules.label_noise) y = 1 - y;
    target(i) = y;
  }
  return CategoricalTable(schema, std::move(codes), std::move(target));
}

FeatureSpec binary_feature(const std::string& name, const std::string& label0, const std::string& label1) {
  FeatureSpec f;
  f.name = name;
  f.allowed_codes = {0, 1};
  f.code_labels = {{0, label0}, {1, label1}};
  return f;
}

// ---------------------------------------------------------------- crash study fixture

std::string crss_rules_text() {
  return R"(# Curve-crash cohort recoding for CRSS-style vehicle records.
[cohort]
alignment_field = VALIGN
curve_codes = 2 3 4
negotiating_field = P_CRASH1
negotiating_codes = 6

[target injury]
source = MAX_VSEV
missing = 9
label 0 = vehicle without injury
label 1 = vehicle with injury
rule = in 0 -> 0
rule = range 1 4 -> 1
default = drop

[feature urban_rural]
source = URBANICITY
label 1 = urban
label 2 = rural
rule = in 1 -> 1
rule = in 2 -> 2

[feature num_vehicles]
source = VE_TOTAL
label 0 = 1
label 1 = >1
rule = in 1 -> 0
rule = ge 2 -> 1

[feature num_occupants]
source = NUMOCCS
missing = 97 98 99
label 0 = 1
label 1 = >1
rule = le 1 -> 0
rule = range 2 96 -> 1

[feature first_harmful_event]
source = HARM_EV
missing = 98 99
label 0 = other events
label 1 = collision with motor vehicle in transport
rule = in 12 -> 1
default = 0

[feature vehicle_model_year]
source = MOD_YEAR
missing = 9998 9999
label 0 = <2010
label 1 = >=2010
rule = lt 2010 -> 0
rule = ge 2010 -> 1

[feature initial_contact_point]
source = IMPACT1
missing = 98 99
label 0 = other areas
label 1 = front
rule = in 11 12 1 -> 1
default = 0

[feature extent_of_damage]
source = DEFORMED
missing = 8 9
label 0 = not disabling damage
label 1 = disabling damage
rule = in 6 -> 1
rule = in 0 2 4 -> 0

[feature most_harmful_event]
source = M_HARM
missing = 98 99
label 0 = other events
label 1 = collision with motor vehicle in transport
rule = in 12 -> 1
default = 0

[feature speeding_related]
source = SPEEDREL
missing = 8 9
label 0 = no
label 1 = yes
rule = in 0 -> 0
rule = range 2 5 -> 1

[feature driver_error]
source = DRIVERRF
missing = 99
label 0 = no error
label 1 = error
rule = in 0 -> 0
rule = range 1 98 -> 1

[feature trafficway]
source = VTRAFWAY
missing = 8 9
label 0 = divided two-way and others
label 1 = not divided two-way
rule = in 1 -> 1
rule = range 0 7 -> 0

[feature speed_limit]
source = VSPD_LIM
missing = 98 99
label 0 = <46
label 1 = >=46
rule = lt 46 -> 0
rule = ge 46 -> 1

[feature roadway_alignment]
source = VALIGN
missing = 8 9
label 1 = curve right
label 2 = curve left
label 3 = curve - unknown direction
rule = in 2 -> 1
rule = in 3 -> 2
rule = in 4 -> 3
default = drop

[feature grade]
source = VPROFILE
missing = 8 9
label 0 = not level
label 1 = level
rule = in 1 -> 1
rule = range 2 6 -> 0

[feature surface_condition]
source = VSURCOND
missing = 98 99
label 0 = not dry
label 1 = dry
rule = in 1 -> 1
rule = range 2 11 -> 0

[feature traffic_control]
source = VTRAFCON
missing = 97 98 99
label 0 = no
label 1 = yes
rule = in 0 -> 0
rule = range 1 96 -> 1

[feature critical_event]
source = P_CRASH2
missing = 98 99
label 1 = the vehicle itself
label 2 = other vehicles
label 3 = others
rule = range 1 19 -> 1
rule = range 50 78 -> 2
rule = range 80 92 -> 3

[feature avoidance_maneuver]
source = P_CRASH3
missing = 98 99
label 0 = no action
label 1 = braking
label 2 = others
rule = in 1 -> 0
rule = range 2 4 -> 1
rule = range 5 97 -> 2

[feature pre_impact_stability]
source = PCRASH4
missing = 8 9
label 0 = no tracking
label 1 = tracking
rule = in 1 -> 1
rule = range 2 7 -> 0

[feature pre_impact_location]
source = PCRASH5
missing = 8 9
label 0 = not departed roadway
label 1 = departed roadway
rule = range 4 5 -> 1
rule = range 0 7 -> 0

[feature crash_type]
source = ACC_TYPE
missing = 98 99
label 0 = others
label 1 = single driver
rule = range 1 16 -> 1
rule = range 20 93 -> 0

[feature month_winter]
source = MONTH
label 0 = not winter
label 1 = winter
rule = in 12 1 2 -> 1
rule = range 3 11 -> 0
)";
}

std::vector<FeatureSpec> crash_schema() { return parse_rules(crss_rules_text()).schema(); }

namespace {

// Feature indices into crash_schema().
constexpr int kFirstHarmful = 3;
constexpr int kDamage = 6;
constexpr int kTrafficway = 10;
constexpr int kGrade = 13;
constexpr int kSurface = 14;
constexpr int kCritical = 16;
constexpr int kLocation = 19;
constexpr int kWinter = 21;

}  // namespace

SyntheticRules crash_rules() {
  SyntheticRules r;
  r.code_weights.resize(22);
  r.code_weights[kDamage] = {0.6, 0.4};
  r.code_weights[kWinter] = {0.75, 0.25};
  r.code_weights[kSurface] = {0.3, 0.7};
  // Intercept solves E[sigmoid(eta)] = 394/740 under these code weights.
  r.intercept = -1.3063;
  r.main_effects = {
      {kDamage, 1, 1.4},    {kLocation, 1, 0.9}, {kFirstHarmful, 1, 0.7}, {kWinter, 1, -0.6},
      {kSurface, 1, 0.3},   {kTrafficway, 1, 0.25}, {kGrade, 1, -0.25},   {kCritical, 2, 0.15},
  };
  return r;
}

std::vector<FeatureSpec> planted_schema(int relevant, int noise) {
  std::vector<FeatureSpec> s;
  for (int i = 1; i <= relevant; ++i) s.push_back(binary_feature("relevant_" + std::to_string(i)));
  for (int i = 1; i <= noise; ++i) s.push_back(binary_feature("noise_" + std::to_string(i)));
  return s;
}

SyntheticRules planted_relevance_rules(int relevant, int noise, double weight) {
  (void)noise;
  SyntheticRules r;
  // Offset chosen so every relevant feature can flip the Bayes decision.
  r.intercept = -weight * (relevant / 2.0 - 0.5);
  for (int i = 0; i < relevant; ++i) r.main_effects.push_back({i, 1, weight});
  return r;
}

SyntheticRules planted_interaction_rules(int noise, double weight, double label_noise) {
  SyntheticRules r;
  r.code_weights.resize(static_cast<std::size_t>(2 + noise));
  // Unequal marginals give each XOR input a small main effect greedy trees
  // can find; a main-effects model still cannot represent the XOR.
  r.code_weights[0] = {0.4, 0.6};
  r.code_weights[1] = {0.4, 0.6};
  r.intercept = -weight / 2.0;
  r.interactions.push_back({0, 1, 1, 1, weight});
  r.deterministic = true;
  r.label_noise = label_noise;
  return r;
}

// Raw-value pools per coded value, consistent with crss_rules_text().
namespace {

struct RawPool {
  std::string source;
  std::vector<std::vector<std::int64_t>> by_code;  // indexed by allowed-code position
};

std::vector<RawPool> crss_pools() {
  return {
      {"URBANICITY", {{1}, {2}}},
      {"VE_TOTAL", {{1}, {2, 3, 4}}},
      {"NUMOCCS", {{0, 1}, {2, 3, 4, 5}}},
      {"HARM_EV", {{1, 8, 24, 30, 33, 42}, {12}}},
      {"MOD_YEAR", {{1998, 2003, 2006, 2009}, {2010, 2014, 2017, 2020}}},
      {"IMPACT1", {{0, 3, 6, 9}, {11, 12, 1}}},
      {"DEFORMED", {{0, 2, 4}, {6}}},
      {"M_HARM", {{1, 8, 24, 30, 42}, {12}}},
      {"SPEEDREL", {{0}, {2, 3, 4, 5}}},
      {"DRIVERRF", {{0}, {6, 8, 36, 50}}},
      {"VTRAFWAY", {{2, 3, 4, 5}, {1}}},
      {"VSPD_LIM", {{25, 30, 35, 40, 45}, {50, 55, 60, 65}}},
      {"VALIGN", {{2}, {3}, {4}}},
      {"VPROFILE", {{2, 3, 4, 5, 6}, {1}}},
      {"VSURCOND", {{2, 3, 4, 10}, {1}}},
      {"VTRAFCON", {{0}, {1, 3, 20, 23}}},
      {"P_CRASH2", {{1, 2, 5, 6, 12}, {50, 51, 62, 66}, {80, 87, 89}}},
      {"P_CRASH3", {{1}, {2, 3, 4}, {5, 6, 7, 9}}},
      {"PCRASH4", {{2, 3, 4, 5}, {1}}},
      {"PCRASH5", {{1, 2, 3, 6}, {4, 5}}},
      {"ACC_TYPE", {{20, 24, 44, 50, 68}, {1, 2, 6, 11, 13}}},
      {"MONTH", {{3, 4, 5, 6, 7, 8, 9, 10, 11}, {12, 1, 2}}},
  };
}

}  // namespace

RawFixture make_crss_fixture(std::int64_t n, std::uint64_t seed) {
  RawFixture fx;
  fx.rules = parse_rules(crss_rules_text());
  const auto schema = fx.rules.schema();
  const auto pools = crss_pools();
  const CategoricalTable coded = generate_synthetic(schema, n, derive_seed(seed, "coded"), crash_rules());
  Rng rng(derive_seed(seed, "raw"));

  constexpr double kMissingRate = 0.01;
  fx.table.columns.clear();
  for (const auto& p : pools) fx.table.columns.push_back(p.source);
  fx.table.columns.push_back("P_CRASH1");
  fx.table.columns.push_back("MAX_VSEV");
  const auto width = static_cast<Eigen::Index>(fx.table.columns.size());
  fx.table.values.resize(n, width);
  const Eigen::Index align_col = 12;
  const Eigen::Index move_col = width - 2;
  const Eigen::Index sev_col = width - 1;

  for (Eigen::Index i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < pools.size(); ++j) {
      const auto& spec = schema[j];
      const auto& pool = pools[j].by_code[static_cast<std::size_t>(spec.code_index(coded.code(i, static_cast<Eigen::Index>(j))))];
      std::int64_t v = pool[rng.below(pool.size())];
      const double u = rng.uniform();
      if (!spec.missing_codes.empty() && u < kMissingRate) {
        v = spec.missing_codes[rng.below(spec.missing_codes.size())];
      }
      fx.table.values(i, static_cast<Eigen::Index>(j)) = v;
    }
    // Cohort membership: most rows negotiate a curve; the rest are straight
    // road or curve rows with a different pre-event movement.
    const double u = rng.uniform();
    std::int64_t movement = 6;
    if (u < 0.15) {
      fx.table.values(i, align_col) = rng.bernoulli(0.8) ? 1 : 0;
      movement = rng.bernoulli(0.5) ? 1 : 6;
    } else if (u < 0.25) {
      static constexpr std::int64_t kOther[] = {1, 4, 10, 15};
      movement = kOther[rng.below(4)];
    }
    fx.table.values(i, move_col) = movement;
    std::int64_t sev = coded.label(i) == 0 ? 0 : 1 + static_cast<std::int64_t>(rng.below(4));
    const double us = rng.uniform();
    if (us < 0.01) {
      sev = 9;
    } else if (us < 0.015) {
      sev = 6;  // died prior to crash: dropped by the default rule
    }
    fx.table.values(i, sev_col) = sev;
  }
  return fx;
}

}  // namespace treebench
