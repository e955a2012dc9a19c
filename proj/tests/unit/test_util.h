#ifndef RULESCOPE_TESTS_TEST_UTIL_H_
#define RULESCOPE_TESTS_TEST_UTIL_H_

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "rulescope/analysis.h"
#include "rulescope/anomaly.h"
#include "rulescope/error.h"
#include "rulescope/hierarchy.h"
#include "rulescope/reorder.h"
#include "rulescope/reduction.h"
#include "rulescope/rule.h"
#include "rulescope/schema.h"

namespace rulescope::testing {

inline std::filesystem::path FixturePath(const std::string& relative) {
  return std::filesystem::path(RULESCOPE_FIXTURE_DIR) / relative;
}

struct FixtureFiles {
  std::string schema;
  std::string data;
  std::string model;
  ModelFormat format;
  std::string expected;
};

inline FixtureFiles Fixture(const std::string& dataset, const std::string& model) {
  const std::filesystem::path dir = FixturePath(dataset);
  const bool gbt = model == "gbt";
  FixtureFiles f;
  f.schema = (dir / "schema.json").string();
  f.data = (dir / (dataset == "credit" ? "credit.csv" : "data.csv")).string();
  f.model = (dir / (gbt ? "gbt.txt" : "rf.json")).string();
  f.format = gbt ? ModelFormat::kGbtText : ModelFormat::kJsonInterchange;
  f.expected = (dir / (model + "_expected.txt")).string();
  return f;
}

// Analyses are expensive (logistic fit), so each fixture is built once.
inline std::shared_ptr<const Analysis> LoadFixture(const std::string& dataset,
                                                   const std::string& model) {
  static std::map<std::string, std::shared_ptr<const Analysis>> cache;
  const std::string key = dataset + "/" + model;
  auto it = cache.find(key);
  if (it == cache.end()) {
    const FixtureFiles f = Fixture(dataset, model);
    it = cache.emplace(key, LoadAnalysis(f.schema, f.data, f.model, f.format)).first;
  }
  return it->second;
}

inline std::vector<std::size_t> ReadExpected(const std::string& path) {
  std::ifstream in(path);
  std::vector<std::size_t> out;
  std::size_t v = 0;
  while (in >> v) out.push_back(v);
  return out;
}

inline std::string WriteTemp(const std::string& name, const std::string& content) {
  const auto path = std::filesystem::temp_directory_path() / ("rulescope_" + name);
  std::ofstream(path) << content;
  return path.string();
}

// Random reduction instance: every rule covers each sample with probability
// `density`; sample labels are the argmax of the full vote so that the full
// selection is perfectly faithful.
inline ReductionProblem RandomProblem(std::mt19937_64& rng, std::size_t m, std::size_t n,
                                      std::size_t num_classes, std::size_t budget,
                                      bool signed_weights = false, double density = 0.4) {
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> label(0, num_classes - 1);
  ReductionProblem p;
  p.num_classes = num_classes;
  p.base_scores.assign(num_classes, 0.0);
  p.budget = budget;
  for (std::size_t j = 0; j < m; ++j) {
    p.candidates.push_back(j);
    p.rule_labels.push_back(label(rng));
    p.rule_weights.push_back(signed_weights ? unit(rng) * 2.0 - 1.0 : 1.0);
    p.scores.push_back(unit(rng));
  }
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> covering;
    std::vector<double> votes(num_classes, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (unit(rng) < density) {
        covering.push_back(j);
        votes[p.rule_labels[j]] += p.rule_weights[j];
      }
    }
    p.rows.push_back(i);
    p.covers.push_back(covering);
    p.sample_labels.push_back(ArgMax(votes));
  }
  return p;
}

// Small mixed schema used by synthetic rule fixtures: three numeric
// attributes followed by one categorical attribute with four categories.
inline DatasetSchema SmallSchema() {
  return DatasetSchema({{"a", AttributeKind::kNumeric, {}},
                        {"b", AttributeKind::kNumeric, {}},
                        {"c", AttributeKind::kNumeric, {}},
                        {"color", AttributeKind::kCategorical, {"red", "green", "blue", "black"}}},
                       {"no", "yes"});
}

// Numeric values 0..99 per attribute, categories cycling.
inline SampleTable SmallSamples(const DatasetSchema& schema, std::size_t n = 100) {
  SampleTable t(schema.num_attributes());
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row = {static_cast<double>(i), static_cast<double>((i * 37) % n),
                               static_cast<double>((i * 11) % n), static_cast<double>(i % 4)};
    t.AddRow(row, static_cast<int>(i % 2), Split::kTrain);
  }
  return t;
}

// Rules over SmallSchema drawn from a coarse grid so that similar and
// identical conditions are common.
inline std::vector<Rule> RandomRules(std::mt19937_64& rng, std::size_t count,
                                     std::size_t num_labels = 2) {
  std::uniform_int_distribution<int> coin(0, 1);
  std::uniform_int_distribution<int> cut(0, 4);
  std::uniform_int_distribution<std::size_t> label(0, num_labels - 1);
  std::vector<Rule> rules;
  for (std::size_t r = 0; r < count; ++r) {
    Rule rule;
    rule.id = r;
    rule.label = label(rng);
    for (std::size_t a = 0; a < 3; ++a) {
      if (!coin(rng)) continue;
      const int lo = cut(rng);
      const int hi = lo + 1 + cut(rng);
      rule.conditions[a] = Interval{lo == 0 ? -kInf : lo * 20.0 - 0.5,
                                    hi >= 5 ? kInf : hi * 20.0 - 0.5};
    }
    if (coin(rng)) {
      CategorySet set(4, false);
      set.Insert(static_cast<std::size_t>(cut(rng) % 4));
      if (coin(rng)) set.Insert(static_cast<std::size_t>(cut(rng) % 4));
      rule.conditions[3] = set;
    }
    rules.push_back(rule);
  }
  return rules;
}

// Largest relative error between the analytic gradient of a random softmax
// objective and central finite differences.
inline double LogisticGradientError(std::mt19937_64& rng) {
  std::uniform_int_distribution<std::size_t> size(3, 12);
  std::uniform_int_distribution<std::size_t> classes(2, 4);
  std::normal_distribution<double> normal(0.0, 1.0);
  const std::size_t n = size(rng);
  const std::size_t d = size(rng) / 2 + 1;
  const std::size_t c = classes(rng);
  std::vector<RuleFeatureVector> features(n, RuleFeatureVector(d));
  std::vector<std::size_t> labels(n);
  std::uniform_int_distribution<std::size_t> label(0, c - 1);
  for (std::size_t i = 0; i < n; ++i) {
    for (double& x : features[i]) x = normal(rng);
    labels[i] = label(rng);
  }
  const LogisticObjective objective = MakeLogisticObjective(features, labels, c, 1e-2);
  Eigen::VectorXd params(static_cast<Eigen::Index>(objective.num_parameters()));
  for (Eigen::Index k = 0; k < params.size(); ++k) params[k] = normal(rng);
  Eigen::VectorXd analytic;
  objective.Evaluate(params, &analytic);
  Eigen::VectorXd numeric(params.size());
  const double h = 1e-5;
  for (Eigen::Index k = 0; k < params.size(); ++k) {
    Eigen::VectorXd plus = params;
    Eigen::VectorXd minus = params;
    plus[k] += h;
    minus[k] -= h;
    numeric[k] = (objective.Evaluate(plus, nullptr) - objective.Evaluate(minus, nullptr)) / (2 * h);
  }
  return (analytic - numeric).norm() / std::max({analytic.norm(), numeric.norm(), 1e-12});
}

// 50 "high income -> approve" rules, 50 "low income -> reject" rules and one
// planted "high income -> reject" rule (the last one). Two numeric
// attributes: income and an unrelated one.
struct PlantedFixture {
  std::vector<RuleFeatureVector> features;
  std::vector<std::size_t> labels;
  std::size_t planted = 0;
};

inline PlantedFixture PlantedOutlier(std::uint64_t seed = 3) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> high(0.55, 0.85);
  std::uniform_real_distribution<double> low(0.15, 0.45);
  std::uniform_real_distribution<double> other(0.0, 0.5);
  PlantedFixture f;
  for (int k = 0; k < 50; ++k) {
    const double lo = other(rng);
    f.features.push_back({high(rng), 1.0, lo, lo + 0.5});
    f.labels.push_back(1);
  }
  for (int k = 0; k < 50; ++k) {
    const double lo = other(rng);
    f.features.push_back({0.0, low(rng), lo, lo + 0.5});
    f.labels.push_back(0);
  }
  const double lo = other(rng);
  f.features.push_back({high(rng), 1.0, lo, lo + 0.5});
  f.labels.push_back(0);
  f.planted = f.features.size() - 1;
  return f;
}

// Independent evaluator of the reduction objective: dense coverage matrix,
// explicit per-class vote loops.
inline double StraightLineObjective(const ReductionProblem& p, const std::vector<double>& z) {
  const std::size_t n = p.rows.size();
  const std::size_t m = p.candidates.size();
  std::vector<std::vector<bool>> a(n, std::vector<bool>(m, false));
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j : p.covers[i]) a[i][j] = true;
  }
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> y(p.num_classes);
    for (std::size_t c = 0; c < p.num_classes; ++c) {
      double v = p.base_scores[c];
      for (std::size_t j = 0; j < m; ++j) {
        if (a[i][j] && p.rule_labels[j] == c) v += z[j] * p.rule_weights[j];
      }
      y[c] = v / p.score_scale;
    }
    double rival = -1e300;
    for (std::size_t c = 0; c < p.num_classes; ++c) {
      if (c != p.sample_labels[i] && y[c] > rival) rival = y[c];
    }
    const double slack = p.xi - (y[p.sample_labels[i]] - rival);
    total += slack > 0 ? slack : 0.0;
  }
  double bonus = 0.0;
  for (std::size_t j = 0; j < m; ++j) bonus += z[j] * p.scores[j];
  return total / static_cast<double>(n) - p.lambda * bonus / static_cast<double>(p.budget);
}

// Smallest objective over every 0/1 selection of at most `budget` rules.
inline double BestIntegralObjective(const ReductionProblem& p) {
  const std::size_t m = p.candidates.size();
  double best = 1e300;
  for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << m); ++mask) {
    if (static_cast<std::size_t>(__builtin_popcountll(mask)) > p.budget) continue;
    std::vector<double> z(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
      if (mask >> j & 1) z[j] = 1.0;
    }
    best = std::min(best, Objective(p, z));
  }
  return best;
}

// Runs one random zoom sequence (1 to 3 zooms on 1 or 2 representatives)
// from `root` and checks the level invariants. Returns a description of the
// first violation, or an empty string.
inline std::string ZoomSequenceViolation(const Analysis& analysis, const HierarchyOptions& options,
                                         const std::shared_ptr<const HierarchyLevel>& root,
                                         std::mt19937_64& rng) {
  const auto subset = [](const std::vector<std::size_t>& a, const std::vector<std::size_t>& b) {
    return std::includes(b.begin(), b.end(), a.begin(), a.end());
  };
  std::vector<std::shared_ptr<const HierarchyLevel>> levels = {root};
  std::vector<std::vector<RuleId>> log;
  std::uniform_int_distribution<int> depth(1, 3);
  const int zooms = depth(rng);
  for (int k = 0; k < zooms; ++k) {
    const HierarchyLevel& level = *levels.back();
    if (level.representatives.size() < 2) break;
    std::shared_ptr<const HierarchyLevel> next;
    std::vector<RuleId> selected;
    for (int attempt = 0; attempt < 10 && !next; ++attempt) {
      std::vector<RuleId> pool = level.representatives;
      std::shuffle(pool.begin(), pool.end(), rng);
      selected.assign(pool.begin(), pool.begin() + 1 + static_cast<std::ptrdiff_t>(rng() % 2));
      std::sort(selected.begin(), selected.end());
      try {
        next = ZoomIn(analysis, level, selected, options);
      } catch (const ValidationError&) {
        next = nullptr;
      }
    }
    if (!next) break;
    if (!subset(selected, next->representatives)) return "selected rules missing after zoom";
    if (!subset(next->scope_samples, level.scope_samples)) return "sample scope grew";
    if (!subset(next->scope_rules, level.scope_rules)) return "rule scope grew";
    if (next->representatives.size() > std::max(options.reduce.budget, selected.size())) {
      return "level exceeds the budget";
    }
    for (RuleId r : next->scope_rules) {
      const bool rep = std::binary_search(next->representatives.begin(),
                                          next->representatives.end(), r);
      if (!rep && next->assignment.count(r) != 1) return "hidden rule without assignment";
    }
    levels.push_back(next);
    log.push_back(selected);
  }
  // Replaying the same selections rebuilds identical levels.
  std::shared_ptr<const HierarchyLevel> replay = root;
  for (std::size_t k = 0; k < log.size(); ++k) {
    replay = ZoomIn(analysis, *replay, log[k], options);
    if (replay->ToJson().dump() != levels[k + 1]->ToJson().dump()) return "replay differs";
  }
  return "";
}

// Checks ReorderRules against brute force on one random fixture of at most
// eight rules: S_1 is the exhaustive maximum, S_2 is the maximum over orders
// that stay inside the stage-1 groups and keep S_1, and stage 2 leaves S_1
// unchanged. Returns a description of the first violation.
inline std::string ReorderViolation(std::mt19937_64& rng) {
  static const DatasetSchema schema = SmallSchema();
  static const SampleTable samples = SmallSamples(schema);
  static const QuantileMaps maps = QuantileMaps::Build(samples, schema);
  std::uniform_int_distribution<std::size_t> count(2, 8);
  std::uniform_int_distribution<std::size_t> attr(0, 3);
  const std::vector<Rule> rules = RandomRules(rng, count(rng));
  SimilarityContext context{rules, &schema, &maps, 0.1};
  std::vector<RuleId> rows(rules.size());
  for (RuleId r = 0; r < rows.size(); ++r) rows[r] = r;
  std::shuffle(rows.begin(), rows.end(), rng);
  const std::size_t a1 = attr(rng);
  std::size_t a2 = attr(rng);
  while (a2 == a1) a2 = attr(rng);

  const std::vector<std::size_t> first = {a1};
  const ReorderResult one = ReorderRules(rows, first, context);
  std::vector<RuleId> perm = rows;
  std::sort(perm.begin(), perm.end());
  std::size_t best1 = 0;
  do {
    best1 = std::max(best1, ScoreS(perm, a1, context));
  } while (std::next_permutation(perm.begin(), perm.end()));
  const std::size_t s1 = ScoreS(one.order, a1, context);
  if (s1 != best1) return "stage 1 is not optimal";
  for (const RowRange& g : one.groups[0]) {
    for (std::size_t k = g.begin + 1; k < g.end; ++k) {
      if (rules[one.order[k]].label != rules[one.order[g.begin]].label) return "mixed-label group";
    }
  }

  const std::vector<std::size_t> both = {a1, a2};
  const ReorderResult two = ReorderRules(rows, both, context);
  if (two.groups[0] != one.groups[0]) return "stage-1 groups differ between runs";
  if (ScoreS(two.order, a1, context) != s1) return "stage 2 changed S_1";
  std::vector<std::size_t> group_of(rows.size());
  for (std::size_t g = 0; g < one.groups[0].size(); ++g) {
    for (std::size_t k = one.groups[0][g].begin; k < one.groups[0][g].end; ++k) group_of[k] = g;
  }
  std::vector<std::size_t> position(rules.size());
  for (std::size_t k = 0; k < one.order.size(); ++k) position[one.order[k]] = k;
  std::size_t best2 = 0;
  perm = one.order;
  std::sort(perm.begin(), perm.end());
  do {
    bool inside = true;
    for (std::size_t k = 0; k < perm.size() && inside; ++k) {
      inside = group_of[position[perm[k]]] == group_of[k];
    }
    if (!inside || ScoreS(perm, a1, context) != s1) continue;
    best2 = std::max(best2, ScoreS(perm, a2, context));
  } while (std::next_permutation(perm.begin(), perm.end()));
  for (std::size_t k = 0; k < two.order.size(); ++k) {
    if (group_of[position[two.order[k]]] != group_of[k]) return "stage 2 crossed a group boundary";
  }
  if (ScoreS(two.order, a2, context) != best2) return "stage 2 is not optimal";
  return "";
}

}  // namespace rulescope::testing

#endif  // RULESCOPE_TESTS_TEST_UTIL_H_
