// Prints one PASS/FAIL line per acceptance criterion and exits nonzero when
// any of them fails.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <numeric>
#include <random>
#include <string>

#include "../unit/test_util.h"
#include "rulescope/anomaly.h"
#include "rulescope/features.h"

namespace rulescope {
namespace {

using Clock = std::chrono::steady_clock;

struct Outcome {
  bool pass = false;
  std::string detail;
};

double Seconds(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

std::string Format(const char* fmt, auto... args) {
  char buffer[512];
  std::snprintf(buffer, sizeof buffer, fmt, args...);
  return buffer;
}

Outcome OracleOptimality() {
  const auto start = Clock::now();
  std::mt19937_64 rng(20240611);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const int instances = 24;
  int bound_ok = 0;
  int close = 0;
  double worst_gap = 0.0;
  for (int k = 0; k < instances; ++k) {
    const std::size_t m = 12 + static_cast<std::size_t>(k % 3);
    const std::size_t n = 20 + static_cast<std::size_t>(unit(rng) * 20);
    const std::size_t classes = k % 2 == 0 ? 2 : 3;
    ReductionProblem p = testing::RandomProblem(rng, m, n, classes, 4);
    p.xi = 0.1 + 0.4 * unit(rng);
    p.lambda = unit(rng);
    const LpRelaxation relaxed = SolveLpRelaxation(p);
    const double best = testing::BestIntegralObjective(p);
    bound_ok += relaxed.objective <= best + 1e-9;
    std::vector<double> z(m, 0.0);
    for (std::size_t j : RoundSelection(relaxed.z, p.scores, p.budget)) z[j] = 1.0;
    const double gap = Objective(p, z) - best;
    worst_gap = std::max(worst_gap, gap);
    close += gap <= 0.1 + 1e-12;
  }
  const double seconds = Seconds(start);
  return {bound_ok == instances && close >= 0.9 * instances && seconds < 60,
          Format("%d instances, relaxation bound held on %d, rounded within 0.1 on %d, worst gap "
                 "%.4f, %.1fs",
                 instances, bound_ok, close, worst_gap, seconds)};
}

Outcome CreditReproduction() {
  const auto start = Clock::now();
  const auto a = testing::LoadFixture("credit", "rf");
  ReduceOptions options;
  options.budget = 80;
  const Selection s = Reduce(a->inputs(), a->samples, a->AllRuleIds(), a->AllRows(), options);
  std::mt19937_64 seeds(0);
  double random_mean = 0.0;
  for (int t = 0; t < 5; ++t) {
    random_mean += AverageAnomalyScore(RandomSelection(a->AllRuleIds(), 80, seeds()), a->scores);
  }
  random_mean /= 5;
  const double seconds = Seconds(start);
  return {s.fidelity_test >= 0.90 && s.average_anomaly_score > random_mean && seconds < 600,
          Format("fidelity_test %.4f (need >= 0.90), anomaly %.4f vs random mean %.4f, xi %.2f "
                 "lambda %.2f, %.1fs",
                 s.fidelity_test, s.average_anomaly_score, random_mean, s.xi, s.lambda, seconds)};
}

Outcome AnomalyBiasLimit() {
  std::mt19937_64 rng(31);
  ReductionProblem p = testing::RandomProblem(rng, 20, 15, 2, 5, false, 0.0);
  p.lambda = 1e6;
  p.xi = 0.2;
  const auto chosen = RoundSelection(SolveLpRelaxation(p).z, p.scores, p.budget);
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto x, auto y) { return p.scores[x] > p.scores[y]; });
  std::vector<std::size_t> top(order.begin(), order.begin() + 5);
  std::sort(top.begin(), top.end());
  return {chosen == top, Format("selected %zu rules, top-5 match: %s", chosen.size(),
                                chosen == top ? "yes" : "no")};
}

Outcome ObjectiveOracle() {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> classes(2, 4);
  double worst = 0.0;
  for (int draw = 0; draw < 1000; ++draw) {
    ReductionProblem p = testing::RandomProblem(rng, 6, 8, classes(rng), 3, draw % 2 == 1);
    p.xi = unit(rng);
    p.lambda = unit(rng);
    p.score_scale = 0.5 + unit(rng);
    for (double& b : p.base_scores) b = unit(rng) - 0.5;
    std::vector<double> z(6);
    for (double& v : z) v = unit(rng);
    worst = std::max(worst, std::abs(Objective(p, z) - testing::StraightLineObjective(p, z)));
  }
  return {worst <= 1e-9, Format("1000 draws, max deviation %.3g", worst)};
}

Outcome Logistic() {
  std::mt19937_64 rng(2024);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    worst = std::max(worst, testing::LogisticGradientError(rng));
  }
  const auto f = testing::PlantedOutlier();
  const auto scores = AnomalyScores(FitLogistic(f.features, f.labels, 2), f.features, f.labels);
  const auto top = static_cast<std::size_t>(std::max_element(scores.begin(), scores.end()) -
                                            scores.begin());
  return {worst <= 1e-5 && top == f.planted,
          Format("max relative gradient error %.3g, planted rule ranked first: %s", worst,
                 top == f.planted ? "yes" : "no")};
}

Outcome Reordering() {
  const auto start = Clock::now();
  std::mt19937_64 rng(2718);
  int failures = 0;
  std::string first;
  for (int k = 0; k < 100; ++k) {
    const std::string v = testing::ReorderViolation(rng);
    if (!v.empty() && failures++ == 0) first = v;
  }
  const double seconds = Seconds(start);
  return {failures == 0 && seconds < 60,
          Format("100 fixtures, %d violations%s%s, %.1fs", failures, first.empty() ? "" : ": ",
                 first.c_str(), seconds)};
}

Outcome HierarchyInvariants() {
  const auto start = Clock::now();
  HierarchyOptions options;
  options.reduce.budget = 12;
  options.reduce.grid.fixed_xi = 0.3;
  options.reduce.grid.fixed_lambda = 0.1;
  int failures = 0;
  std::string first;
  std::mt19937_64 rng(17);
  for (const char* model : {"rf", "gbt"}) {
    const auto a = testing::LoadFixture("multiclass", model);
    const auto root = BuildRoot(*a, options);
    for (int k = 0; k < 50; ++k) {
      const std::string v = testing::ZoomSequenceViolation(*a, options, root, rng);
      if (!v.empty() && failures++ == 0) first = v;
    }
  }
  return {failures == 0, Format("100 sequences, %d violations%s%s, %.1fs", failures,
                                first.empty() ? "" : ": ", first.c_str(), Seconds(start))};
}

Outcome QuantileProperties() {
  std::mt19937_64 rng(11);
  bool monotone = true;
  double worst_excess = -1.0;
  for (std::size_t n : {50u, 200u, 1000u}) {
    for (int kind = 0; kind < 2; ++kind) {
      std::normal_distribution<double> normal(3.0, 2.0);
      std::exponential_distribution<double> expo(0.3);
      std::vector<double> values(n);
      for (double& v : values) v = kind == 0 ? normal(rng) : expo(rng);
      const auto maps = QuantileMaps::FromNumericColumns({values});
      std::vector<double> q;
      for (double v : values) q.push_back(maps.Map(0, v));
      std::sort(q.begin(), q.end());
      double d = 0.0;
      for (std::size_t k = 0; k < n; ++k) {
        d = std::max(d, std::abs((k + 1.0) / n - q[k]));
        d = std::max(d, std::abs(q[k] - static_cast<double>(k) / n));
      }
      worst_excess = std::max(worst_excess, d - (1.0 / std::sqrt(static_cast<double>(n)) + 0.05));
      std::uniform_real_distribution<double> query(-10.0, 40.0);
      for (int k = 0; k < 10000; ++k) {
        double x = query(rng);
        double y = query(rng);
        if (x > y) std::swap(x, y);
        monotone &= maps.Map(0, x) <= maps.Map(0, y);
      }
    }
  }
  return {monotone && worst_excess <= 0.0,
          Format("monotone on 6 x 10^4 pairs: %s, worst KS minus bound %.4f",
                 monotone ? "yes" : "no", worst_excess)};
}

Outcome FullSelectionFidelity() {
  std::string detail;
  bool pass = true;
  for (const char* dataset : {"credit", "multiclass"}) {
    for (const char* model : {"rf", "gbt"}) {
      const auto a = testing::LoadFixture(dataset, model);
      const double f = Fidelity(a->rules, a->coverage, a->AllRuleIds(), a->AllRows(),
                                a->predictions, a->ensemble.base_scores, a->ensemble.num_classes);
      pass &= f == 1.0;
      detail += Format("%s%s/%s %.6f", detail.empty() ? "" : ", ", dataset, model, f);
    }
  }
  return {pass, detail};
}

}  // namespace
}  // namespace rulescope

int main() {
  using namespace rulescope;
  const std::pair<const char*, Outcome (*)()> criteria[] = {
      {"reduction oracle optimality", OracleOptimality},
      {"credit reproduction", CreditReproduction},
      {"anomaly-bias limit", AnomalyBiasLimit},
      {"hinge and objective oracle", ObjectiveOracle},
      {"logistic gradient and planted outlier", Logistic},
      {"reordering optimality", Reordering},
      {"hierarchy invariants", HierarchyInvariants},
      {"quantile properties", QuantileProperties},
      {"full-selection fidelity", FullSelectionFidelity},
  };
  int failed = 0;
  for (const auto& [name, run] : criteria) {
    Outcome outcome;
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome = {false, std::string("exception: ") + e.what()};
    }
    failed += !outcome.pass;
    std::printf("%s %s: %s\n", outcome.pass ? "PASS" : "FAIL", name, outcome.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", static_cast<int>(std::size(criteria)) - failed,
              std::size(criteria));
  return failed == 0 ? 0 : 1;
}
