#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "rulescope/error.h"
#include "rulescope/reduction.h"
#include "test_util.h"

namespace rulescope {
namespace {

ReductionProblem TwoClassProblem() {
  ReductionProblem p;
  p.num_classes = 2;
  p.base_scores = {0, 0};
  p.candidates = {0};
  p.rule_labels = {1};
  p.rule_weights = {1};
  p.scores = {0.5};
  p.rows = {0};
  p.sample_labels = {1};
  p.covers = {{0}};
  p.budget = 1;
  return p;
}

TEST(Votes, DirectFormula) {
  ReductionProblem p = TwoClassProblem();
  const std::vector<double> half = {0.5};
  EXPECT_EQ(VoteScores(p, half, 0), (std::vector<double>{0, 0.5}));
  const std::vector<double> zero = {0};
  EXPECT_EQ(VoteScores(p, zero, 0), p.base_scores);
  p.score_scale = 2;
  EXPECT_EQ(VoteScores(p, half, 0), (std::vector<double>{0, 0.25}));
}

TEST(Hinge, Examples) {
  EXPECT_EQ(HingeLoss(std::vector<double>{0.7, 0.2, 0.1}, 0, 0.3), 0.0);
  EXPECT_NEAR(HingeLoss(std::vector<double>{0.4, 0.5, 0.1}, 0, 0.3), 0.4, 1e-12);
  EXPECT_EQ(HingeLoss(std::vector<double>{0.5, 0.5}, 0, 0.0), 0.0);
}

TEST(Objective, Endpoints) {
  std::mt19937_64 rng(1);
  ReductionProblem p = testing::RandomProblem(rng, 8, 20, 2, 4);
  p.xi = 1.0;
  p.lambda = 0.0;
  EXPECT_NEAR(Objective(p, std::vector<double>(8, 0.0)), 1.0, 1e-12);
  // Labels are the full-vote argmax; margins may be zero on ties, so use a
  // zero margin requirement.
  p.xi = 0.0;
  EXPECT_NEAR(Objective(p, std::vector<double>(8, 1.0)), 0.0, 1e-12);
}

TEST(Objective, MatchesStraightLineOracle) {
  std::mt19937_64 rng(1234);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::uniform_int_distribution<std::size_t> classes(2, 4);
  for (int draw = 0; draw < 1000; ++draw) {
    ReductionProblem p = testing::RandomProblem(rng, 6, 8, classes(rng), 3, draw % 2 == 1);
    p.xi = unit(rng);
    p.lambda = unit(rng);
    p.score_scale = 0.5 + unit(rng);
    for (double& b : p.base_scores) b = unit(rng) - 0.5;
    std::vector<double> z(6);
    for (double& v : z) v = unit(rng);
    ASSERT_NEAR(Objective(p, z), testing::StraightLineObjective(p, z), 1e-9) << "draw " << draw;
  }
}

TEST(Relaxation, SingleRulePositiveScore) {
  ReductionProblem p = TwoClassProblem();
  p.covers = {{}};
  p.lambda = 0.5;
  const LpRelaxation r = SolveLpRelaxation(p);
  ASSERT_EQ(r.z.size(), 1u);
  EXPECT_NEAR(r.z[0], 1.0, 1e-9);
}

TEST(Relaxation, NothingCoveredZeroMargin) {
  std::mt19937_64 rng(2);
  ReductionProblem p = testing::RandomProblem(rng, 5, 6, 2, 2, false, 0.0);
  p.xi = 0.0;
  p.lambda = 0.0;
  const LpRelaxation r = SolveLpRelaxation(p);
  EXPECT_NEAR(r.objective, 0.0, 1e-12);
}

TEST(Relaxation, LowerBoundsEveryIntegralSelection) {
  std::mt19937_64 rng(77);
  ReductionProblem p = testing::RandomProblem(rng, 12, 30, 2, 4);
  p.xi = 0.5;
  p.lambda = 0.3;
  const LpRelaxation r = SolveLpRelaxation(p);
  EXPECT_NEAR(r.objective, Objective(p, r.z), 1e-9);
  EXPECT_LE(r.objective, testing::BestIntegralObjective(p) + 1e-9);
  double mass = 0;
  for (double v : r.z) {
    EXPECT_GE(v, -1e-9);
    EXPECT_LE(v, 1 + 1e-9);
    mass += v;
  }
  EXPECT_LE(mass, 4 + 1e-7);
}

TEST(Relaxation, ForcedRulesStayAtOne) {
  std::mt19937_64 rng(8);
  ReductionProblem p = testing::RandomProblem(rng, 10, 20, 3, 4);
  p.forced = {2, 7};
  p.lambda = 0;
  const LpRelaxation r = SolveLpRelaxation(p);
  EXPECT_NEAR(r.z[2], 1.0, 1e-12);
  EXPECT_NEAR(r.z[7], 1.0, 1e-12);
  const auto chosen = RoundSelection(r.z, p.scores, p.budget, p.forced);
  EXPECT_TRUE(std::find(chosen.begin(), chosen.end(), 2) != chosen.end());
  EXPECT_TRUE(std::find(chosen.begin(), chosen.end(), 7) != chosen.end());
  EXPECT_LE(chosen.size(), 4u);
}

TEST(Rounding, Examples) {
  const std::vector<double> integral = {1, 0, 1, 0};
  const std::vector<double> scores = {0.1, 0.3, 0.7, 0.2};
  EXPECT_EQ(RoundSelection(integral, scores, 2), (std::vector<std::size_t>{0, 2}));
  const std::vector<double> z = {0.9, 0.5, 0.5, 0.1};
  EXPECT_EQ(RoundSelection(z, scores, 2), (std::vector<std::size_t>{0, 2}));
  const std::vector<double> none = {0, 0, 0, 0};
  EXPECT_TRUE(RoundSelection(none, scores, 2).empty());
}

TEST(Grid, IdenticalCellsPickSmallestXi) {
  const auto evaluate = [](double, double) { return CellResult{{0}, 1.0, 0.0, {}}; };
  const GridResult r = GridSearch(evaluate);
  EXPECT_DOUBLE_EQ(r.xi, 0.1);
  EXPECT_DOUBLE_EQ(r.lambda, 1.0);
  EXPECT_EQ(r.stage1_fidelity, 1.0);
}

TEST(Grid, FidelityDropStopsLambda) {
  const auto evaluate = [](double xi, double lambda) {
    double f = xi == 0.4 ? 0.95 : 0.9;
    if (lambda >= 0.3 - 1e-12) f -= 0.02;
    return CellResult{{}, f, 0.0, {}};
  };
  const GridResult r = GridSearch(evaluate);
  EXPECT_DOUBLE_EQ(r.xi, 0.4);
  EXPECT_DOUBLE_EQ(r.lambda, 0.2);
  EXPECT_EQ(r.trace.size(), 20u);
}

TEST(Grid, FixedCell) {
  int calls = 0;
  const auto evaluate = [&](double, double) {
    ++calls;
    return CellResult{{}, 0.5, 0.0, {}};
  };
  GridOptions options;
  options.fixed_xi = 0.3;
  options.fixed_lambda = 0.7;
  const GridResult r = GridSearch(evaluate, options);
  EXPECT_EQ(r.xi, 0.3);
  EXPECT_EQ(r.lambda, 0.7);
  EXPECT_EQ(calls, 2);
}

TEST(Selection, AnomalyBiasLimit) {
  std::mt19937_64 rng(31);
  ReductionProblem p = testing::RandomProblem(rng, 20, 15, 2, 5, false, 0.0);
  p.lambda = 1e6;
  p.xi = 0.2;
  const LpRelaxation r = SolveLpRelaxation(p);
  const auto chosen = RoundSelection(r.z, p.scores, p.budget);
  std::vector<std::size_t> order(20);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return p.scores[a] > p.scores[b]; });
  std::vector<std::size_t> top(order.begin(), order.begin() + 5);
  std::sort(top.begin(), top.end());
  EXPECT_EQ(chosen, top);
}

TEST(Coverage, HandMatrix) {
  const DatasetSchema schema = testing::SmallSchema();
  const SampleTable samples = testing::SmallSamples(schema, 10);
  std::mt19937_64 rng(3);
  std::vector<Rule> rules = testing::RandomRules(rng, 4);
  rules.push_back(Rule{});
  rules.back().id = 4;
  const CoverageIndex index = CoverageIndex::Build(rules, samples);
  for (RuleId r = 0; r < 5; ++r) {
    for (std::size_t i = 0; i < 10; ++i) {
      EXPECT_EQ(index.Covers(r, i), rules[r].Covers(samples.row(i)));
    }
  }
  EXPECT_EQ(index.samples_covered(4).size(), 10u);
}

TEST(Coverage, RequiresDenseIds) {
  const DatasetSchema schema = testing::SmallSchema();
  const SampleTable samples = testing::SmallSamples(schema, 4);
  std::vector<Rule> rules(1);
  rules[0].id = 3;
  EXPECT_THROW(CoverageIndex::Build(rules, samples), ValidationError);
}

TEST(Stats, CoverageAndConfidence) {
  const DatasetSchema schema = testing::SmallSchema();
  SampleTable samples(4);
  samples.AddRow(std::vector<double>{1, 0, 0, 0}, 1, Split::kTrain);
  samples.AddRow(std::vector<double>{2, 0, 0, 0}, 1, Split::kTrain);
  samples.AddRow(std::vector<double>{3, 0, 0, 0}, 0, Split::kTrain);
  samples.AddRow(std::vector<double>{3, 0, 0, 0}, 0, Split::kTest);
  std::vector<Rule> rules(3);
  rules[0].conditions[0] = Interval{-kInf, 1};
  rules[0].label = 1;
  rules[1].id = 1;
  rules[1].label = 1;
  rules[2].id = 2;
  rules[2].conditions[0] = Interval{10, 20};
  const CoverageIndex index = CoverageIndex::Build(rules, samples);
  const RuleStats one = ComputeRuleStats(rules[0], index, samples);
  EXPECT_EQ(one.coverage, 1u);
  EXPECT_EQ(one.confidence, 1.0);
  const RuleStats all = ComputeRuleStats(rules[1], index, samples);
  EXPECT_EQ(all.coverage, 3u);
  EXPECT_NEAR(all.confidence, 2.0 / 3, 1e-12);
  EXPECT_TRUE(ComputeRuleStats(rules[2], index, samples).zero_coverage);
}

TEST(Anomaly, AverageScore) {
  const std::vector<double> scores = {0.2, 0.2, 0.2};
  EXPECT_NEAR(AverageAnomalyScore(std::vector<RuleId>{0, 2}, scores), 0.2, 1e-15);
  EXPECT_THROW(AverageAnomalyScore(std::vector<RuleId>{}, scores), ValidationError);
}

class FullSelection : public ::testing::TestWithParam<std::pair<const char*, const char*>> {};

TEST_P(FullSelection, FidelityIsOne) {
  const auto [dataset, model] = GetParam();
  const auto a = testing::LoadFixture(dataset, model);
  EXPECT_EQ(Fidelity(a->rules, a->coverage, a->AllRuleIds(), a->AllRows(), a->predictions,
                     a->ensemble.base_scores, a->ensemble.num_classes),
            1.0);
}

INSTANTIATE_TEST_SUITE_P(All, FullSelection,
                         ::testing::Values(std::pair{"credit", "rf"}, std::pair{"credit", "gbt"},
                                           std::pair{"multiclass", "rf"},
                                           std::pair{"multiclass", "gbt"}));

TEST(Fidelity, EmptySelectionVotesClassZero) {
  const auto a = testing::LoadFixture("credit", "rf");
  const auto rows = a->AllRows();
  std::size_t zeros = 0;
  for (std::size_t row : rows) zeros += a->predictions[row] == 0;
  EXPECT_NEAR(Fidelity(a->rules, a->coverage, std::vector<RuleId>{}, rows, a->predictions,
                       a->ensemble.base_scores, 2),
              static_cast<double>(zeros) / rows.size(), 1e-12);
}

TEST(Reduce, SmallCandidateSetKeepsEverything) {
  const auto a = testing::LoadFixture("multiclass", "rf");
  std::vector<RuleId> candidates = {0, 1, 2, 3, 4};
  ReduceOptions options;
  options.budget = 10;
  const Selection s = Reduce(a->inputs(), a->samples, candidates, a->AllRows(), options);
  EXPECT_EQ(s.rules, candidates);
  EXPECT_FALSE(s.reduced);

  options.budget = 300;
  const Selection all = Reduce(a->inputs(), a->samples, a->AllRuleIds(), a->AllRows(), options);
  EXPECT_EQ(all.fidelity_train, 1.0);
}

TEST(Reduce, FixedCellIsDeterministic) {
  const auto a = testing::LoadFixture("multiclass", "gbt");
  ReduceOptions options;
  options.budget = 15;
  options.grid.fixed_xi = 0.3;
  options.grid.fixed_lambda = 0.2;
  const Selection first = Reduce(a->inputs(), a->samples, a->AllRuleIds(), a->AllRows(), options);
  const Selection second = Reduce(a->inputs(), a->samples, a->AllRuleIds(), a->AllRows(), options);
  EXPECT_EQ(first.rules, second.rules);
  EXPECT_EQ(first.z, second.z);
  EXPECT_LE(first.rules.size(), 15u);
  EXPECT_TRUE(first.reduced);
}

TEST(Reduce, RandomBaseline) {
  std::vector<RuleId> ids(50);
  std::iota(ids.begin(), ids.end(), 0);
  const auto a = RandomSelection(ids, 10, 42);
  EXPECT_EQ(a, RandomSelection(ids, 10, 42));
  EXPECT_EQ(a.size(), 10u);
  EXPECT_TRUE(std::is_sorted(a.begin(), a.end()));
  EXPECT_EQ(RandomSelection(ids, 80, 1).size(), 50u);
}

}  // namespace
}  // namespace rulescope
