#include <gtest/gtest.h>

#include <random>

#include "rulescope/anomaly.h"
#include "rulescope/error.h"
#include "test_util.h"

namespace rulescope {
namespace {

TEST(Logistic, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(2024);
  for (int trial = 0; trial < 50; ++trial) {
    EXPECT_LE(testing::LogisticGradientError(rng), 1e-5) << "trial " << trial;
  }
}

TEST(Logistic, SeparableClustersFitPerfectly) {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> noise(0.0, 0.1);
  std::vector<RuleFeatureVector> x;
  std::vector<std::size_t> y;
  for (int k = 0; k < 40; ++k) {
    const bool positive = k % 2 == 0;
    x.push_back({(positive ? 1.0 : -1.0) + noise(rng), noise(rng)});
    y.push_back(positive ? 1 : 0);
  }
  const LogisticModel model = FitLogistic(x, y, 2);
  for (std::size_t i = 0; i < x.size(); ++i) {
    const Eigen::VectorXd p = model.Probabilities(x[i]);
    EXPECT_GT(p[static_cast<Eigen::Index>(y[i])], 0.5);
  }
}

TEST(Logistic, ZeroIterationsGiveUniformProbabilities) {
  std::vector<RuleFeatureVector> x = {{0.2, 0.3}, {0.9, 0.1}, {0.5, 0.5}};
  std::vector<std::size_t> y = {0, 1, 2};
  LogisticConfig config;
  config.max_iters = 0;
  const LogisticModel model = FitLogistic(x, y, 3, config);
  for (const auto& v : x) {
    const Eigen::VectorXd p = model.Probabilities(v);
    for (Eigen::Index c = 0; c < 3; ++c) EXPECT_NEAR(p[c], 1.0 / 3, 1e-12);
  }
  std::vector<RuleFeatureVector> two = {{0.2}, {0.7}};
  std::vector<std::size_t> labels = {0, 1};
  const auto scores = AnomalyScores(FitLogistic(two, labels, 2, config), two, labels);
  for (double s : scores) EXPECT_NEAR(s, 0.5, 1e-12);
}

TEST(Logistic, SingleClassIsDegenerate) {
  std::vector<RuleFeatureVector> x = {{0.1}, {0.4}, {0.8}};
  std::vector<std::size_t> y = {1, 1, 1};
  const LogisticModel model = FitLogistic(x, y, 2);
  EXPECT_TRUE(model.degenerate());
  for (double s : AnomalyScores(model, x, y)) EXPECT_EQ(s, 0.0);
}

TEST(Logistic, PlantedOutlierRanksFirst) {
  const auto f = testing::PlantedOutlier();
  const LogisticModel model = FitLogistic(f.features, f.labels, 2);
  const auto scores = AnomalyScores(model, f.features, f.labels);
  const auto top = std::max_element(scores.begin(), scores.end()) - scores.begin();
  EXPECT_EQ(static_cast<std::size_t>(top), f.planted);
  for (double s : scores) {
    EXPECT_GE(s, 0.0);
    EXPECT_LE(s, 1.0);
  }
}

TEST(Logistic, RejectsMismatchedInput) {
  std::vector<RuleFeatureVector> x = {{0.1}, {0.4}};
  std::vector<std::size_t> y = {0};
  EXPECT_THROW(FitLogistic(x, y, 2), ValidationError);
}

}  // namespace
}  // namespace rulescope
