#include <gtest/gtest.h>
#include <sys/wait.h>

#include <cstdlib>
#include <fstream>

#include "json.hpp"
#include "test_util.h"

namespace rulescope {
namespace {

using nlohmann::json;

int RunCli(const std::string& args, const std::string& log = "/dev/null") {
  const std::string command = std::string(RULESCOPE_CLI) + " " + args + " > " + log + " 2>&1";
  const int status = std::system(command.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string Slurp(const std::string& path) {
  std::ifstream in(path);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::string Inputs(const char* dataset, const char* model) {
  const auto f = testing::Fixture(dataset, model);
  std::string args = " --model " + f.model + " --schema " + f.schema + " --data " + f.data;
  if (std::string(model) == "gbt") args += " --format gbt-text";
  return args;
}

TEST(Cli, ExtractWritesEveryRule) {
  const auto f = testing::Fixture("multiclass", "rf");
  const std::string out = testing::WriteTemp("rules.json", "");
  ASSERT_EQ(RunCli("extract --model " + f.model + " --schema " + f.schema + " --out " + out), 0);
  const json doc = json::parse(Slurp(out));
  const auto a = testing::LoadFixture("multiclass", "rf");
  EXPECT_EQ(doc["num_rules"].get<std::size_t>(), a->rules.size());
  EXPECT_EQ(doc["rules"].size(), a->rules.size());
}

TEST(Cli, BadInputsExitOne) {
  const auto f = testing::Fixture("multiclass", "rf");
  const std::string broken = testing::WriteTemp("broken.json", "{\"trees\": [");
  EXPECT_EQ(RunCli("extract --model " + broken + " --schema " + f.schema), 1);
  const auto credit = testing::Fixture("credit", "rf");
  EXPECT_EQ(RunCli("extract --model " + f.model + " --schema " + credit.schema), 1);
  EXPECT_EQ(RunCli("reduce --model " + f.model + " --schema " + f.schema + " --data " + f.data +
                " --m 0"),
            1);
  EXPECT_EQ(RunCli("reduce --xi 0.1 --grid" + Inputs("multiclass", "rf")), 1);
  EXPECT_EQ(RunCli("evaluate --seed -3" + Inputs("multiclass", "rf")), 1);
  EXPECT_EQ(RunCli("frobnicate"), 1);
  EXPECT_EQ(RunCli("serve --port 0 --model " + f.model + " --schema " + credit.schema + " --data " +
                f.data),
            1);
}

TEST(Cli, ReduceReportIsDeterministic) {
  const std::string first = testing::WriteTemp("report1.json", "");
  const std::string second = testing::WriteTemp("report2.json", "");
  const std::string args = "reduce --m 12 --xi 0.3 --lambda 0.1" + Inputs("multiclass", "gbt");
  ASSERT_EQ(RunCli(args + " --report " + first), 0);
  ASSERT_EQ(RunCli(args + " --report " + second), 0);
  json a = json::parse(Slurp(first));
  json b = json::parse(Slurp(second));
  for (const char* key : {"fidelity_train", "fidelity_test", "average_anomaly_score", "xi",
                          "lambda", "selected_rules", "m", "num_rules", "wall_time_seconds"}) {
    EXPECT_TRUE(a.contains(key)) << key;
  }
  EXPECT_LE(a["selected_rules"].size(), 12u);
  EXPECT_EQ(a["xi"], 0.3);
  a.erase("wall_time_seconds");
  b.erase("wall_time_seconds");
  a.erase("load_seconds");
  b.erase("load_seconds");
  EXPECT_EQ(a, b);
}

TEST(Cli, EvaluateIsReproducible) {
  const std::string first = testing::WriteTemp("eval1.json", "");
  const std::string second = testing::WriteTemp("eval2.json", "");
  const std::string args = "evaluate --m 12 --trials 2 --seed 9 --baselines random" +
                           Inputs("multiclass", "gbt");
  ASSERT_EQ(RunCli(args + " --report " + first), 0);
  ASSERT_EQ(RunCli(args + " --report " + second), 0);
  const json a = json::parse(Slurp(first));
  const json b = json::parse(Slurp(second));
  EXPECT_EQ(a["methods"]["random"], b["methods"]["random"]);
  EXPECT_EQ(a["methods"]["rulescope"]["mean_fidelity_test"],
            b["methods"]["rulescope"]["mean_fidelity_test"]);
  EXPECT_EQ(a["trials"], 2);
  EXPECT_EQ(a["methods"]["random"]["runs"].size(), 2u);
}

}  // namespace
}  // namespace rulescope
