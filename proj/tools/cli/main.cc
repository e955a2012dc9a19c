#include <chrono>
#include <cstdint>
#include <fstream>
#include <iostream>
#include <random>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "rulescope/analysis.h"
#include "rulescope/error.h"
#include "rulescope/rule.h"
#include "rulescope/service.h"

namespace {

using nlohmann::json;
using rulescope::Analysis;

struct ModelArgs {
  std::string model;
  std::string data;
  std::string schema;
  std::string format = "json";
};

rulescope::ModelFormat ToFormat(const std::string& name) {
  return name == "gbt-text" ? rulescope::ModelFormat::kGbtText
                            : rulescope::ModelFormat::kJsonInterchange;
}

void AddModelOptions(CLI::App* cmd, ModelArgs& args, bool with_data) {
  cmd->add_option("--model", args.model, "Tree ensemble file")->required();
  cmd->add_option("--schema", args.schema, "Schema JSON")->required();
  if (with_data) cmd->add_option("--data", args.data, "Sample CSV")->required();
  cmd->add_option("--format", args.format, "Model format")
      ->check(CLI::IsMember({"json", "gbt-text"}));
}

std::shared_ptr<const Analysis> Load(const ModelArgs& args) {
  auto analysis = rulescope::LoadAnalysis(args.schema, args.data, args.model, ToFormat(args.format));
  for (const std::string& warning : analysis->warnings) std::cerr << "warning: " << warning << "\n";
  return analysis;
}

void WriteJson(const json& doc, const std::string& path) {
  if (path.empty() || path == "-") {
    std::cout << doc.dump(2) << "\n";
    return;
  }
  std::ofstream out(path);
  if (!out) throw rulescope::ParseError(path, "cannot open output file");
  out << doc.dump(2) << "\n";
}

double Seconds(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

int RunExtract(const ModelArgs& args, const std::string& out) {
  const rulescope::DatasetSchema schema = rulescope::LoadSchema(args.schema);
  const rulescope::TreeEnsemble ensemble =
      rulescope::ParseEnsemble(args.model, ToFormat(args.format), schema);
  const std::vector<rulescope::Rule> rules = rulescope::ExtractRules(ensemble, schema);
  json doc = {{"num_rules", rules.size()}, {"rules", json::array()}};
  for (const rulescope::Rule& rule : rules) doc["rules"].push_back(rulescope::RuleToJson(rule, schema));
  WriteJson(doc, out);
  std::cout << rules.size() << " rules\n";
  return 0;
}

rulescope::ReduceOptions MakeReduceOptions(std::size_t m, bool raw_margin) {
  rulescope::ReduceOptions options;
  options.budget = m;
  options.normalize_margin = !raw_margin;
  return options;
}

json SelectionJson(const rulescope::Selection& s) {
  return {{"fidelity_train", s.fidelity_train},
          {"fidelity_test", std::isnan(s.fidelity_test) ? json() : json(s.fidelity_test)},
          {"average_anomaly_score", s.average_anomaly_score},
          {"xi", s.xi},
          {"lambda", s.lambda},
          {"score_scale", s.score_scale},
          {"objective", s.objective},
          {"reduced", s.reduced},
          {"selected_rules", s.rules}};
}

int RunReduce(const ModelArgs& args, std::size_t m, std::optional<double> xi,
              std::optional<double> lambda, bool raw_margin, const std::string& report) {
  const auto start = std::chrono::steady_clock::now();
  const auto analysis = Load(args);
  rulescope::ReduceOptions options = MakeReduceOptions(m, raw_margin);
  options.grid.fixed_xi = xi;
  options.grid.fixed_lambda = lambda;
  const auto load_time = Seconds(start);
  const rulescope::Selection selection =
      rulescope::Reduce(analysis->inputs(), analysis->samples, analysis->AllRuleIds(),
                        analysis->AllRows(), options);
  json doc = SelectionJson(selection);
  doc["m"] = m;
  doc["num_rules"] = analysis->rules.size();
  doc["grid"] = !xi || !lambda;
  doc["load_seconds"] = load_time;
  doc["wall_time_seconds"] = Seconds(start);
  WriteJson(doc, report);
  return 0;
}

int RunEvaluate(const ModelArgs& args, std::size_t m, std::size_t trials, std::uint64_t seed,
                bool raw_margin, const std::string& report) {
  if (trials == 0) throw rulescope::ValidationError("--trials must be positive");
  const auto analysis = Load(args);
  const auto ids = analysis->AllRuleIds();
  const auto test_rows = analysis->samples.RowsInSplit(rulescope::Split::kTest);
  const auto train_rows = analysis->samples.RowsInSplit(rulescope::Split::kTrain);

  const auto start = std::chrono::steady_clock::now();
  const rulescope::Selection ours = rulescope::Reduce(
      analysis->inputs(), analysis->samples, ids, analysis->AllRows(), MakeReduceOptions(m, raw_margin));
  const double ours_seconds = Seconds(start);

  const auto fidelity = [&](const std::vector<rulescope::RuleId>& selected,
                            const std::vector<std::size_t>& rows) -> json {
    if (rows.empty()) return nullptr;
    return rulescope::Fidelity(analysis->rules, analysis->coverage, selected, rows,
                               analysis->predictions, analysis->ensemble.base_scores,
                               analysis->ensemble.num_classes);
  };

  std::mt19937_64 seeds(seed);
  json random_trials = json::array();
  double sum_fidelity = 0.0;
  double sum_anomaly = 0.0;
  for (std::size_t t = 0; t < trials; ++t) {
    const std::uint64_t trial_seed = seeds();
    const auto selected = rulescope::RandomSelection(ids, std::min(m, ids.size()), trial_seed);
    const json f_test = fidelity(selected, test_rows);
    const double anomaly = rulescope::AverageAnomalyScore(selected, analysis->scores);
    random_trials.push_back({{"seed", trial_seed},
                             {"fidelity_train", fidelity(selected, train_rows)},
                             {"fidelity_test", f_test},
                             {"average_anomaly_score", anomaly}});
    if (!f_test.is_null()) sum_fidelity += f_test.get<double>();
    sum_anomaly += anomaly;
  }
  const double n = static_cast<double>(trials);
  json ours_json = SelectionJson(ours);
  ours_json["wall_time_seconds"] = ours_seconds;
  json doc = {{"m", m},
              {"seed", seed},
              {"trials", trials},
              {"methods",
               {{"rulescope", {{"mean_fidelity_test", ours_json["fidelity_test"]},
                               {"mean_average_anomaly_score", ours.average_anomaly_score},
                               {"runs", json::array({ours_json})}}},
                {"random", {{"mean_fidelity_test", test_rows.empty() ? json() : json(sum_fidelity / n)},
                            {"mean_average_anomaly_score", sum_anomaly / n},
                            {"runs", random_trials}}}}}};
  WriteJson(doc, report);
  return 0;
}

int RunServe(const ModelArgs& args, std::size_t m, const std::string& host, int port,
             const std::string& origin) {
  rulescope::ServiceOptions options;
  options.hierarchy.reduce.budget = m;
  rulescope::Service service(options);
  service.Preload(Load(args));
  rulescope::HttpServer server(service, origin);
  if (!server.Bind(host, port)) {
    std::cerr << "error: cannot listen on " << host << ":" << port << "\n";
    return 1;
  }
  std::cout << "listening on http://" << host << ":" << port << "\n" << std::flush;
  return server.Listen() ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rule-based exploration of tree ensembles"};
  app.require_subcommand(1);

  ModelArgs extract_args;
  std::string extract_out;
  CLI::App* extract = app.add_subcommand("extract", "Write every rule of a model as JSON");
  AddModelOptions(extract, extract_args, false);
  extract->add_option("--out", extract_out, "Output file")->required();

  ModelArgs reduce_args;
  std::size_t reduce_m = 80;
  std::optional<double> xi;
  std::optional<double> lambda;
  bool grid = false;
  bool reduce_raw = false;
  std::string reduce_report;
  CLI::App* reduce = app.add_subcommand("reduce", "Select a representative rule subset");
  AddModelOptions(reduce, reduce_args, true);
  reduce->add_option("--m", reduce_m, "Rule budget")->check(CLI::PositiveNumber);
  auto* xi_opt = reduce->add_option("--xi", xi, "Fixed margin")->check(CLI::NonNegativeNumber);
  auto* lambda_opt =
      reduce->add_option("--lambda", lambda, "Fixed anomaly weight")->check(CLI::NonNegativeNumber);
  auto* grid_flag = reduce->add_flag("--grid", grid, "Two-stage grid search (default)");
  grid_flag->excludes(xi_opt)->excludes(lambda_opt);
  reduce->add_flag("--raw-margin", reduce_raw, "Measure xi in raw vote units");
  reduce->add_option("--report", reduce_report, "Report file (stdout if omitted)");

  ModelArgs eval_args;
  std::size_t eval_m = 80;
  std::size_t trials = 5;
  std::uint64_t seed = 0;
  std::string baselines = "random";
  bool eval_raw = false;
  std::string eval_report;
  CLI::App* evaluate = app.add_subcommand("evaluate", "Compare the reducer with random subsets");
  AddModelOptions(evaluate, eval_args, true);
  evaluate->add_option("--m", eval_m, "Rule budget")->check(CLI::PositiveNumber);
  evaluate->add_option("--baselines", baselines, "Baselines")->check(CLI::IsMember({"random"}));
  evaluate->add_option("--trials", trials, "Random trials")->check(CLI::PositiveNumber);
  evaluate->add_option("--seed", seed, "Seed for the random baseline");
  evaluate->add_flag("--raw-margin", eval_raw, "Measure xi in raw vote units");
  evaluate->add_option("--report", eval_report, "Report file (stdout if omitted)");

  ModelArgs serve_args;
  std::size_t serve_m = 80;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::string origin = "*";
  CLI::App* serve = app.add_subcommand("serve", "Run the HTTP API");
  AddModelOptions(serve, serve_args, true);
  serve->add_option("--m", serve_m, "Rule budget")->check(CLI::PositiveNumber);
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port")->check(CLI::Range(0, 65535));
  serve->add_option("--cors-origin", origin, "Allowed CORS origin");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*extract) return RunExtract(extract_args, extract_out);
    if (*reduce) {
      return RunReduce(reduce_args, reduce_m, grid ? std::nullopt : xi, grid ? std::nullopt : lambda,
                       reduce_raw, reduce_report);
    }
    if (*evaluate) return RunEvaluate(eval_args, eval_m, trials, seed, eval_raw, eval_report);
    if (*serve) return RunServe(serve_args, serve_m, host, port, origin);
  } catch (const rulescope::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
