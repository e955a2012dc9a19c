#include "rulescope/analysis.h"

#include <numeric>

#include "rulescope/error.h"

namespace rulescope {

Analysis::Analysis(DatasetSchema schema_in, SampleTable samples_in, TreeEnsemble ensemble_in)
    : schema(std::move(schema_in)),
      samples(std::move(samples_in)),
      ensemble(std::move(ensemble_in)),
      layout(schema) {}

ProblemInputs Analysis::inputs() const {
  ProblemInputs in;
  in.ensemble = &ensemble;
  in.rules = rules;
  in.coverage = &coverage;
  in.scores = scores;
  in.predictions = predictions;
  in.base_scores = ensemble.base_scores;
  in.num_classes = schema.num_classes();
  return in;
}

std::vector<RuleId> Analysis::AllRuleIds() const {
  std::vector<RuleId> ids(rules.size());
  std::iota(ids.begin(), ids.end(), RuleId{0});
  return ids;
}

std::vector<std::size_t> Analysis::AllRows() const {
  std::vector<std::size_t> rows(samples.num_rows());
  std::iota(rows.begin(), rows.end(), std::size_t{0});
  return rows;
}

std::shared_ptr<const Analysis> BuildAnalysis(DatasetSchema schema, SampleTable samples,
                                              TreeEnsemble ensemble,
                                              const LogisticConfig& config) {
  if (samples.num_attributes() != schema.num_attributes()) {
    throw ValidationError("sample table does not match the schema");
  }
  auto analysis = std::make_shared<Analysis>(std::move(schema), std::move(samples),
                                             std::move(ensemble));
  Analysis& a = *analysis;
  if (a.ensemble.base_scores.empty()) a.ensemble.base_scores.assign(a.schema.num_classes(), 0.0);
  a.rules = ExtractRules(a.ensemble, a.schema);
  a.maps = QuantileMaps::Build(a.samples, a.schema);
  a.warnings = a.maps.warnings();
  a.features = VectorizeRules(a.rules, a.schema, a.maps);

  std::vector<std::size_t> labels;
  labels.reserve(a.rules.size());
  for (const Rule& rule : a.rules) labels.push_back(rule.label);
  a.logistic = FitLogistic(a.features, labels, a.schema.num_classes(), config);
  if (a.logistic.degenerate()) {
    a.warnings.push_back("every rule predicts the same class; anomaly scores are all 0");
  } else if (!a.logistic.converged()) {
    a.warnings.push_back("logistic regression stopped after " +
                         std::to_string(a.logistic.iterations()) + " iterations without converging");
  }
  a.scores = AnomalyScores(a.logistic, a.features, labels);

  a.coverage = CoverageIndex::Build(a.rules, a.samples);
  a.predictions.reserve(a.samples.num_rows());
  for (std::size_t row = 0; row < a.samples.num_rows(); ++row) {
    a.predictions.push_back(PredictOriginal(a.ensemble, a.samples.row(row)));
  }
  return analysis;
}

std::shared_ptr<const Analysis> LoadAnalysis(const std::filesystem::path& schema_path,
                                             const std::filesystem::path& data_path,
                                             const std::filesystem::path& model_path,
                                             ModelFormat format, const LogisticConfig& config) {
  DatasetSchema schema = LoadSchema(schema_path);
  SampleTable samples = LoadSamples(data_path, schema);
  TreeEnsemble ensemble = ParseEnsemble(model_path, format, schema);
  return BuildAnalysis(std::move(schema), std::move(samples), std::move(ensemble), config);
}

}  // namespace rulescope
