#ifndef RULESCOPE_ANALYSIS_H_
#define RULESCOPE_ANALYSIS_H_

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "rulescope/anomaly.h"
#include "rulescope/ensemble.h"
#include "rulescope/features.h"
#include "rulescope/reduction.h"
#include "rulescope/rule.h"
#include "rulescope/sample_table.h"
#include "rulescope/schema.h"

namespace rulescope {

// Everything derived once per model: rules, feature vectors, anomaly scores,
// coverage and the original model's predictions. Immutable after Build.
struct Analysis {
  DatasetSchema schema;
  SampleTable samples;
  TreeEnsemble ensemble;
  std::vector<Rule> rules;
  QuantileMaps maps;
  FeatureLayout layout;
  std::vector<RuleFeatureVector> features;
  LogisticModel logistic;
  std::vector<double> scores;
  CoverageIndex coverage;
  std::vector<std::size_t> predictions;  // original model, per sample row
  std::vector<std::string> warnings;

  Analysis(DatasetSchema schema_in, SampleTable samples_in, TreeEnsemble ensemble_in);

  ProblemInputs inputs() const;
  std::vector<RuleId> AllRuleIds() const;
  std::vector<std::size_t> AllRows() const;
};

std::shared_ptr<const Analysis> BuildAnalysis(DatasetSchema schema, SampleTable samples,
                                              TreeEnsemble ensemble,
                                              const LogisticConfig& config = {});

std::shared_ptr<const Analysis> LoadAnalysis(const std::filesystem::path& schema_path,
                                             const std::filesystem::path& data_path,
                                             const std::filesystem::path& model_path,
                                             ModelFormat format,
                                             const LogisticConfig& config = {});

}  // namespace rulescope

#endif  // RULESCOPE_ANALYSIS_H_
