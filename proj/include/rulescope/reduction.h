#ifndef RULESCOPE_REDUCTION_H_
#define RULESCOPE_REDUCTION_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <vector>

#include "rulescope/lp_solver.h"
#include "rulescope/rule.h"
#include "rulescope/sample_table.h"

namespace rulescope {

// Cover relation between rules and sample rows, in both directions.
class CoverageIndex {
 public:
  CoverageIndex() = default;
  static CoverageIndex Build(std::span<const Rule> rules, const SampleTable& samples);

  std::size_t num_rules() const { return by_rule_.size(); }
  std::size_t num_samples() const { return by_sample_.size(); }
  // Ascending rule ids covering a sample row.
  std::span<const RuleId> rules_covering(std::size_t row) const { return by_sample_.at(row); }
  // Ascending sample rows covered by a rule.
  std::span<const std::size_t> samples_covered(RuleId rule) const { return by_rule_.at(rule); }
  bool Covers(RuleId rule, std::size_t row) const;

 private:
  std::vector<std::vector<RuleId>> by_sample_;
  std::vector<std::vector<std::size_t>> by_rule_;
};

// One instance of the subset-selection problem over a candidate rule set.
// Rules and samples are indexed locally: rule j is candidates[j], sample i
// is rows[i].
struct ReductionProblem {
  std::size_t num_classes = 2;
  std::vector<double> base_scores;  // per class; zeros for forests

  std::vector<RuleId> candidates;
  std::vector<std::size_t> rule_labels;
  std::vector<double> rule_weights;
  std::vector<double> scores;  // anomaly score per candidate
  std::vector<std::size_t> forced;  // local indices fixed to z = 1

  std::vector<std::size_t> rows;
  std::vector<std::size_t> sample_labels;        // original model prediction
  std::vector<std::vector<std::size_t>> covers;  // per sample: local rule indices

  std::size_t budget = 80;
  double xi = 0.1;
  double lambda = 0.0;
  // Vote scores are divided by this before the margin is taken, so xi is
  // measured in units of it. 1 keeps raw vote units.
  double score_scale = 1.0;

  std::size_t num_rules() const { return candidates.size(); }
  std::size_t num_samples() const { return rows.size(); }
  void Validate() const;
};

struct ProblemInputs {
  const TreeEnsemble* ensemble = nullptr;  // needed for margin normalization
  std::span<const Rule> rules;  // global rule list, indexed by id
  const CoverageIndex* coverage = nullptr;
  std::span<const double> scores;             // by global rule id
  std::span<const std::size_t> predictions;   // original prediction by sample row
  std::span<const double> base_scores;
  std::size_t num_classes = 2;
};

ReductionProblem MakeProblem(const ProblemInputs& inputs, std::span<const RuleId> candidates,
                             std::span<const std::size_t> rows, std::size_t budget,
                             std::span<const RuleId> forced = {});

// yhat_c = (base_c + sum over covering rules j labelled c of z_j * w_j) / score_scale.
std::vector<double> VoteScores(const ReductionProblem& problem, std::span<const double> z,
                               std::size_t sample);

double HingeLoss(std::span<const double> yhat, std::size_t label, double xi);

// (1/n) sum_i hinge_i - (lambda / M) sum_j z_j s_j.
double Objective(const ReductionProblem& problem, std::span<const double> z);

struct LpRelaxation {
  std::vector<double> z;
  double objective = 0.0;   // LP objective, equals Objective(problem, z)
  double dual_bound = 0.0;
  std::size_t iterations = 0;
};

// Mean margin of the original model (winning raw score minus the best other
// class) over `rows`; 1 when that mean is not positive.
double MeanOriginalMargin(const TreeEnsemble& ensemble, const SampleTable& samples,
                          std::span<const std::size_t> rows);

lp::Problem BuildLp(const ReductionProblem& problem);
LpRelaxation SolveLpRelaxation(const ReductionProblem& problem,
                               const lp::Options& options = {});

// Local indices of the chosen rules, ascending. Forced rules are always in;
// the rest are the largest z (ties: higher score, then lower index), at most
// budget - |forced| of them, never with z = 0.
std::vector<std::size_t> RoundSelection(std::span<const double> z,
                                        std::span<const double> scores, std::size_t budget,
                                        std::span<const std::size_t> forced = {});

// Fraction of rows whose vote over `selected` reproduces `predictions`.
double Fidelity(std::span<const Rule> rules, const CoverageIndex& coverage,
                std::span<const RuleId> selected, std::span<const std::size_t> rows,
                std::span<const std::size_t> predictions, std::span<const double> base_scores,
                std::size_t num_classes);

double AverageAnomalyScore(std::span<const RuleId> selected, std::span<const double> scores);

struct RuleStats {
  std::size_t coverage = 0;      // covered training rows
  double confidence = 0.0;       // share of covered labelled rows matching the rule label
  bool zero_coverage = false;
};

RuleStats ComputeRuleStats(const Rule& rule, const CoverageIndex& coverage,
                           const SampleTable& samples);

// One grid cell: a rounded selection and its training fidelity.
struct CellResult {
  std::vector<RuleId> selection;
  double fidelity = 0.0;
  double objective = 0.0;
  std::vector<double> z;
};

using CellEvaluator = std::function<CellResult(double xi, double lambda)>;

struct GridOptions {
  std::vector<double> xi_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  std::vector<double> lambda_values{0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0};
  double fidelity_band = 0.01;
  std::optional<double> fixed_xi;
  std::optional<double> fixed_lambda;
};

struct GridTrace {
  double xi = 0.0;
  double lambda = 0.0;
  double fidelity = 0.0;
};

struct GridResult {
  double xi = 0.0;
  double lambda = 0.0;
  double stage1_fidelity = 0.0;
  CellResult cell;
  std::vector<GridTrace> trace;
};

// Stage 1 sweeps xi at lambda = 0 keeping the best fidelity (ties: smaller
// xi). Stage 2 keeps the largest lambda within the fidelity band of stage 1.
GridResult GridSearch(const CellEvaluator& evaluate, const GridOptions& options = {});

struct ReduceOptions {
  std::size_t budget = 80;
  // Measure xi relative to the original model's mean training margin rather
  // than in raw vote units.
  bool normalize_margin = true;
  GridOptions grid;
  lp::Options lp;
};

struct Selection {
  std::vector<RuleId> rules;  // ascending global ids
  std::vector<double> z;      // fractional solution over the candidates
  std::vector<RuleId> candidates;
  double objective = 0.0;
  double xi = 0.0;
  double lambda = 0.0;
  double score_scale = 1.0;
  double fidelity_train = 1.0;
  double fidelity_test = 1.0;
  double average_anomaly_score = 0.0;
  bool reduced = false;  // false when the candidates already fit the budget
};

// Selects at most max(budget, |forced|) rules of `candidates`, tuned on the
// training rows of `rows`. Throws ValidationError when no training row is
// covered.
Selection Reduce(const ProblemInputs& inputs, const SampleTable& samples,
                 std::span<const RuleId> candidates, std::span<const std::size_t> rows,
                 const ReduceOptions& options, std::span<const RuleId> forced = {});

// Uniformly random subset of `count` candidates, ascending.
std::vector<RuleId> RandomSelection(std::span<const RuleId> candidates, std::size_t count,
                                    std::uint64_t seed);

}  // namespace rulescope

#endif  // RULESCOPE_REDUCTION_H_
