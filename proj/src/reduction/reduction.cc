#include "rulescope/reduction.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <unordered_map>

#include "rulescope/error.h"

namespace rulescope {

CoverageIndex CoverageIndex::Build(std::span<const Rule> rules, const SampleTable& samples) {
  CoverageIndex index;
  index.by_rule_.resize(rules.size());
  index.by_sample_.resize(samples.num_rows());
  for (std::size_t j = 0; j < rules.size(); ++j) {
    if (rules[j].id != j) throw ValidationError("rule ids must equal their positions");
    for (std::size_t row = 0; row < samples.num_rows(); ++row) {
      if (rules[j].Covers(samples.row(row))) {
        index.by_rule_[j].push_back(row);
        index.by_sample_[row].push_back(j);
      }
    }
  }
  return index;
}

bool CoverageIndex::Covers(RuleId rule, std::size_t row) const {
  const auto& rows = by_rule_.at(rule);
  return std::binary_search(rows.begin(), rows.end(), row);
}

void ReductionProblem::Validate() const {
  const std::size_t m = num_rules();
  if (num_classes < 2) throw ValidationError("reduction needs at least two classes");
  if (base_scores.size() != num_classes) throw ValidationError("base score size mismatch");
  if (rule_labels.size() != m || rule_weights.size() != m || scores.size() != m) {
    throw ValidationError("rule attribute arrays do not match the candidate count");
  }
  if (sample_labels.size() != num_samples() || covers.size() != num_samples()) {
    throw ValidationError("sample arrays do not match the row count");
  }
  if (budget < 1) throw ValidationError("budget M must be at least 1");
  if (!(xi >= 0.0) || !(lambda >= 0.0)) throw ValidationError("xi and lambda must be non-negative");
  if (!(score_scale > 0.0) || !std::isfinite(score_scale)) {
    throw ValidationError("score scale must be positive and finite");
  }
  for (std::size_t label : rule_labels) {
    if (label >= num_classes) throw ValidationError("rule label out of range");
  }
  for (std::size_t label : sample_labels) {
    if (label >= num_classes) throw ValidationError("sample label out of range");
  }
  for (std::size_t j : forced) {
    if (j >= m) throw ValidationError("forced rule out of range");
  }
}

ReductionProblem MakeProblem(const ProblemInputs& inputs, std::span<const RuleId> candidates,
                             std::span<const std::size_t> rows, std::size_t budget,
                             std::span<const RuleId> forced) {
  if (inputs.coverage == nullptr) throw ValidationError("coverage index missing");
  ReductionProblem problem;
  problem.num_classes = inputs.num_classes;
  problem.base_scores.assign(inputs.base_scores.begin(), inputs.base_scores.end());
  if (problem.base_scores.empty()) problem.base_scores.assign(inputs.num_classes, 0.0);
  problem.budget = budget;

  std::unordered_map<RuleId, std::size_t> local;
  for (RuleId id : candidates) {
    if (id >= inputs.rules.size()) throw ValidationError("unknown rule id " + std::to_string(id));
    if (!local.emplace(id, problem.candidates.size()).second) {
      throw ValidationError("duplicate candidate rule " + std::to_string(id));
    }
    problem.candidates.push_back(id);
    problem.rule_labels.push_back(inputs.rules[id].label);
    problem.rule_weights.push_back(inputs.rules[id].weight);
    problem.scores.push_back(inputs.scores[id]);
  }
  for (RuleId id : forced) {
    const auto it = local.find(id);
    if (it == local.end()) throw ValidationError("forced rule " + std::to_string(id) + " is not a candidate");
    problem.forced.push_back(it->second);
  }
  for (std::size_t row : rows) {
    problem.rows.push_back(row);
    problem.sample_labels.push_back(inputs.predictions[row]);
    std::vector<std::size_t> covering;
    for (RuleId id : inputs.coverage->rules_covering(row)) {
      const auto it = local.find(id);
      if (it != local.end()) covering.push_back(it->second);
    }
    problem.covers.push_back(std::move(covering));
  }
  problem.Validate();
  return problem;
}

std::vector<double> VoteScores(const ReductionProblem& problem, std::span<const double> z,
                               std::size_t sample) {
  if (z.size() != problem.num_rules()) throw ValidationError("z has the wrong dimension");
  std::vector<double> yhat = problem.base_scores;
  for (std::size_t j : problem.covers.at(sample)) {
    yhat[problem.rule_labels[j]] += z[j] * problem.rule_weights[j];
  }
  for (double& v : yhat) v /= problem.score_scale;
  return yhat;
}

double HingeLoss(std::span<const double> yhat, std::size_t label, double xi) {
  if (yhat.size() < 2 || label >= yhat.size()) throw ValidationError("invalid score vector");
  double rival = -std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < yhat.size(); ++c) {
    if (c != label) rival = std::max(rival, yhat[c]);
  }
  return std::max(xi - (yhat[label] - rival), 0.0);
}

double Objective(const ReductionProblem& problem, std::span<const double> z) {
  double hinge = 0.0;
  for (std::size_t i = 0; i < problem.num_samples(); ++i) {
    hinge += HingeLoss(VoteScores(problem, z, i), problem.sample_labels[i], problem.xi);
  }
  if (problem.num_samples() > 0) hinge /= static_cast<double>(problem.num_samples());
  double bonus = 0.0;
  for (std::size_t j = 0; j < problem.num_rules(); ++j) bonus += z[j] * problem.scores[j];
  return hinge - problem.lambda / static_cast<double>(problem.budget) * bonus;
}

double MeanOriginalMargin(const TreeEnsemble& ensemble, const SampleTable& samples,
                          std::span<const std::size_t> rows) {
  double total = 0.0;
  for (std::size_t row : rows) {
    const std::vector<double> raw = RawScores(ensemble, samples.row(row));
    const std::size_t winner = ArgMax(raw);
    double rival = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < raw.size(); ++c) {
      if (c != winner) rival = std::max(rival, raw[c]);
    }
    total += raw[winner] - rival;
  }
  const double mean = rows.empty() ? 0.0 : total / static_cast<double>(rows.size());
  return mean > 0.0 && std::isfinite(mean) ? mean : 1.0;
}

lp::Problem BuildLp(const ReductionProblem& problem) {
  problem.Validate();
  const std::size_t m = problem.num_rules();
  const std::size_t n = problem.num_samples();
  lp::Problem lp;
  std::vector<bool> is_forced(m, false);
  for (std::size_t j : problem.forced) is_forced[j] = true;
  const double bonus = problem.lambda / static_cast<double>(problem.budget);
  for (std::size_t j = 0; j < m; ++j) {
    lp.AddVariable(-bonus * problem.scores[j], is_forced[j] ? 1.0 : 0.0, 1.0);
  }
  const double inv_n = n > 0 ? 1.0 / static_cast<double>(n) : 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t slack = lp.AddVariable(inv_n, 0.0, lp::kInfinity);
    const std::size_t label = problem.sample_labels[i];
    for (std::size_t c = 0; c < problem.num_classes; ++c) {
      if (c == label) continue;
      const double inv_scale = 1.0 / problem.score_scale;
      const double rhs =
          problem.xi - (problem.base_scores[label] - problem.base_scores[c]) * inv_scale;
      lp::Row row;
      row.type = lp::RowType::kGreaterEqual;
      row.rhs = rhs;
      row.terms.emplace_back(slack, 1.0);
      for (std::size_t j : problem.covers[i]) {
        const std::size_t rule_label = problem.rule_labels[j];
        if (rule_label == label) {
          row.terms.emplace_back(j, problem.rule_weights[j] * inv_scale);
        } else if (rule_label == c) {
          row.terms.emplace_back(j, -problem.rule_weights[j] * inv_scale);
        }
      }
      if (row.terms.size() == 1) {
        lp.lower[slack] = std::max(lp.lower[slack], rhs);
      } else {
        lp.rows.push_back(std::move(row));
      }
    }
  }
  lp::Row budget;
  for (std::size_t j = 0; j < m; ++j) {
    if (!is_forced[j]) budget.terms.emplace_back(j, 1.0);
  }
  if (!budget.terms.empty()) {
    budget.rhs = static_cast<double>(problem.budget > problem.forced.size()
                                         ? problem.budget - problem.forced.size()
                                         : 0);
    lp.rows.push_back(std::move(budget));
  }
  return lp;
}

LpRelaxation SolveLpRelaxation(const ReductionProblem& problem, const lp::Options& options) {
  const lp::Problem lp = BuildLp(problem);
  const std::size_t m = problem.num_rules();
  lp::Solution solution;
  try {
    solution = lp::Solve(lp, options);
  } catch (const SolverError& e) {
    std::vector<double> z(e.incumbent().begin(),
                          e.incumbent().begin() + static_cast<std::ptrdiff_t>(
                                                      std::min(m, e.incumbent().size())));
    throw SolverError(e.what(), std::move(z));
  }
  LpRelaxation result;
  result.z.assign(solution.x.begin(), solution.x.begin() + static_cast<std::ptrdiff_t>(m));
  result.objective = solution.objective;
  result.dual_bound = solution.dual_bound;
  result.iterations = solution.iterations;
  return result;
}

std::vector<std::size_t> RoundSelection(std::span<const double> z,
                                        std::span<const double> scores, std::size_t budget,
                                        std::span<const std::size_t> forced) {
  if (scores.size() != z.size()) throw ValidationError("z and scores differ in length");
  std::vector<bool> is_forced(z.size(), false);
  for (std::size_t j : forced) is_forced.at(j) = true;
  // Values closer than 1e-9 count as ties so solver round-off cannot decide.
  auto key = [&](std::size_t j) { return std::llround(z[j] * 1e9); };
  std::vector<std::size_t> order;
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (!is_forced[j] && key(j) > 0) order.push_back(j);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (key(a) != key(b)) return key(a) > key(b);
    if (scores[a] != scores[b]) return scores[a] > scores[b];
    return a < b;
  });
  const std::size_t slots = budget > forced.size() ? budget - forced.size() : 0;
  if (order.size() > slots) order.resize(slots);
  for (std::size_t j = 0; j < z.size(); ++j) {
    if (is_forced[j]) order.push_back(j);
  }
  std::sort(order.begin(), order.end());
  return order;
}

double Fidelity(std::span<const Rule> rules, const CoverageIndex& coverage,
                std::span<const RuleId> selected, std::span<const std::size_t> rows,
                std::span<const std::size_t> predictions, std::span<const double> base_scores,
                std::size_t num_classes) {
  if (rows.empty()) throw ValidationError("fidelity over an empty sample set");
  std::vector<bool> in_selection(rules.size(), false);
  for (RuleId id : selected) in_selection.at(id) = true;
  std::size_t agree = 0;
  std::vector<double> votes(num_classes);
  for (std::size_t row : rows) {
    for (std::size_t c = 0; c < num_classes; ++c) {
      votes[c] = base_scores.empty() ? 0.0 : base_scores[c];
    }
    for (RuleId id : coverage.rules_covering(row)) {
      if (in_selection[id]) votes[rules[id].label] += rules[id].weight;
    }
    if (ArgMax(votes) == predictions[row]) ++agree;
  }
  return static_cast<double>(agree) / static_cast<double>(rows.size());
}

double AverageAnomalyScore(std::span<const RuleId> selected, std::span<const double> scores) {
  if (selected.empty()) throw ValidationError("average anomaly score of an empty selection");
  double sum = 0.0;
  for (RuleId id : selected) sum += scores[id];
  return sum / static_cast<double>(selected.size());
}

RuleStats ComputeRuleStats(const Rule& rule, const CoverageIndex& coverage,
                           const SampleTable& samples) {
  RuleStats stats;
  std::size_t labelled = 0;
  std::size_t correct = 0;
  for (std::size_t row : coverage.samples_covered(rule.id)) {
    if (samples.split(row) != Split::kTrain) continue;
    ++stats.coverage;
    if (samples.label(row) == kNoLabel) continue;
    ++labelled;
    if (static_cast<std::size_t>(samples.label(row)) == rule.label) ++correct;
  }
  stats.zero_coverage = stats.coverage == 0;
  stats.confidence =
      labelled == 0 ? 0.0 : static_cast<double>(correct) / static_cast<double>(labelled);
  return stats;
}

GridResult GridSearch(const CellEvaluator& evaluate, const GridOptions& options) {
  std::vector<double> xis = options.fixed_xi ? std::vector<double>{*options.fixed_xi}
                                             : options.xi_values;
  std::vector<double> lambdas = options.lambda_values;
  std::sort(xis.begin(), xis.end());
  std::sort(lambdas.begin(), lambdas.end());
  if (xis.empty()) throw ValidationError("xi grid is empty");

  GridResult result;
  bool have_stage1 = false;
  for (double xi : xis) {
    CellResult cell = evaluate(xi, 0.0);
    result.trace.push_back({xi, 0.0, cell.fidelity});
    if (!have_stage1 || cell.fidelity > result.cell.fidelity) {
      result.xi = xi;
      result.cell = std::move(cell);
      have_stage1 = true;
    }
  }
  result.stage1_fidelity = result.cell.fidelity;
  result.lambda = 0.0;

  if (options.fixed_lambda) {
    if (*options.fixed_lambda != 0.0) {
      result.lambda = *options.fixed_lambda;
      result.cell = evaluate(result.xi, result.lambda);
      result.trace.push_back({result.xi, result.lambda, result.cell.fidelity});
    }
    return result;
  }
  const double floor = result.stage1_fidelity - options.fidelity_band - 1e-12;
  for (double lambda : lambdas) {
    CellResult cell = evaluate(result.xi, lambda);
    result.trace.push_back({result.xi, lambda, cell.fidelity});
    if (cell.fidelity >= floor) {
      result.lambda = lambda;
      result.cell = std::move(cell);
    }
  }
  return result;
}

Selection Reduce(const ProblemInputs& inputs, const SampleTable& samples,
                 std::span<const RuleId> candidates, std::span<const std::size_t> rows,
                 const ReduceOptions& options, std::span<const RuleId> forced) {
  if (candidates.empty()) throw ValidationError("reduction needs at least one candidate rule");
  std::vector<std::size_t> train_rows;
  std::vector<std::size_t> test_rows;
  for (std::size_t row : rows) {
    (samples.split(row) == Split::kTrain ? train_rows : test_rows).push_back(row);
  }
  if (train_rows.empty()) throw ValidationError("no training sample is covered by the candidate rules");

  Selection selection;
  selection.candidates.assign(candidates.begin(), candidates.end());
  auto fidelity = [&](std::span<const RuleId> chosen, std::span<const std::size_t> over) {
    if (over.empty()) return std::numeric_limits<double>::quiet_NaN();
    return Fidelity(inputs.rules, *inputs.coverage, chosen, over, inputs.predictions,
                    inputs.base_scores, inputs.num_classes);
  };

  if (candidates.size() <= std::max(options.budget, forced.size())) {
    selection.rules = selection.candidates;
    std::sort(selection.rules.begin(), selection.rules.end());
    selection.z.assign(candidates.size(), 1.0);
  } else {
    ReductionProblem problem = MakeProblem(inputs, candidates, train_rows, options.budget, forced);
    if (options.normalize_margin) {
      if (inputs.ensemble == nullptr) throw ValidationError("margin normalization needs the ensemble");
      problem.score_scale = MeanOriginalMargin(*inputs.ensemble, samples, train_rows);
    }
    selection.score_scale = problem.score_scale;
    CellEvaluator evaluate = [&](double xi, double lambda) {
      problem.xi = xi;
      problem.lambda = lambda;
      LpRelaxation relaxation = SolveLpRelaxation(problem, options.lp);
      CellResult cell;
      for (std::size_t j : RoundSelection(relaxation.z, problem.scores, problem.budget,
                                          problem.forced)) {
        cell.selection.push_back(problem.candidates[j]);
      }
      std::sort(cell.selection.begin(), cell.selection.end());
      cell.fidelity = fidelity(cell.selection, train_rows);
      cell.objective = relaxation.objective;
      cell.z = std::move(relaxation.z);
      return cell;
    };
    GridResult grid = GridSearch(evaluate, options.grid);
    selection.rules = std::move(grid.cell.selection);
    selection.z = std::move(grid.cell.z);
    selection.objective = grid.cell.objective;
    selection.xi = grid.xi;
    selection.lambda = grid.lambda;
    selection.reduced = true;
  }
  selection.fidelity_train = fidelity(selection.rules, train_rows);
  selection.fidelity_test = fidelity(selection.rules, test_rows);
  selection.average_anomaly_score =
      selection.rules.empty() ? 0.0 : AverageAnomalyScore(selection.rules, inputs.scores);
  return selection;
}

std::vector<RuleId> RandomSelection(std::span<const RuleId> candidates, std::size_t count,
                                    std::uint64_t seed) {
  std::vector<RuleId> pool(candidates.begin(), candidates.end());
  std::mt19937_64 rng(seed);
  count = std::min(count, pool.size());
  for (std::size_t i = 0; i < count; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, pool.size() - 1);
    std::swap(pool[i], pool[pick(rng)]);
  }
  pool.resize(count);
  std::sort(pool.begin(), pool.end());
  return pool;
}

}  // namespace rulescope
