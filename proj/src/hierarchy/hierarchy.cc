#include "rulescope/hierarchy.h"

#include <algorithm>
#include <limits>
#include <set>
#include <string>

#include "rulescope/error.h"

namespace rulescope {
namespace {

std::shared_ptr<HierarchyLevel> BuildLevel(const Analysis& analysis, std::size_t depth,
                                           std::vector<RuleId> scope_rules,
                                           std::vector<std::size_t> scope_samples,
                                           std::span<const RuleId> selected,
                                           const HierarchyOptions& options) {
  auto level = std::make_shared<HierarchyLevel>();
  level->depth = depth;
  level->scope_rules = std::move(scope_rules);
  level->scope_samples = std::move(scope_samples);
  level->selected.assign(selected.begin(), selected.end());
  std::sort(level->selected.begin(), level->selected.end());

  level->selection = Reduce(analysis.inputs(), analysis.samples, level->scope_rules,
                            level->scope_samples, options.reduce, level->selected);
  level->representatives = level->selection.rules;

  level->weights = AttributeUsageWeights(analysis.rules, level->scope_rules,
                                         analysis.schema.num_attributes());
  const std::vector<double> slots = level->weights.ToSlotWeights(analysis.layout);
  std::vector<RuleId> hidden;
  std::set_difference(level->scope_rules.begin(), level->scope_rules.end(),
                      level->representatives.begin(), level->representatives.end(),
                      std::back_inserter(hidden));
  level->assignment = AssignHidden(analysis, hidden, level->representatives, slots);
  return level;
}

}  // namespace

std::size_t HierarchyLevel::NeighborhoodSize(RuleId representative) const {
  std::size_t size = 1;
  for (const auto& [hidden, rep] : assignment) {
    if (rep == representative) ++size;
  }
  return size;
}

std::vector<RuleId> HierarchyLevel::Neighborhood(std::span<const RuleId> reps) const {
  std::set<RuleId> wanted(reps.begin(), reps.end());
  std::vector<RuleId> out(wanted.begin(), wanted.end());
  for (const auto& [hidden, rep] : assignment) {
    if (wanted.count(rep) != 0) out.push_back(hidden);
  }
  std::sort(out.begin(), out.end());
  return out;
}

nlohmann::json HierarchyLevel::ToJson() const {
  nlohmann::json parent_json = nlohmann::json::object();
  for (const auto& [rule, parent] : parents) {
    parent_json[std::to_string(rule)] = parent ? nlohmann::json(*parent) : nlohmann::json();
  }
  nlohmann::json assignment_json = nlohmann::json::object();
  for (const auto& [hidden, rep] : assignment) assignment_json[std::to_string(hidden)] = rep;
  return {{"depth", depth},
          {"scope_rules", scope_rules},
          {"representatives", representatives},
          {"parents", parent_json},
          {"assignment", assignment_json},
          {"scope_samples", scope_samples},
          {"weights", weights.per_attribute},
          {"selected", selected},
          {"xi", selection.xi},
          {"lambda", selection.lambda}};
}

std::map<RuleId, RuleId> AssignHidden(const Analysis& analysis,
                                      std::span<const RuleId> hidden,
                                      std::span<const RuleId> representatives,
                                      std::span<const double> slot_weights) {
  std::map<RuleId, RuleId> assignment;
  if (hidden.empty()) return assignment;
  if (representatives.empty()) throw ValidationError("cannot assign rules without representatives");
  std::vector<RuleId> reps(representatives.begin(), representatives.end());
  std::sort(reps.begin(), reps.end());
  for (RuleId h : hidden) {
    double best = std::numeric_limits<double>::infinity();
    RuleId nearest = reps.front();
    for (RuleId r : reps) {
      const double d = WeightedDistance(analysis.features[h], analysis.features[r], slot_weights);
      if (d < best) {
        best = d;
        nearest = r;
      }
    }
    assignment.emplace(h, nearest);
  }
  return assignment;
}

std::shared_ptr<const HierarchyLevel> BuildRoot(const Analysis& analysis,
                                                const HierarchyOptions& options) {
  auto level = BuildLevel(analysis, 0, analysis.AllRuleIds(), analysis.AllRows(), {}, options);
  for (RuleId r : level->representatives) level->parents.emplace(r, std::nullopt);
  return level;
}

std::shared_ptr<const HierarchyLevel> ZoomIn(const Analysis& analysis,
                                             const HierarchyLevel& level,
                                             std::span<const RuleId> selected,
                                             const HierarchyOptions& options) {
  if (selected.empty()) throw ValidationError("zoom needs at least one selected rule");
  std::set<RuleId> unique(selected.begin(), selected.end());
  for (RuleId id : unique) {
    if (!std::binary_search(level.representatives.begin(), level.representatives.end(), id)) {
      throw ValidationError("rule " + std::to_string(id) + " is not a representative of the current level");
    }
  }
  const std::vector<RuleId> chosen(unique.begin(), unique.end());
  std::vector<RuleId> neighborhood = level.Neighborhood(chosen);

  std::set<std::size_t> rows;
  for (RuleId id : neighborhood) {
    const auto covered = analysis.coverage.samples_covered(id);
    rows.insert(covered.begin(), covered.end());
  }
  const bool any_train = std::any_of(rows.begin(), rows.end(), [&](std::size_t row) {
    return analysis.samples.split(row) == Split::kTrain;
  });
  if (!any_train) throw ValidationError("the selected neighborhood covers no training sample");

  auto next = BuildLevel(analysis, level.depth + 1, std::move(neighborhood),
                         std::vector<std::size_t>(rows.begin(), rows.end()), chosen, options);
  for (RuleId r : next->representatives) {
    if (unique.count(r) != 0) {
      next->parents.emplace(r, r);
    } else {
      next->parents.emplace(r, level.assignment.at(r));
    }
  }
  return next;
}

Hierarchy::Hierarchy(std::shared_ptr<const Analysis> analysis, HierarchyOptions options)
    : analysis_(std::move(analysis)), options_(std::move(options)) {
  levels_.push_back(BuildRoot(*analysis_, options_));
}

const HierarchyLevel& Hierarchy::ZoomIn(std::span<const RuleId> selected) {
  levels_.push_back(rulescope::ZoomIn(*analysis_, current(), selected, options_));
  return current();
}

const HierarchyLevel& Hierarchy::ZoomOut() {
  if (levels_.size() == 1) throw ValidationError("already at the root level");
  levels_.pop_back();
  return current();
}

}  // namespace rulescope
