#include <cmath>

#include "rulescope/error.h"
#include "rulescope/rule.h"

namespace rulescope {

using nlohmann::json;

std::size_t CategorySet::count() const {
  std::size_t n = 0;
  for (bool b : members_) n += b ? 1 : 0;
  return n;
}

void CategorySet::IntersectWith(const std::vector<bool>& mask, bool complement) {
  for (std::size_t k = 0; k < members_.size(); ++k) {
    const bool in_mask = k < mask.size() && mask[k];
    members_[k] = members_[k] && (in_mask != complement);
  }
}

std::vector<std::size_t> CategorySet::Indices() const {
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < members_.size(); ++k) {
    if (members_[k]) out.push_back(k);
  }
  return out;
}

bool Satisfies(const Condition& condition, double value) {
  if (const auto* interval = std::get_if<Interval>(&condition)) {
    return interval->Contains(value);
  }
  return std::get<CategorySet>(condition).Contains(static_cast<std::size_t>(value));
}

bool Rule::Covers(std::span<const double> sample) const {
  for (const auto& [attr, condition] : conditions) {
    if (!Satisfies(condition, sample[attr])) return false;
  }
  return true;
}

namespace {

struct PathFrame {
  std::size_t node;
  std::map<std::size_t, Condition> conditions;
};

// Narrows `conditions` by the branch taken at `split`.
void ApplyBranch(const TreeNode& split, bool went_left, const DatasetSchema& schema,
                 std::map<std::size_t, Condition>& conditions) {
  const std::size_t attr = split.attribute;
  if (split.kind == NodeKind::kNumericSplit) {
    auto [it, inserted] = conditions.try_emplace(attr, Interval{});
    auto& interval = std::get<Interval>(it->second);
    if (went_left) {
      interval.upper = std::min(interval.upper, split.threshold);
    } else {
      interval.lower = std::max(interval.lower, split.threshold);
    }
    return;
  }
  const std::size_t num_categories = schema.attribute(attr).categories.size();
  auto [it, inserted] = conditions.try_emplace(attr, CategorySet(num_categories, true));
  std::get<CategorySet>(it->second).IntersectWith(split.left_categories, !went_left);
}

bool IsConsistent(const Condition& condition) {
  if (const auto* interval = std::get_if<Interval>(&condition)) {
    return !interval->IsEmpty();
  }
  return !std::get<CategorySet>(condition).empty();
}

}  // namespace

std::vector<Rule> ExtractRules(const TreeEnsemble& ensemble, const DatasetSchema& schema) {
  std::vector<Rule> rules;
  rules.reserve(ensemble.NumLeaves());
  for (std::size_t t = 0; t < ensemble.trees.size(); ++t) {
    const Tree& tree = ensemble.trees[t];
    std::vector<PathFrame> stack;
    stack.push_back({0, {}});
    while (!stack.empty()) {
      PathFrame frame = std::move(stack.back());
      stack.pop_back();
      const TreeNode& node = tree.nodes[frame.node];
      if (!node.is_leaf()) {
        PathFrame right{node.right, frame.conditions};
        ApplyBranch(node, false, schema, right.conditions);
        PathFrame left{node.left, std::move(frame.conditions)};
        ApplyBranch(node, true, schema, left.conditions);
        stack.push_back(std::move(right));
        stack.push_back(std::move(left));
        continue;
      }
      for (const auto& [attr, condition] : frame.conditions) {
        if (!IsConsistent(condition)) {
          throw ValidationError("inconsistent path to tree " + std::to_string(t) + " leaf " +
                                std::to_string(frame.node) + ": empty condition on '" +
                                schema.attribute(attr).name + "'");
        }
      }
      Rule rule;
      rule.id = rules.size();
      rule.conditions = std::move(frame.conditions);
      rule.source = {t, frame.node};
      if (ensemble.kind == ModelKind::kRandomForest) {
        rule.label = ArgMax(node.leaf_value);
        rule.weight = 1.0;
      } else if (tree.target_class) {
        rule.label = *tree.target_class;
        rule.weight = node.leaf_value[0];
      } else {
        rule.label = node.leaf_value[0] > 0.0 ? 1 : 0;
        rule.weight = std::abs(node.leaf_value[0]);
      }
      rules.push_back(std::move(rule));
    }
  }
  return rules;
}

namespace {

json FiniteOrNull(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

}  // namespace

json RuleToJson(const Rule& rule, const DatasetSchema& schema) {
  json conditions = json::array();
  for (const auto& [attr, condition] : rule.conditions) {
    const AttributeSpec& spec = schema.attribute(attr);
    if (const auto* interval = std::get_if<Interval>(&condition)) {
      conditions.push_back({{"attribute", spec.name},
                            {"kind", "numeric"},
                            {"lower", FiniteOrNull(interval->lower)},
                            {"upper", FiniteOrNull(interval->upper)}});
    } else {
      json cats = json::array();
      for (std::size_t k : std::get<CategorySet>(condition).Indices()) {
        cats.push_back(spec.categories[k]);
      }
      conditions.push_back(
          {{"attribute", spec.name}, {"kind", "categorical"}, {"categories", std::move(cats)}});
    }
  }
  return json{{"id", rule.id},
              {"label", rule.label},
              {"label_name", schema.classes()[rule.label]},
              {"weight", rule.weight},
              {"source", {{"tree", rule.source.tree}, {"leaf", rule.source.leaf}}},
              {"conditions", std::move(conditions)}};
}

}  // namespace rulescope
