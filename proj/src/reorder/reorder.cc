#include "rulescope/reorder.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <map>
#include <numeric>
#include <set>

#include "rulescope/error.h"

namespace rulescope {
namespace {

constexpr std::size_t kExactLimit = 8;

// Path optimization of one row range under a fixed set of earlier-stage
// attributes whose S values must not change.
class SegmentOptimizer {
 public:
  SegmentOptimizer(std::vector<RuleId>& order, std::size_t attribute,
                   std::span<const std::size_t> frozen, const SimilarityContext& context)
      : order_(order), attribute_(attribute), frozen_(frozen), context_(context) {}

  void Optimize(std::size_t begin, std::size_t end) {
    if (end - begin < 2) return;
    lo_ = begin > 0 ? begin - 1 : begin;
    hi_ = std::min(end + 1, order_.size());
    baseline_.clear();
    for (std::size_t a : frozen_) baseline_.push_back(Local(a));
    if (end - begin <= kExactLimit) {
      Exact(begin, end);
    } else {
      Heuristic(begin, end);
    }
  }

 private:
  std::size_t Local(std::size_t attribute) const {
    std::size_t count = 0;
    for (std::size_t k = lo_; k + 1 < hi_; ++k) {
      if (context_.Linked(order_[k], order_[k + 1], attribute)) ++count;
    }
    return count;
  }

  bool Valid() const {
    for (std::size_t i = 0; i < frozen_.size(); ++i) {
      if (Local(frozen_[i]) != baseline_[i]) return false;
    }
    return true;
  }

  void Exact(std::size_t begin, std::size_t end) {
    const std::vector<RuleId> original(order_.begin() + static_cast<std::ptrdiff_t>(begin),
                                       order_.begin() + static_cast<std::ptrdiff_t>(end));
    std::vector<std::size_t> perm(end - begin);
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    std::vector<std::size_t> best_perm = perm;
    std::size_t best = Local(attribute_);
    while (std::next_permutation(perm.begin(), perm.end())) {
      for (std::size_t k = 0; k < perm.size(); ++k) order_[begin + k] = original[perm[k]];
      const std::size_t score = Local(attribute_);
      if (score > best && Valid()) {
        best = score;
        best_perm = perm;
      }
    }
    for (std::size_t k = 0; k < best_perm.size(); ++k) order_[begin + k] = original[best_perm[k]];
  }

  void Heuristic(std::size_t begin, std::size_t end) {
    const auto first = order_.begin() + static_cast<std::ptrdiff_t>(begin);
    const auto last = order_.begin() + static_cast<std::ptrdiff_t>(end);
    const std::vector<RuleId> original(first, last);
    std::size_t best = Local(attribute_);

    // Greedy nearest-neighbor chain from the lowest rule id.
    std::vector<RuleId> remaining = original;
    std::vector<RuleId> chain;
    auto start = std::min_element(remaining.begin(), remaining.end());
    chain.push_back(*start);
    remaining.erase(start);
    while (!remaining.empty()) {
      auto next = remaining.begin();
      for (auto it = remaining.begin(); it != remaining.end(); ++it) {
        if (context_.Linked(chain.back(), *it, attribute_)) {
          next = it;
          break;
        }
      }
      chain.push_back(*next);
      remaining.erase(next);
    }
    std::copy(chain.begin(), chain.end(), first);
    const std::size_t greedy = Local(attribute_);
    if (greedy > best && Valid()) {
      best = greedy;
    } else {
      std::copy(original.begin(), original.end(), first);
    }

    // 2-opt: reverse a sub-range whenever that strictly improves S.
    bool improved = true;
    while (improved) {
      improved = false;
      for (std::size_t i = begin; i + 1 < end; ++i) {
        for (std::size_t j = i + 1; j < end; ++j) {
          auto a = order_.begin() + static_cast<std::ptrdiff_t>(i);
          auto b = order_.begin() + static_cast<std::ptrdiff_t>(j) + 1;
          std::reverse(a, b);
          const std::size_t score = Local(attribute_);
          if (score > best && Valid()) {
            best = score;
            improved = true;
          } else {
            std::reverse(a, b);
          }
        }
      }
    }
  }

  std::vector<RuleId>& order_;
  std::size_t attribute_;
  std::span<const std::size_t> frozen_;
  const SimilarityContext& context_;
  std::size_t lo_ = 0;
  std::size_t hi_ = 0;
  std::vector<std::size_t> baseline_;
};

// Exhaustive search over the product of within-group permutations.
void JointExact(std::vector<RuleId>& order, const std::vector<RowRange>& groups,
                std::size_t attribute, std::span<const std::size_t> frozen,
                const SimilarityContext& context) {
  std::vector<std::size_t> baseline;
  for (std::size_t a : frozen) baseline.push_back(ScoreS(order, a, context));
  const std::vector<RuleId> original = order;
  std::vector<RuleId> best_order = order;
  std::size_t best = ScoreS(order, attribute, context);

  std::vector<std::vector<std::size_t>> perms(groups.size());
  for (std::size_t g = 0; g < groups.size(); ++g) {
    perms[g].resize(groups[g].end - groups[g].begin);
    std::iota(perms[g].begin(), perms[g].end(), std::size_t{0});
  }
  std::function<void(std::size_t)> visit = [&](std::size_t g) {
    if (g == groups.size()) {
      const std::size_t score = ScoreS(order, attribute, context);
      if (score <= best) return;
      for (std::size_t i = 0; i < frozen.size(); ++i) {
        if (ScoreS(order, frozen[i], context) != baseline[i]) return;
      }
      best = score;
      best_order = order;
      return;
    }
    auto& perm = perms[g];
    std::iota(perm.begin(), perm.end(), std::size_t{0});
    do {
      for (std::size_t k = 0; k < perm.size(); ++k) {
        order[groups[g].begin + k] = original[groups[g].begin + perm[k]];
      }
      visit(g + 1);
    } while (std::next_permutation(perm.begin(), perm.end()));
  };
  visit(0);
  order = best_order;
}

// Splits each range wherever neighbors are neither linked on the attribute
// nor both without a condition on it.
std::vector<RowRange> Refine(const std::vector<RuleId>& order, const std::vector<RowRange>& groups,
                             std::size_t attribute, const SimilarityContext& context) {
  std::vector<RowRange> out;
  for (const RowRange& group : groups) {
    std::size_t start = group.begin;
    for (std::size_t k = group.begin; k + 1 < group.end; ++k) {
      const Rule& a = context.rules[order[k]];
      const Rule& b = context.rules[order[k + 1]];
      const bool joined = context.Linked(order[k], order[k + 1], attribute) ||
                          (!a.Uses(attribute) && !b.Uses(attribute) && a.label == b.label);
      if (!joined) {
        out.push_back({start, k + 1});
        start = k + 1;
      }
    }
    if (start < group.end) out.push_back({start, group.end});
  }
  return out;
}

}  // namespace

bool SimilarityContext::Similar(RuleId a, RuleId b, std::size_t attribute) const {
  const Rule& ra = rules[a];
  const Rule& rb = rules[b];
  const auto ia = ra.conditions.find(attribute);
  const auto ib = rb.conditions.find(attribute);
  if (ia == ra.conditions.end() || ib == rb.conditions.end()) return false;
  if (schema->attribute(attribute).is_categorical()) {
    return std::get<CategorySet>(ia->second) == std::get<CategorySet>(ib->second);
  }
  const auto& x = std::get<Interval>(ia->second);
  const auto& y = std::get<Interval>(ib->second);
  constexpr double kSlack = 1e-12;
  return std::abs(maps->Map(attribute, x.lower) - maps->Map(attribute, y.lower)) <= tau + kSlack &&
         std::abs(maps->Map(attribute, x.upper) - maps->Map(attribute, y.upper)) <= tau + kSlack;
}

bool SimilarityContext::Linked(RuleId a, RuleId b, std::size_t attribute) const {
  return rules[a].label == rules[b].label && Similar(a, b, attribute);
}

std::size_t ScoreS(std::span<const RuleId> order, std::size_t attribute,
                   const SimilarityContext& context) {
  std::size_t count = 0;
  for (std::size_t k = 0; k + 1 < order.size(); ++k) {
    if (context.Linked(order[k], order[k + 1], attribute)) ++count;
  }
  return count;
}

ReorderResult ReorderRules(std::span<const RuleId> rows, std::span<const std::size_t> attributes,
                           const SimilarityContext& context) {
  if (attributes.empty()) throw ValidationError("reordering needs at least one attribute");
  for (std::size_t a : attributes) {
    if (a >= context.schema->num_attributes()) throw ValidationError("unknown attribute index");
  }
  ReorderResult result;
  if (rows.empty()) return result;

  // Stage 1 works on label blocks, ordered by first appearance.
  std::vector<std::size_t> labels;
  std::map<std::size_t, std::vector<RuleId>> blocks;
  for (RuleId id : rows) {
    const std::size_t label = context.rules[id].label;
    if (blocks.find(label) == blocks.end()) labels.push_back(label);
    blocks[label].push_back(id);
  }
  std::vector<RowRange> groups;
  for (std::size_t label : labels) {
    const std::size_t begin = result.order.size();
    result.order.insert(result.order.end(), blocks[label].begin(), blocks[label].end());
    groups.push_back({begin, result.order.size()});
  }

  std::vector<std::size_t> frozen;
  for (std::size_t stage = 0; stage < attributes.size(); ++stage) {
    const std::size_t attribute = attributes[stage];
    if (stage > 0 && result.order.size() <= kExactLimit) {
      JointExact(result.order, groups, attribute, frozen, context);
    } else {
      SegmentOptimizer optimizer(result.order, attribute, frozen, context);
      for (const RowRange& group : groups) optimizer.Optimize(group.begin, group.end);
    }
    groups = Refine(result.order, groups, attribute, context);
    result.groups.push_back(groups);
    frozen.push_back(attribute);
  }
  return result;
}

std::size_t AttributeOrder::PageOf(std::size_t attribute) const {
  const auto it = std::find(order.begin(), order.end(), attribute);
  if (it == order.end()) throw ValidationError("attribute not in order");
  return static_cast<std::size_t>(it - order.begin()) / page_size;
}

AttributeOrder SortAttributes(std::span<const Rule> rules, std::span<const RuleId> displayed,
                              std::size_t num_attributes, std::span<const std::size_t> pinned,
                              std::size_t page_size) {
  if (page_size == 0) throw ValidationError("page size must be positive");
  AttributeOrder result;
  result.page_size = page_size;
  result.usage.assign(num_attributes, 0);
  for (RuleId id : displayed) {
    for (const auto& [attr, condition] : rules[id].conditions) ++result.usage[attr];
  }
  std::vector<bool> placed(num_attributes, false);
  for (std::size_t a : pinned) {
    if (a >= num_attributes) throw ValidationError("unknown pinned attribute");
    if (!placed[a]) {
      result.order.push_back(a);
      placed[a] = true;
    }
  }
  std::vector<std::size_t> rest;
  for (std::size_t a = 0; a < num_attributes; ++a) {
    if (!placed[a]) rest.push_back(a);
  }
  std::stable_sort(rest.begin(), rest.end(), [&](std::size_t x, std::size_t y) {
    return result.usage[x] > result.usage[y];
  });
  result.order.insert(result.order.end(), rest.begin(), rest.end());
  return result;
}

std::vector<std::vector<RuleId>> GroupByAttribute(std::span<const RuleId> rows,
                                                  std::size_t attribute,
                                                  std::span<const Rule> rules,
                                                  const DatasetSchema& schema) {
  if (attribute >= schema.num_attributes()) throw ValidationError("unknown attribute index");
  std::vector<std::vector<RuleId>> groups;
  std::vector<RuleId> unused;
  if (schema.attribute(attribute).is_categorical()) {
    std::map<std::vector<std::size_t>, std::vector<RuleId>> by_subset;
    for (RuleId id : rows) {
      const auto it = rules[id].conditions.find(attribute);
      if (it == rules[id].conditions.end()) {
        unused.push_back(id);
      } else {
        by_subset[std::get<CategorySet>(it->second).Indices()].push_back(id);
      }
    }
    for (auto& [subset, members] : by_subset) groups.push_back(std::move(members));
  } else {
    std::map<std::pair<double, double>, std::vector<RuleId>> by_interval;
    for (RuleId id : rows) {
      const auto it = rules[id].conditions.find(attribute);
      if (it == rules[id].conditions.end()) {
        unused.push_back(id);
      } else {
        const auto& interval = std::get<Interval>(it->second);
        by_interval[{interval.lower, interval.upper}].push_back(id);
      }
    }
    for (auto& [bounds, members] : by_interval) groups.push_back(std::move(members));
  }
  if (!unused.empty()) groups.push_back(std::move(unused));
  return groups;
}

std::vector<RuleId> SortByMetric(std::span<const RuleId> rows, std::span<const double> values,
                                 bool descending) {
  std::vector<RuleId> out(rows.begin(), rows.end());
  // NaN (an undefined metric) sorts as the smallest value.
  const auto key = [&](RuleId id) {
    return std::isnan(values[id]) ? -std::numeric_limits<double>::infinity() : values[id];
  };
  std::stable_sort(out.begin(), out.end(), [&](RuleId a, RuleId b) {
    return descending ? key(a) > key(b) : key(a) < key(b);
  });
  return out;
}

std::vector<std::size_t> RankIncreaseArrows(std::span<const std::size_t> previous,
                                            std::span<const std::size_t> current) {
  std::map<std::size_t, std::size_t> previous_rank;
  for (std::size_t k = 0; k < previous.size(); ++k) previous_rank[previous[k]] = k;
  std::vector<std::pair<long, std::size_t>> gains;
  for (std::size_t k = 0; k < current.size(); ++k) {
    const auto it = previous_rank.find(current[k]);
    if (it == previous_rank.end()) continue;
    const long delta = static_cast<long>(it->second) - static_cast<long>(k);
    if (delta > 0) gains.emplace_back(delta, current[k]);
  }
  std::sort(gains.begin(), gains.end(), [](const auto& a, const auto& b) {
    return a.first != b.first ? a.first > b.first : a.second < b.second;
  });
  std::vector<std::size_t> out;
  for (std::size_t k = 0; k < gains.size() && k < 3; ++k) out.push_back(gains[k].second);
  return out;
}

}  // namespace rulescope
