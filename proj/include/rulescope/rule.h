#ifndef RULESCOPE_RULE_H_
#define RULESCOPE_RULE_H_

#include <cstddef>
#include <limits>
#include <map>
#include <span>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rulescope/ensemble.h"
#include "rulescope/schema.h"

namespace rulescope {

using RuleId = std::size_t;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

// Half-open numeric interval (lower, upper].
struct Interval {
  double lower = -kInf;
  double upper = kInf;

  bool Contains(double x) const { return x > lower && x <= upper; }
  bool IsEmpty() const { return !(lower < upper); }

  friend bool operator==(const Interval&, const Interval&) = default;
};

// Subset of an attribute's categories.
class CategorySet {
 public:
  CategorySet() = default;
  // All categories when `full`, none otherwise.
  CategorySet(std::size_t num_categories, bool full)
      : members_(num_categories, full) {}
  explicit CategorySet(std::vector<bool> members)
      : members_(std::move(members)) {}

  std::size_t universe_size() const { return members_.size(); }
  std::size_t count() const;
  bool empty() const { return count() == 0; }
  bool full() const { return count() == members_.size(); }
  bool Contains(std::size_t category) const {
    return category < members_.size() && members_[category];
  }
  void Insert(std::size_t category) { members_.at(category) = true; }
  void IntersectWith(const std::vector<bool>& mask, bool complement);
  std::vector<std::size_t> Indices() const;
  const std::vector<bool>& mask() const { return members_; }

  friend bool operator==(const CategorySet&, const CategorySet&) = default;
  friend auto operator<=>(const CategorySet& a, const CategorySet& b) {
    return a.Indices() <=> b.Indices();
  }

 private:
  std::vector<bool> members_;
};

using Condition = std::variant<Interval, CategorySet>;

struct RuleSource {
  std::size_t tree = 0;
  std::size_t leaf = 0;  // node index of the leaf inside its tree

  friend bool operator==(const RuleSource&, const RuleSource&) = default;
};

// Root-to-leaf path of one tree, consolidated to at most one condition per
// attribute.
struct Rule {
  RuleId id = 0;
  std::map<std::size_t, Condition> conditions;  // keyed by attribute index
  std::size_t label = 0;
  double weight = 1.0;
  RuleSource source;

  bool Uses(std::size_t attribute) const {
    return conditions.count(attribute) != 0;
  }
  bool Covers(std::span<const double> sample) const;

  friend bool operator==(const Rule&, const Rule&) = default;
};

bool Satisfies(const Condition& condition, double value);

// One rule per leaf, ids assigned in (tree, leaf) order starting at 0.
std::vector<Rule> ExtractRules(const TreeEnsemble& ensemble,
                               const DatasetSchema& schema);

nlohmann::json RuleToJson(const Rule& rule, const DatasetSchema& schema);

}  // namespace rulescope

#endif  // RULESCOPE_RULE_H_
