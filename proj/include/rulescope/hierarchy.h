#ifndef RULESCOPE_HIERARCHY_H_
#define RULESCOPE_HIERARCHY_H_

#include <cstddef>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"
#include "rulescope/analysis.h"
#include "rulescope/features.h"
#include "rulescope/reduction.h"

namespace rulescope {

// One immutable level of the rule hierarchy.
struct HierarchyLevel {
  std::size_t depth = 0;
  std::vector<RuleId> scope_rules;       // representatives + hidden, ascending
  std::vector<RuleId> representatives;   // ascending
  // Parent in the previous level per representative; none at the root. A
  // rule kept from the previous level is its own parent.
  std::map<RuleId, std::optional<RuleId>> parents;
  std::map<RuleId, RuleId> assignment;   // hidden rule -> representative
  std::vector<std::size_t> scope_samples;  // sample rows of every split, ascending
  AttributeWeights weights;
  std::vector<RuleId> selected;          // zoom request that produced this level
  Selection selection;

  // 1 + number of hidden rules assigned to `representative`.
  std::size_t NeighborhoodSize(RuleId representative) const;
  std::vector<RuleId> Neighborhood(std::span<const RuleId> representatives) const;
  nlohmann::json ToJson() const;
};

struct HierarchyOptions {
  ReduceOptions reduce;
};

// Maps each hidden rule to the representative at the smallest weighted
// distance; ties go to the lower representative id.
std::map<RuleId, RuleId> AssignHidden(const Analysis& analysis,
                                      std::span<const RuleId> hidden,
                                      std::span<const RuleId> representatives,
                                      std::span<const double> slot_weights);

std::shared_ptr<const HierarchyLevel> BuildRoot(const Analysis& analysis,
                                                const HierarchyOptions& options);

// Throws ValidationError for an empty selection, ids that are not
// representatives, or a neighborhood that covers no training sample.
std::shared_ptr<const HierarchyLevel> ZoomIn(const Analysis& analysis,
                                             const HierarchyLevel& level,
                                             std::span<const RuleId> selected,
                                             const HierarchyOptions& options);

// Stack of levels for one exploration.
class Hierarchy {
 public:
  Hierarchy(std::shared_ptr<const Analysis> analysis, HierarchyOptions options);

  const HierarchyLevel& current() const { return *levels_.back(); }
  std::shared_ptr<const HierarchyLevel> current_ptr() const { return levels_.back(); }
  std::size_t depth() const { return levels_.size() - 1; }
  const Analysis& analysis() const { return *analysis_; }
  const HierarchyOptions& options() const { return options_; }

  const HierarchyLevel& ZoomIn(std::span<const RuleId> selected);
  // Throws ValidationError at the root.
  const HierarchyLevel& ZoomOut();

 private:
  std::shared_ptr<const Analysis> analysis_;
  HierarchyOptions options_;
  std::vector<std::shared_ptr<const HierarchyLevel>> levels_;
};

}  // namespace rulescope

#endif  // RULESCOPE_HIERARCHY_H_
