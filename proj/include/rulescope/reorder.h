#ifndef RULESCOPE_REORDER_H_
#define RULESCOPE_REORDER_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rulescope/features.h"
#include "rulescope/rule.h"
#include "rulescope/schema.h"

namespace rulescope {

struct SimilarityContext {
  std::span<const Rule> rules;  // indexed by rule id
  const DatasetSchema* schema = nullptr;
  const QuantileMaps* maps = nullptr;
  double tau = 0.1;

  // Both rules condition on `attribute` with identical category subsets, or
  // with both quantile endpoints within tau. False if either lacks it.
  bool Similar(RuleId a, RuleId b, std::size_t attribute) const;
  // Similar and same label: one adjacency's contribution to S_j.
  bool Linked(RuleId a, RuleId b, std::size_t attribute) const;
};

// Half-open row range [begin, end).
struct RowRange {
  std::size_t begin = 0;
  std::size_t end = 0;
  friend bool operator==(const RowRange&, const RowRange&) = default;
};

// Number of adjacent pairs in `order` that share a label and are similar on
// `attribute`.
std::size_t ScoreS(std::span<const RuleId> order, std::size_t attribute,
                   const SimilarityContext& context);

struct ReorderResult {
  std::vector<RuleId> order;
  // groups[j] partitions the rows after stage j; each refines groups[j - 1].
  std::vector<std::vector<RowRange>> groups;
};

// Maximizes S for attributes[0], then attributes[1] within the groups left
// by earlier stages, and so on. Earlier S values never change.
ReorderResult ReorderRules(std::span<const RuleId> rows, std::span<const std::size_t> attributes,
                           const SimilarityContext& context);

struct AttributeOrder {
  std::vector<std::size_t> order;       // attribute indices, pinned first
  std::vector<std::size_t> usage;       // usage count per attribute (schema order)
  std::size_t page_size = 15;

  std::size_t num_pages() const {
    return order.empty() ? 0 : (order.size() + page_size - 1) / page_size;
  }
  std::size_t PageOf(std::size_t attribute) const;
};

// Usage count descending, ties by schema order; pinned attributes first in
// the given order.
AttributeOrder SortAttributes(std::span<const Rule> rules, std::span<const RuleId> displayed,
                              std::size_t num_attributes, std::span<const std::size_t> pinned,
                              std::size_t page_size = 15);

// Rules using the attribute first, grouped by condition; non-users last in
// their input order.
std::vector<std::vector<RuleId>> GroupByAttribute(std::span<const RuleId> rows,
                                                  std::size_t attribute,
                                                  std::span<const Rule> rules,
                                                  const DatasetSchema& schema);

// Stable sort of `rows` by `values[rule id]`.
std::vector<RuleId> SortByMetric(std::span<const RuleId> rows, std::span<const double> values,
                                 bool descending);

// Attributes with the three largest positive rank gains from `previous` to
// `current` (ties by schema index).
std::vector<std::size_t> RankIncreaseArrows(std::span<const std::size_t> previous,
                                            std::span<const std::size_t> current);

}  // namespace rulescope

#endif  // RULESCOPE_REORDER_H_
