#ifndef RULESCOPE_FEATURES_H_
#define RULESCOPE_FEATURES_H_

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "rulescope/rule.h"
#include "rulescope/sample_table.h"
#include "rulescope/schema.h"

namespace rulescope {

// Per-attribute maps from raw values to [0, 1], fitted on training rows.
//
// Numeric attributes use the empirical CDF, linearly interpolated between
// adjacent distinct order statistics. The knot for a distinct value sits at
// its mid-rank / (n - 1), except that the minimum maps to 0 and the maximum
// to 1. Values outside the observed range clamp to 0 or 1. An attribute
// whose training values are all equal maps every finite value to 0.5 and is
// reported in warnings().
//
// Categorical attributes keep per-category training counts.
class QuantileMaps {
 public:
  static QuantileMaps Build(const SampleTable& samples, const DatasetSchema& schema);
  // Fits on an explicit set of values; used for numeric-only callers.
  static QuantileMaps FromNumericColumns(std::vector<std::vector<double>> columns);

  double Map(std::size_t attribute, double value) const;

  std::span<const double> category_counts(std::size_t attribute) const {
    return maps_.at(attribute).counts;
  }
  double category_total(std::size_t attribute) const { return maps_.at(attribute).total; }

  const std::vector<std::string>& warnings() const { return warnings_; }

 private:
  struct AttributeMap {
    bool categorical = false;
    std::vector<double> knot_values;    // distinct training values, ascending
    std::vector<double> knot_quantiles;
    std::vector<double> counts;
    double total = 0.0;
  };

  static AttributeMap FitNumeric(std::vector<double> values);

  std::vector<AttributeMap> maps_;
  std::vector<std::string> warnings_;
};

// Slot layout of rule feature vectors: two slots per numeric attribute
// (lower, upper quantile) and one per category for categorical ones.
class FeatureLayout {
 public:
  explicit FeatureLayout(const DatasetSchema& schema);

  std::size_t dimension() const { return dimension_; }
  std::size_t offset(std::size_t attribute) const { return offsets_.at(attribute); }
  std::size_t width(std::size_t attribute) const { return widths_.at(attribute); }
  std::size_t num_attributes() const { return offsets_.size(); }

 private:
  std::vector<std::size_t> offsets_;
  std::vector<std::size_t> widths_;
  std::size_t dimension_ = 0;
};

using RuleFeatureVector = std::vector<double>;

// Entry k is counts[k] / total when k is in the subset, 0 otherwise.
std::vector<double> VectorizeCategorical(const CategorySet& subset,
                                         std::span<const double> counts, double total);

// Absent numeric conditions encode as [0, 1]; absent categorical conditions
// encode as the full training distribution.
RuleFeatureVector VectorizeRule(const Rule& rule, const DatasetSchema& schema,
                                const QuantileMaps& maps);

std::vector<RuleFeatureVector> VectorizeRules(std::span<const Rule> rules,
                                              const DatasetSchema& schema,
                                              const QuantileMaps& maps);

// Fraction of rules conditioning on each attribute.
struct AttributeWeights {
  std::vector<double> per_attribute;

  std::vector<double> ToSlotWeights(const FeatureLayout& layout) const;
};

AttributeWeights AttributeUsageWeights(std::span<const Rule> rules,
                                       std::span<const RuleId> subset,
                                       std::size_t num_attributes);
AttributeWeights AttributeUsageWeights(std::span<const Rule> rules,
                                       std::size_t num_attributes);

// sqrt(sum_s w_s (a_s - b_s)^2); throws ValidationError on size mismatch.
double WeightedDistance(std::span<const double> a, std::span<const double> b,
                        std::span<const double> slot_weights);

}  // namespace rulescope

#endif  // RULESCOPE_FEATURES_H_
