#include "rulescope/features.h"

#include <algorithm>
#include <cmath>

#include "rulescope/error.h"

namespace rulescope {

QuantileMaps::AttributeMap QuantileMaps::FitNumeric(std::vector<double> values) {
  AttributeMap map;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  for (std::size_t lo = 0; lo < n;) {
    std::size_t hi = lo;
    while (hi + 1 < n && values[hi + 1] == values[lo]) ++hi;
    map.knot_values.push_back(values[lo]);
    map.knot_quantiles.push_back(n > 1 ? 0.5 * static_cast<double>(lo + hi) /
                                             static_cast<double>(n - 1)
                                       : 0.5);
    lo = hi + 1;
  }
  if (map.knot_values.size() > 1) {
    map.knot_quantiles.front() = 0.0;
    map.knot_quantiles.back() = 1.0;
  }
  return map;
}

QuantileMaps QuantileMaps::Build(const SampleTable& samples, const DatasetSchema& schema) {
  const std::vector<std::size_t> train = samples.RowsInSplit(Split::kTrain);
  if (train.empty()) throw ValidationError("quantile maps need at least one training row");
  QuantileMaps maps;
  for (std::size_t a = 0; a < schema.num_attributes(); ++a) {
    const AttributeSpec& spec = schema.attribute(a);
    if (spec.is_categorical()) {
      AttributeMap map;
      map.categorical = true;
      map.counts.assign(spec.categories.size(), 0.0);
      for (std::size_t row : train) {
        map.counts[static_cast<std::size_t>(samples.value(row, a))] += 1.0;
      }
      map.total = static_cast<double>(train.size());
      maps.maps_.push_back(std::move(map));
      continue;
    }
    std::vector<double> values;
    values.reserve(train.size());
    for (std::size_t row : train) values.push_back(samples.value(row, a));
    maps.maps_.push_back(FitNumeric(std::move(values)));
    if (maps.maps_.back().knot_values.size() == 1) {
      maps.warnings_.push_back("attribute '" + spec.name +
                               "' has a single training value; its quantiles are fixed at 0.5");
    }
  }
  return maps;
}

QuantileMaps QuantileMaps::FromNumericColumns(std::vector<std::vector<double>> columns) {
  QuantileMaps maps;
  for (std::size_t a = 0; a < columns.size(); ++a) {
    if (columns[a].empty()) throw ValidationError("empty column");
    maps.maps_.push_back(FitNumeric(std::move(columns[a])));
    if (maps.maps_.back().knot_values.size() == 1) {
      maps.warnings_.push_back("column " + std::to_string(a) + " is constant");
    }
  }
  return maps;
}

double QuantileMaps::Map(std::size_t attribute, double value) const {
  const AttributeMap& map = maps_.at(attribute);
  if (map.categorical) throw ValidationError("quantile map requested for categorical attribute");
  if (value == -kInf) return 0.0;
  if (value == kInf) return 1.0;
  const auto& xs = map.knot_values;
  const auto& qs = map.knot_quantiles;
  if (xs.size() == 1) return 0.5;
  if (value <= xs.front()) return 0.0;
  if (value >= xs.back()) return 1.0;
  const auto upper = std::upper_bound(xs.begin(), xs.end(), value);
  const std::size_t hi = static_cast<std::size_t>(upper - xs.begin());
  const std::size_t lo = hi - 1;
  if (xs[lo] == value) return qs[lo];
  const double t = (value - xs[lo]) / (xs[hi] - xs[lo]);
  return qs[lo] + t * (qs[hi] - qs[lo]);
}

FeatureLayout::FeatureLayout(const DatasetSchema& schema) {
  for (const auto& attr : schema.attributes()) {
    offsets_.push_back(dimension_);
    const std::size_t width = attr.is_categorical() ? attr.categories.size() : 2;
    widths_.push_back(width);
    dimension_ += width;
  }
}

std::vector<double> VectorizeCategorical(const CategorySet& subset,
                                         std::span<const double> counts, double total) {
  if (!(total > 0.0)) throw ValidationError("category distribution with zero total");
  std::vector<double> out(counts.size(), 0.0);
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (subset.Contains(k)) out[k] = counts[k] / total;
  }
  return out;
}

RuleFeatureVector VectorizeRule(const Rule& rule, const DatasetSchema& schema,
                                const QuantileMaps& maps) {
  const FeatureLayout layout(schema);
  RuleFeatureVector out(layout.dimension(), 0.0);
  for (std::size_t a = 0; a < schema.num_attributes(); ++a) {
    const std::size_t offset = layout.offset(a);
    const auto it = rule.conditions.find(a);
    if (schema.attribute(a).is_categorical()) {
      const std::size_t k = schema.attribute(a).categories.size();
      const CategorySet subset = it == rule.conditions.end()
                                     ? CategorySet(k, true)
                                     : std::get<CategorySet>(it->second);
      const auto slots = VectorizeCategorical(subset, maps.category_counts(a),
                                              maps.category_total(a));
      std::copy(slots.begin(), slots.end(), out.begin() + static_cast<std::ptrdiff_t>(offset));
    } else if (it == rule.conditions.end()) {
      out[offset] = 0.0;
      out[offset + 1] = 1.0;
    } else {
      const auto& interval = std::get<Interval>(it->second);
      out[offset] = maps.Map(a, interval.lower);
      out[offset + 1] = maps.Map(a, interval.upper);
    }
  }
  return out;
}

std::vector<RuleFeatureVector> VectorizeRules(std::span<const Rule> rules,
                                              const DatasetSchema& schema,
                                              const QuantileMaps& maps) {
  std::vector<RuleFeatureVector> out;
  out.reserve(rules.size());
  for (const auto& rule : rules) out.push_back(VectorizeRule(rule, schema, maps));
  return out;
}

std::vector<double> AttributeWeights::ToSlotWeights(const FeatureLayout& layout) const {
  std::vector<double> slots(layout.dimension(), 0.0);
  for (std::size_t a = 0; a < layout.num_attributes(); ++a) {
    for (std::size_t s = 0; s < layout.width(a); ++s) {
      slots[layout.offset(a) + s] = per_attribute.at(a);
    }
  }
  return slots;
}

AttributeWeights AttributeUsageWeights(std::span<const Rule> rules,
                                       std::span<const RuleId> subset,
                                       std::size_t num_attributes) {
  if (subset.empty()) throw ValidationError("attribute weights need at least one rule");
  AttributeWeights weights;
  weights.per_attribute.assign(num_attributes, 0.0);
  for (RuleId id : subset) {
    for (const auto& [attr, condition] : rules[id].conditions) {
      weights.per_attribute[attr] += 1.0;
    }
  }
  for (double& w : weights.per_attribute) w /= static_cast<double>(subset.size());
  return weights;
}

AttributeWeights AttributeUsageWeights(std::span<const Rule> rules,
                                       std::size_t num_attributes) {
  if (rules.empty()) throw ValidationError("attribute weights need at least one rule");
  AttributeWeights weights;
  weights.per_attribute.assign(num_attributes, 0.0);
  for (const auto& rule : rules) {
    for (const auto& [attr, condition] : rule.conditions) weights.per_attribute[attr] += 1.0;
  }
  for (double& w : weights.per_attribute) w /= static_cast<double>(rules.size());
  return weights;
}

double WeightedDistance(std::span<const double> a, std::span<const double> b,
                        std::span<const double> slot_weights) {
  if (a.size() != b.size() || a.size() != slot_weights.size()) {
    throw ValidationError("feature vector dimension mismatch");
  }
  double sum = 0.0;
  for (std::size_t s = 0; s < a.size(); ++s) {
    const double d = a[s] - b[s];
    sum += slot_weights[s] * d * d;
  }
  return std::sqrt(sum);
}

}  // namespace rulescope
