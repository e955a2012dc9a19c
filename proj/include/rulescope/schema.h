#ifndef RULESCOPE_SCHEMA_H_
#define RULESCOPE_SCHEMA_H_

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace rulescope {

enum class AttributeKind { kNumeric, kCategorical };

struct AttributeSpec {
  std::string name;
  AttributeKind kind = AttributeKind::kNumeric;
  // Ordered category labels; empty for numeric attributes.
  std::vector<std::string> categories;

  bool is_categorical() const { return kind == AttributeKind::kCategorical; }

  friend bool operator==(const AttributeSpec&, const AttributeSpec&) = default;
};

inline constexpr std::size_t kMaxClasses = 10;

// Ordered attributes plus class labels. Validated on construction:
// unique attribute names, >= 2 categories per categorical attribute and
// between 2 and kMaxClasses classes.
class DatasetSchema {
 public:
  DatasetSchema(std::vector<AttributeSpec> attributes,
                std::vector<std::string> classes);

  const std::vector<AttributeSpec>& attributes() const { return attributes_; }
  const AttributeSpec& attribute(std::size_t index) const {
    return attributes_.at(index);
  }
  std::size_t num_attributes() const { return attributes_.size(); }

  const std::vector<std::string>& classes() const { return classes_; }
  std::size_t num_classes() const { return classes_.size(); }

  std::optional<std::size_t> FindAttribute(std::string_view name) const;
  std::optional<std::size_t> FindClass(std::string_view label) const;
  std::optional<std::size_t> FindCategory(std::size_t attribute,
                                          std::string_view label) const;

  nlohmann::json ToJson() const;
  // `source` is used to prefix error locations.
  static DatasetSchema FromJson(const nlohmann::json& doc,
                                const std::string& source = "schema");

  friend bool operator==(const DatasetSchema&, const DatasetSchema&) = default;

 private:
  std::vector<AttributeSpec> attributes_;
  std::vector<std::string> classes_;
};

DatasetSchema LoadSchema(const std::filesystem::path& path);

}  // namespace rulescope

#endif  // RULESCOPE_SCHEMA_H_
