#include "rulescope/schema.h"

#include <fstream>
#include <set>
#include <sstream>

#include "rulescope/error.h"

namespace rulescope {

using nlohmann::json;

DatasetSchema::DatasetSchema(std::vector<AttributeSpec> attributes,
                             std::vector<std::string> classes)
    : attributes_(std::move(attributes)), classes_(std::move(classes)) {
  std::set<std::string> names;
  for (const auto& attr : attributes_) {
    if (attr.name.empty()) throw ValidationError("attribute with empty name");
    if (!names.insert(attr.name).second) {
      throw ValidationError("duplicate attribute name '" + attr.name + "'");
    }
    if (attr.is_categorical()) {
      if (attr.categories.size() < 2) {
        throw ValidationError("categorical attribute '" + attr.name +
                              "' needs at least 2 categories");
      }
      std::set<std::string> cats(attr.categories.begin(),
                                 attr.categories.end());
      if (cats.size() != attr.categories.size()) {
        throw ValidationError("duplicate category in attribute '" +
                              attr.name + "'");
      }
    } else if (!attr.categories.empty()) {
      throw ValidationError("numeric attribute '" + attr.name +
                            "' must not list categories");
    }
  }
  if (classes_.size() < 2 || classes_.size() > kMaxClasses) {
    throw ValidationError("schema must declare between 2 and " +
                          std::to_string(kMaxClasses) + " classes, got " +
                          std::to_string(classes_.size()));
  }
  std::set<std::string> labels(classes_.begin(), classes_.end());
  if (labels.size() != classes_.size()) {
    throw ValidationError("duplicate class label");
  }
}

std::optional<std::size_t> DatasetSchema::FindAttribute(
    std::string_view name) const {
  for (std::size_t i = 0; i < attributes_.size(); ++i) {
    if (attributes_[i].name == name) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> DatasetSchema::FindClass(
    std::string_view label) const {
  for (std::size_t i = 0; i < classes_.size(); ++i) {
    if (classes_[i] == label) return i;
  }
  return std::nullopt;
}

std::optional<std::size_t> DatasetSchema::FindCategory(
    std::size_t attribute, std::string_view label) const {
  const auto& cats = attributes_.at(attribute).categories;
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (cats[i] == label) return i;
  }
  return std::nullopt;
}

json DatasetSchema::ToJson() const {
  json attrs = json::array();
  for (const auto& attr : attributes_) {
    json entry = {{"name", attr.name},
                  {"kind", attr.is_categorical() ? "categorical" : "numeric"}};
    if (attr.is_categorical()) entry["categories"] = attr.categories;
    attrs.push_back(std::move(entry));
  }
  return json{{"attributes", std::move(attrs)}, {"classes", classes_}};
}

DatasetSchema DatasetSchema::FromJson(const json& doc,
                                      const std::string& source) {
  if (!doc.is_object()) throw ParseError(source, "schema must be an object");
  if (!doc.contains("attributes") || !doc["attributes"].is_array()) {
    throw ParseError(source + ":attributes", "missing attribute list");
  }
  if (!doc.contains("classes") || !doc["classes"].is_array()) {
    throw ParseError(source + ":classes", "missing class list");
  }
  std::vector<AttributeSpec> attributes;
  const auto& attrs = doc["attributes"];
  for (std::size_t i = 0; i < attrs.size(); ++i) {
    const std::string where = source + ":attributes[" + std::to_string(i) + "]";
    const auto& entry = attrs[i];
    if (!entry.is_object() || !entry.contains("name") ||
        !entry["name"].is_string()) {
      throw ParseError(where, "attribute needs a string 'name'");
    }
    AttributeSpec spec;
    spec.name = entry["name"].get<std::string>();
    const std::string kind = entry.value("kind", std::string("numeric"));
    if (kind == "numeric") {
      spec.kind = AttributeKind::kNumeric;
    } else if (kind == "categorical") {
      spec.kind = AttributeKind::kCategorical;
      if (!entry.contains("categories") || !entry["categories"].is_array()) {
        throw ParseError(where, "categorical attribute needs 'categories'");
      }
      for (const auto& c : entry["categories"]) {
        if (!c.is_string()) throw ParseError(where, "category must be a string");
        spec.categories.push_back(c.get<std::string>());
      }
    } else {
      throw ParseError(where, "unknown attribute kind '" + kind + "'");
    }
    attributes.push_back(std::move(spec));
  }
  std::vector<std::string> classes;
  for (const auto& c : doc["classes"]) {
    if (!c.is_string()) throw ParseError(source + ":classes", "class must be a string");
    classes.push_back(c.get<std::string>());
  }
  try {
    return DatasetSchema(std::move(attributes), std::move(classes));
  } catch (const ValidationError& e) {
    throw ParseError(source, e.what());
  }
}

DatasetSchema LoadSchema(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open schema file");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ":byte " + std::to_string(e.byte),
                     "invalid JSON");
  }
  return DatasetSchema::FromJson(doc, path.string());
}

}  // namespace rulescope
