// Reader for the LightGBM text model dump.
#include <charconv>
#include <cmath>
#include <cstdint>
#include <map>
#include <sstream>

#include "rulescope/ensemble.h"
#include "rulescope/error.h"
#include "src/ingest/internal.h"

namespace rulescope {
namespace {

constexpr int kCategoricalMask = 1;
constexpr int kMissingZero = 1;

using KeyValues = std::map<std::string, std::string>;

std::string TrimLine(const std::string& line) {
  std::size_t e = line.size();
  while (e > 0 && (line[e - 1] == '\r' || line[e - 1] == ' ')) --e;
  return line.substr(0, e);
}

template <typename T>
std::vector<T> ParseArray(const KeyValues& kv, const std::string& key,
                          std::size_t expected, const std::string& where) {
  auto it = kv.find(key);
  if (it == kv.end()) throw ParseError(where, "missing field '" + key + "'");
  std::vector<T> out;
  std::istringstream in(it->second);
  std::string token;
  while (in >> token) {
    T value{};
    if constexpr (std::is_floating_point_v<T>) {
      // from_chars for double does not accept "inf"; strtod does.
      char* end = nullptr;
      value = static_cast<T>(std::strtod(token.c_str(), &end));
      if (end != token.c_str() + token.size()) {
        throw ParseError(where + "." + key, "bad number '" + token + "'");
      }
    } else {
      auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), value);
      if (ec != std::errc() || ptr != token.data() + token.size()) {
        throw ParseError(where + "." + key, "bad integer '" + token + "'");
      }
    }
    out.push_back(value);
  }
  if (expected != 0 && out.size() != expected) {
    throw ParseError(where + "." + key, "expected " + std::to_string(expected) +
                                            " values, found " + std::to_string(out.size()));
  }
  return out;
}

int ParseInt(const KeyValues& kv, const std::string& key, const std::string& where) {
  return ParseArray<int>(kv, key, 1, where)[0];
}

Tree BuildTree(const KeyValues& kv, const DatasetSchema& schema,
               const std::string& where) {
  const int num_leaves = ParseInt(kv, "num_leaves", where);
  if (num_leaves < 1) throw ParseError(where, "num_leaves must be positive");
  if (kv.count("is_linear") && ParseInt(kv, "is_linear", where) != 0) {
    throw ParseError(where, "linear trees are not supported");
  }
  const auto leaf_values = ParseArray<double>(kv, "leaf_value", num_leaves, where);
  Tree tree;
  const std::size_t num_internal = static_cast<std::size_t>(num_leaves - 1);
  tree.nodes.resize(num_internal + num_leaves);
  for (int l = 0; l < num_leaves; ++l) {
    TreeNode& leaf = tree.nodes[num_internal + l];
    leaf.kind = NodeKind::kLeaf;
    leaf.leaf_value = {leaf_values[l]};
    if (!std::isfinite(leaf_values[l])) throw ParseError(where, "leaf value not finite");
  }
  if (num_internal == 0) return tree;

  const auto features = ParseArray<int>(kv, "split_feature", num_internal, where);
  const auto thresholds = ParseArray<double>(kv, "threshold", num_internal, where);
  const auto left = ParseArray<int>(kv, "left_child", num_internal, where);
  const auto right = ParseArray<int>(kv, "right_child", num_internal, where);
  std::vector<int> decision(num_internal, 0);
  if (kv.count("decision_type")) {
    decision = ParseArray<int>(kv, "decision_type", num_internal, where);
  }
  const int num_cat = kv.count("num_cat") ? ParseInt(kv, "num_cat", where) : 0;
  std::vector<int> cat_boundaries;
  std::vector<std::uint32_t> cat_words;
  if (num_cat > 0) {
    cat_boundaries = ParseArray<int>(kv, "cat_boundaries", num_cat + 1, where);
    cat_words = ParseArray<std::uint32_t>(kv, "cat_threshold", 0, where);
  }

  auto child = [&](int ref, std::size_t node) -> std::size_t {
    if (ref >= 0) {
      if (static_cast<std::size_t>(ref) >= num_internal) {
        throw ParseError(where, "child of node " + std::to_string(node) + " out of range");
      }
      return static_cast<std::size_t>(ref);
    }
    const int leaf = ~ref;
    if (leaf >= num_leaves) {
      throw ParseError(where, "leaf reference of node " + std::to_string(node) + " out of range");
    }
    return num_internal + static_cast<std::size_t>(leaf);
  };

  for (std::size_t i = 0; i < num_internal; ++i) {
    const std::string node_where = where + ".node[" + std::to_string(i) + "]";
    TreeNode& node = tree.nodes[i];
    if (features[i] < 0 || static_cast<std::size_t>(features[i]) >= schema.num_attributes()) {
      throw SchemaMismatchError(node_where, "unknown attribute index " + std::to_string(features[i]));
    }
    node.attribute = static_cast<std::size_t>(features[i]);
    node.left = child(left[i], i);
    node.right = child(right[i], i);
    const AttributeSpec& spec = schema.attribute(node.attribute);
    if (decision[i] & kCategoricalMask) {
      if (!spec.is_categorical()) {
        throw SchemaMismatchError(node_where, "categorical split on numeric attribute '" + spec.name + "'");
      }
      const int cat_idx = static_cast<int>(thresholds[i]);
      if (cat_idx < 0 || cat_idx >= num_cat) {
        throw SchemaMismatchError(node_where, "categorical threshold index out of range");
      }
      node.kind = NodeKind::kCategoricalSplit;
      node.left_categories.assign(spec.categories.size(), false);
      const int begin = cat_boundaries[cat_idx];
      const int end = cat_boundaries[cat_idx + 1];
      if (begin < 0 || end < begin || static_cast<std::size_t>(end) > cat_words.size()) {
        throw ParseError(node_where, "bad cat_boundaries");
      }
      for (int w = begin; w < end; ++w) {
        for (int bit = 0; bit < 32; ++bit) {
          if (!((cat_words[w] >> bit) & 1u)) continue;
          const std::size_t category = static_cast<std::size_t>((w - begin) * 32 + bit);
          if (category >= spec.categories.size()) {
            throw SchemaMismatchError(node_where, "category " + std::to_string(category) +
                                             " not in schema for '" + spec.name + "'");
          }
          node.left_categories[category] = true;
        }
      }
    } else {
      if (((decision[i] >> 2) & 3) == kMissingZero) {
        throw ParseError(node_where, "zero-as-missing splits are not supported");
      }
      node.threshold = thresholds[i];
      if (spec.is_categorical()) {
        node.kind = NodeKind::kCategoricalSplit;
        node.left_categories.assign(spec.categories.size(), false);
        for (std::size_t k = 0; k < spec.categories.size(); ++k) {
          node.left_categories[k] = static_cast<double>(k) <= node.threshold;
        }
      } else {
        node.kind = NodeKind::kNumericSplit;
      }
    }
  }
  ValidateTreeShape(tree, where);
  return tree;
}

bool IsDefaultFeatureName(const std::string& name, std::size_t index) {
  return name == "Column_" + std::to_string(index);
}

}  // namespace

TreeEnsemble ParseGbtText(std::istream& in, const DatasetSchema& schema,
                          const std::string& source) {
  KeyValues header;
  std::vector<std::pair<std::size_t, KeyValues>> tree_blocks;
  KeyValues* current = &header;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    line = TrimLine(line);
    if (line == "end of trees") break;
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      if (line_no == 1 || line == "tree") continue;  // format banner
      throw ParseError(source + ":" + std::to_string(line_no), "expected key=value");
    }
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "Tree") {
      tree_blocks.push_back({line_no, {}});
      current = &tree_blocks.back().second;
      continue;
    }
    (*current)[key] = value;
  }
  if (tree_blocks.empty()) throw ParseError(source, "no Tree= blocks found");

  const int num_class = header.count("num_class") ? ParseInt(header, "num_class", source) : 1;
  const int per_iteration = header.count("num_tree_per_iteration")
                                ? ParseInt(header, "num_tree_per_iteration", source)
                                : num_class;
  TreeEnsemble ensemble;
  ensemble.kind = ModelKind::kGradientBoosted;
  ensemble.num_classes = schema.num_classes();
  ensemble.base_scores.assign(ensemble.num_classes, 0.0);
  if (num_class == 1) {
    if (schema.num_classes() != 2) {
      throw SchemaMismatchError(source + ":num_class", "binary model but schema has " +
                                                  std::to_string(schema.num_classes()) + " classes");
    }
  } else if (static_cast<std::size_t>(num_class) != schema.num_classes() ||
             per_iteration != num_class) {
    throw SchemaMismatchError(source + ":num_class", "class count does not match schema");
  }
  if (header.count("max_feature_idx")) {
    const int max_feature = ParseInt(header, "max_feature_idx", source);
    if (max_feature < 0 || static_cast<std::size_t>(max_feature) >= schema.num_attributes()) {
      throw SchemaMismatchError(source + ":max_feature_idx", "model uses more features than the schema has");
    }
  }
  if (header.count("feature_names")) {
    std::istringstream names(header["feature_names"]);
    std::string name;
    for (std::size_t i = 0; names >> name; ++i) {
      if (i < schema.num_attributes() && !IsDefaultFeatureName(name, i) &&
          name != schema.attribute(i).name) {
        throw SchemaMismatchError(source + ":feature_names",
                         "feature " + std::to_string(i) + " is '" + name +
                             "' but the schema says '" + schema.attribute(i).name + "'");
      }
    }
  }

  for (std::size_t t = 0; t < tree_blocks.size(); ++t) {
    const std::string where = source + ":Tree=" + std::to_string(t) + "(line " +
                              std::to_string(tree_blocks[t].first) + ")";
    Tree tree = BuildTree(tree_blocks[t].second, schema, where);
    if (num_class > 1) tree.target_class = t % static_cast<std::size_t>(num_class);
    ensemble.trees.push_back(std::move(tree));
  }
  return ensemble;
}

}  // namespace rulescope
