#include "rulescope/ensemble.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "rulescope/error.h"
#include "src/ingest/internal.h"

namespace rulescope {

using nlohmann::json;

bool TreeNode::GoesLeft(double value) const {
  if (kind == NodeKind::kCategoricalSplit) {
    const auto category = static_cast<std::size_t>(value);
    return category < left_categories.size() && left_categories[category];
  }
  return value <= threshold;
}

std::size_t Tree::FindLeaf(std::span<const double> sample) const {
  std::size_t node = 0;
  while (!nodes[node].is_leaf()) {
    const TreeNode& n = nodes[node];
    node = n.GoesLeft(sample[n.attribute]) ? n.left : n.right;
  }
  return node;
}

std::size_t Tree::NumLeaves() const {
  std::size_t count = 0;
  for (const auto& n : nodes) count += n.is_leaf() ? 1 : 0;
  return count;
}

std::size_t TreeEnsemble::NumLeaves() const {
  std::size_t count = 0;
  for (const auto& t : trees) count += t.NumLeaves();
  return count;
}

std::size_t ArgMax(std::span<const double> values) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (values[i] > values[best]) best = i;
  }
  return best;
}

std::vector<double> RawScores(const TreeEnsemble& ensemble,
                              std::span<const double> sample) {
  std::vector<double> scores(ensemble.num_classes, 0.0);
  if (ensemble.kind == ModelKind::kRandomForest) {
    for (const auto& tree : ensemble.trees) {
      const auto& counts = tree.nodes[tree.FindLeaf(sample)].leaf_value;
      scores[ArgMax(counts)] += 1.0;
    }
    return scores;
  }
  for (std::size_t c = 0; c < scores.size(); ++c) {
    scores[c] = ensemble.base_scores[c];
  }
  for (const auto& tree : ensemble.trees) {
    const double value = tree.nodes[tree.FindLeaf(sample)].leaf_value[0];
    scores[tree.target_class.value_or(1)] += value;
  }
  return scores;
}

std::size_t PredictOriginal(const TreeEnsemble& ensemble,
                            std::span<const double> sample) {
  return ArgMax(RawScores(ensemble, sample));
}

namespace {

std::size_t ResolveAttribute(const json& ref, const DatasetSchema& schema,
                             const std::string& where) {
  if (ref.is_number_integer()) {
    const auto index = ref.get<long long>();
    if (index < 0 || static_cast<std::size_t>(index) >= schema.num_attributes()) {
      throw SchemaMismatchError(where, "unknown attribute index " + std::to_string(index));
    }
    return static_cast<std::size_t>(index);
  }
  if (ref.is_string()) {
    if (auto found = schema.FindAttribute(ref.get<std::string>())) return *found;
    throw SchemaMismatchError(where, "unknown attribute '" + ref.get<std::string>() + "'");
  }
  throw ParseError(where, "'attr' must be an index or a name");
}

std::size_t ResolveCategory(const json& ref, const DatasetSchema& schema,
                            std::size_t attr, const std::string& where) {
  const std::size_t num = schema.attribute(attr).categories.size();
  if (ref.is_number_integer()) {
    const auto index = ref.get<long long>();
    if (index < 0 || static_cast<std::size_t>(index) >= num) {
      throw SchemaMismatchError(where, "category index out of range");
    }
    return static_cast<std::size_t>(index);
  }
  if (ref.is_string()) {
    if (auto found = schema.FindCategory(attr, ref.get<std::string>())) return *found;
    throw SchemaMismatchError(where, "unknown category '" + ref.get<std::string>() + "'");
  }
  throw ParseError(where, "category must be an index or a name");
}

std::size_t ChildIndex(const json& node, const char* key, std::size_t count,
                       const std::string& where) {
  if (!node.contains(key) || !node[key].is_number_integer()) {
    throw ParseError(where, std::string("non-binary node: missing '") + key + "'");
  }
  const auto child = node[key].get<long long>();
  if (child < 0 || static_cast<std::size_t>(child) >= count) {
    throw ParseError(where, std::string("'") + key + "' out of range");
  }
  return static_cast<std::size_t>(child);
}

}  // namespace

void ValidateTreeShape(const Tree& tree, const std::string& where) {
  if (tree.nodes.empty()) throw ParseError(where, "tree has no nodes");
  std::vector<int> visits(tree.nodes.size(), 0);
  std::vector<std::size_t> stack = {0};
  while (!stack.empty()) {
    const std::size_t id = stack.back();
    stack.pop_back();
    if (++visits[id] > 1) {
      throw ParseError(where + ".nodes[" + std::to_string(id) + "]",
                       "node reached twice; tree is not binary");
    }
    const TreeNode& node = tree.nodes[id];
    if (!node.is_leaf()) {
      stack.push_back(node.right);
      stack.push_back(node.left);
    }
  }
  for (std::size_t i = 0; i < visits.size(); ++i) {
    if (visits[i] == 0) {
      throw ParseError(where + ".nodes[" + std::to_string(i) + "]",
                       "node unreachable from the root");
    }
  }
}

TreeEnsemble ParseEnsembleJson(const json& doc, const DatasetSchema& schema,
                               const std::string& source) {
  if (!doc.is_object()) throw ParseError(source, "model must be a JSON object");
  TreeEnsemble ensemble;
  ensemble.num_classes = schema.num_classes();
  const std::string kind = doc.value("model_kind", std::string());
  if (kind == "random_forest") {
    ensemble.kind = ModelKind::kRandomForest;
  } else if (kind == "gradient_boosted") {
    ensemble.kind = ModelKind::kGradientBoosted;
  } else {
    throw ParseError(source + ":model_kind", "expected random_forest or gradient_boosted");
  }
  ensemble.base_scores.assign(ensemble.num_classes, 0.0);
  if (doc.contains("base_scores") && !doc["base_scores"].is_null()) {
    const auto& base = doc["base_scores"];
    if (!base.is_array() || base.size() != ensemble.num_classes) {
      throw SchemaMismatchError(source + ":base_scores", "expected one score per class");
    }
    for (std::size_t c = 0; c < base.size(); ++c) {
      ensemble.base_scores[c] = base[c].get<double>();
    }
  }
  if (ensemble.kind == ModelKind::kRandomForest) {
    for (double b : ensemble.base_scores) {
      if (b != 0.0) throw ParseError(source + ":base_scores", "random forests take no base scores");
    }
  }
  if (!doc.contains("trees") || !doc["trees"].is_array()) {
    throw ParseError(source + ":trees", "missing tree list");
  }

  const auto& trees = doc["trees"];
  for (std::size_t t = 0; t < trees.size(); ++t) {
    const std::string tree_where = source + ":trees[" + std::to_string(t) + "]";
    const auto& tree_doc = trees[t];
    if (!tree_doc.is_object() || !tree_doc.contains("nodes") ||
        !tree_doc["nodes"].is_array()) {
      throw ParseError(tree_where, "tree needs a 'nodes' array");
    }
    Tree tree;
    if (tree_doc.contains("target_class") && !tree_doc["target_class"].is_null()) {
      const auto& target = tree_doc["target_class"];
      std::optional<std::size_t> cls;
      if (target.is_number_integer() && target.get<long long>() >= 0) {
        cls = static_cast<std::size_t>(target.get<long long>());
      } else if (target.is_string()) {
        cls = schema.FindClass(target.get<std::string>());
      }
      if (!cls || *cls >= ensemble.num_classes) {
        throw SchemaMismatchError(tree_where + ".target_class", "unknown class");
      }
      tree.target_class = cls;
    }
    if (ensemble.kind == ModelKind::kGradientBoosted && !tree.target_class &&
        ensemble.num_classes != 2) {
      throw ParseError(tree_where, "multi-class boosting trees need a target_class");
    }

    const auto& nodes = tree_doc["nodes"];
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string where = tree_where + ".nodes[" + std::to_string(i) + "]";
      const auto& nd = nodes[i];
      if (!nd.is_object()) throw ParseError(where, "node must be an object");
      TreeNode node;
      if (nd.contains("leaf")) {
        node.kind = NodeKind::kLeaf;
        const auto& leaf = nd["leaf"];
        if (ensemble.kind == ModelKind::kRandomForest) {
          if (!leaf.is_array() || leaf.size() != ensemble.num_classes) {
            throw SchemaMismatchError(where, "forest leaves need one count per class");
          }
          for (const auto& v : leaf) {
            const double count = v.get<double>();
            if (!(count >= 0.0) || !std::isfinite(count)) {
              throw ParseError(where, "leaf counts must be finite and non-negative");
            }
            node.leaf_value.push_back(count);
          }
        } else {
          double value = 0.0;
          if (leaf.is_number()) {
            value = leaf.get<double>();
          } else if (leaf.is_array() && leaf.size() == 1 && leaf[0].is_number()) {
            value = leaf[0].get<double>();
          } else {
            throw ParseError(where, "boosting leaves need one scalar");
          }
          if (!std::isfinite(value)) throw ParseError(where, "leaf value not finite");
          node.leaf_value = {value};
        }
      } else if (nd.contains("attr")) {
        node.attribute = ResolveAttribute(nd["attr"], schema, where);
        node.left = ChildIndex(nd, "left", nodes.size(), where);
        node.right = ChildIndex(nd, "right", nodes.size(), where);
        const AttributeSpec& spec = schema.attribute(node.attribute);
        const std::string split_kind = nd.value("kind", std::string("numeric"));
        if (split_kind == "categorical") {
          if (!spec.is_categorical()) {
            throw SchemaMismatchError(where, "categorical split on numeric attribute '" + spec.name + "'");
          }
          if (!nd.contains("categories") || !nd["categories"].is_array()) {
            throw ParseError(where, "categorical split needs 'categories'");
          }
          node.kind = NodeKind::kCategoricalSplit;
          node.left_categories.assign(spec.categories.size(), false);
          for (const auto& c : nd["categories"]) {
            node.left_categories[ResolveCategory(c, schema, node.attribute, where)] = true;
          }
        } else if (split_kind == "numeric") {
          if (!nd.contains("threshold") || !nd["threshold"].is_number()) {
            throw ParseError(where, "numeric split needs 'threshold'");
          }
          node.threshold = nd["threshold"].get<double>();
          if (spec.is_categorical()) {
            // Ordinal split on category codes: codes <= threshold go left.
            node.kind = NodeKind::kCategoricalSplit;
            node.left_categories.assign(spec.categories.size(), false);
            for (std::size_t k = 0; k < spec.categories.size(); ++k) {
              node.left_categories[k] = static_cast<double>(k) <= node.threshold;
            }
          } else {
            node.kind = NodeKind::kNumericSplit;
          }
        } else {
          throw ParseError(where, "unknown split kind '" + split_kind + "'");
        }
      } else {
        throw ParseError(where, "missing leaf values");
      }
      tree.nodes.push_back(std::move(node));
    }
    ValidateTreeShape(tree, tree_where);
    ensemble.trees.push_back(std::move(tree));
  }
  if (ensemble.trees.empty()) throw ParseError(source + ":trees", "model has no trees");
  return ensemble;
}

TreeEnsemble ParseEnsemble(const std::filesystem::path& path,
                           ModelFormat format, const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open model file");
  if (format == ModelFormat::kGbtText) {
    return ParseGbtText(in, schema, path.string());
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw ParseError(path.string() + ":byte " + std::to_string(e.byte), "invalid JSON");
  }
  return ParseEnsembleJson(doc, schema, path.string());
}

json EnsembleToJson(const TreeEnsemble& ensemble) {
  json trees = json::array();
  for (const auto& tree : ensemble.trees) {
    json nodes = json::array();
    for (const auto& node : tree.nodes) {
      if (node.is_leaf()) {
        if (ensemble.kind == ModelKind::kRandomForest) {
          nodes.push_back({{"leaf", node.leaf_value}});
        } else {
          nodes.push_back({{"leaf", node.leaf_value[0]}});
        }
        continue;
      }
      json entry = {{"attr", node.attribute}, {"left", node.left}, {"right", node.right}};
      if (node.kind == NodeKind::kCategoricalSplit) {
        entry["kind"] = "categorical";
        json cats = json::array();
        for (std::size_t k = 0; k < node.left_categories.size(); ++k) {
          if (node.left_categories[k]) cats.push_back(k);
        }
        entry["categories"] = std::move(cats);
      } else {
        entry["kind"] = "numeric";
        entry["threshold"] = node.threshold;
      }
      nodes.push_back(std::move(entry));
    }
    json target = tree.target_class ? json(*tree.target_class) : json(nullptr);
    trees.push_back({{"target_class", target}, {"nodes", std::move(nodes)}});
  }
  return json{{"model_kind", ensemble.kind == ModelKind::kRandomForest ? "random_forest"
                                                                        : "gradient_boosted"},
              {"base_scores", ensemble.base_scores},
              {"trees", std::move(trees)}};
}

}  // namespace rulescope
