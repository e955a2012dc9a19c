#ifndef RULESCOPE_ENSEMBLE_H_
#define RULESCOPE_ENSEMBLE_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rulescope/schema.h"

namespace rulescope {

enum class ModelKind { kRandomForest, kGradientBoosted };

enum class NodeKind { kLeaf, kNumericSplit, kCategoricalSplit };

// Numeric splits send `x <= threshold` left. Categorical splits send a
// category left iff its bit in `left_categories` is set.
struct TreeNode {
  NodeKind kind = NodeKind::kLeaf;
  std::size_t attribute = 0;
  double threshold = 0.0;
  std::vector<bool> left_categories;
  std::size_t left = 0;
  std::size_t right = 0;
  // Random forest: per-class counts. Gradient boosting: one scalar.
  std::vector<double> leaf_value;

  bool is_leaf() const { return kind == NodeKind::kLeaf; }
  bool GoesLeft(double value) const;
};

struct Tree {
  // Class whose score this tree adds to (gradient boosting, multi-class).
  // Empty for random forests and binary boosting, where leaves contribute to
  // the positive class (index 1).
  std::optional<std::size_t> target_class;
  std::vector<TreeNode> nodes;  // nodes[0] is the root

  std::size_t FindLeaf(std::span<const double> sample) const;
  std::size_t NumLeaves() const;
};

struct TreeEnsemble {
  ModelKind kind = ModelKind::kRandomForest;
  std::size_t num_classes = 2;
  std::vector<Tree> trees;
  // Per-class offsets added to raw scores; zeros for random forests.
  std::vector<double> base_scores;

  std::size_t NumLeaves() const;
};

enum class ModelFormat { kJsonInterchange, kGbtText };

TreeEnsemble ParseEnsembleJson(const nlohmann::json& doc,
                               const DatasetSchema& schema,
                               const std::string& source = "model");
TreeEnsemble ParseGbtText(std::istream& in, const DatasetSchema& schema,
                          const std::string& source = "model");
TreeEnsemble ParseEnsemble(const std::filesystem::path& path,
                           ModelFormat format, const DatasetSchema& schema);

nlohmann::json EnsembleToJson(const TreeEnsemble& ensemble);

// Random forest: majority vote over per-tree leaf argmax. Gradient boosting:
// argmax of base score plus summed leaf values per class. Ties resolve to
// the lowest class index.
std::size_t PredictOriginal(const TreeEnsemble& ensemble,
                            std::span<const double> sample);

// Per-class raw scores behind PredictOriginal (vote counts for forests).
std::vector<double> RawScores(const TreeEnsemble& ensemble,
                              std::span<const double> sample);

// Index of the largest entry; ties go to the lowest index.
std::size_t ArgMax(std::span<const double> values);

}  // namespace rulescope

#endif  // RULESCOPE_ENSEMBLE_H_
