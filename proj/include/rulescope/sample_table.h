#ifndef RULESCOPE_SAMPLE_TABLE_H_
#define RULESCOPE_SAMPLE_TABLE_H_

#include <cstddef>
#include <filesystem>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include "rulescope/schema.h"

namespace rulescope {

enum class Split { kTrain, kTest };

inline constexpr int kNoLabel = -1;

// Dense row-major sample matrix. Categorical values are stored as the
// category index converted to double.
class SampleTable {
 public:
  explicit SampleTable(std::size_t num_attributes)
      : num_attributes_(num_attributes) {}

  void AddRow(std::span<const double> values, int label, Split split);

  std::size_t num_rows() const { return labels_.size(); }
  std::size_t num_attributes() const { return num_attributes_; }

  std::span<const double> row(std::size_t i) const {
    return {values_.data() + i * num_attributes_, num_attributes_};
  }
  double value(std::size_t i, std::size_t attribute) const {
    return values_[i * num_attributes_ + attribute];
  }
  // kNoLabel when the row carries no ground truth.
  int label(std::size_t i) const { return labels_[i]; }
  Split split(std::size_t i) const { return splits_[i]; }

  std::vector<std::size_t> RowsInSplit(Split split) const;

 private:
  std::size_t num_attributes_;
  std::vector<double> values_;
  std::vector<int> labels_;
  std::vector<Split> splits_;
};

// CSV with a header row naming every schema attribute, plus the optional
// `__label__` and `__split__` columns. Rows without a split tag are training
// rows.
SampleTable ParseSamplesCsv(std::istream& in, const DatasetSchema& schema,
                            const std::string& source = "samples");
SampleTable LoadSamples(const std::filesystem::path& path,
                        const DatasetSchema& schema);

}  // namespace rulescope

#endif  // RULESCOPE_SAMPLE_TABLE_H_
