#include "rulescope/sample_table.h"

#include <charconv>
#include <cmath>
#include <fstream>
#include <optional>

#include "rulescope/error.h"

namespace rulescope {
namespace {

constexpr std::string_view kLabelColumn = "__label__";
constexpr std::string_view kSplitColumn = "__split__";

std::string Trim(std::string_view s) {
  std::size_t b = 0;
  std::size_t e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t' || s[e - 1] == '\r')) --e;
  return std::string(s.substr(b, e - b));
}

// Minimal RFC 4180 splitting: quoted fields may contain commas and "".
std::vector<std::string> SplitCsvLine(std::string_view line) {
  std::vector<std::string> cells;
  std::string cell;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      cells.push_back(Trim(cell));
      cell.clear();
    } else {
      cell.push_back(ch);
    }
  }
  cells.push_back(Trim(cell));
  return cells;
}

std::optional<double> ParseNumber(const std::string& token) {
  double value = 0.0;
  const char* first = token.data();
  const char* last = token.data() + token.size();
  if (first != last && *first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last || !std::isfinite(value)) {
    return std::nullopt;
  }
  return value;
}

}  // namespace

void SampleTable::AddRow(std::span<const double> values, int label,
                         Split split) {
  if (values.size() != num_attributes_) {
    throw ValidationError("row arity mismatch");
  }
  values_.insert(values_.end(), values.begin(), values.end());
  labels_.push_back(label);
  splits_.push_back(split);
}

std::vector<std::size_t> SampleTable::RowsInSplit(Split split) const {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < splits_.size(); ++i) {
    if (splits_[i] == split) rows.push_back(i);
  }
  return rows;
}

SampleTable ParseSamplesCsv(std::istream& in, const DatasetSchema& schema,
                            const std::string& source) {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ":1", "missing header row");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  const std::vector<std::string> header = SplitCsvLine(line);

  // Column position -> attribute index, or one of the special columns.
  constexpr std::size_t kLabel = static_cast<std::size_t>(-1);
  constexpr std::size_t kSplit = static_cast<std::size_t>(-2);
  std::vector<std::size_t> column_role(header.size());
  std::vector<bool> seen(schema.num_attributes(), false);
  bool has_label = false;
  bool has_split = false;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const std::string where = source + ":1:" + header[c];
    if (header[c] == kLabelColumn) {
      if (has_label) throw ParseError(where, "duplicate label column");
      column_role[c] = kLabel;
      has_label = true;
    } else if (header[c] == kSplitColumn) {
      if (has_split) throw ParseError(where, "duplicate split column");
      column_role[c] = kSplit;
      has_split = true;
    } else if (auto attr = schema.FindAttribute(header[c])) {
      if (seen[*attr]) throw ParseError(where, "duplicate attribute column");
      seen[*attr] = true;
      column_role[c] = *attr;
    } else {
      throw SchemaMismatchError(where, "column is not a schema attribute");
    }
  }
  for (std::size_t a = 0; a < seen.size(); ++a) {
    if (!seen[a]) {
      throw SchemaMismatchError(source + ":1", "missing column for attribute '" +
                                          schema.attribute(a).name + "'");
    }
  }

  SampleTable table(schema.num_attributes());
  std::vector<double> values(schema.num_attributes());
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (Trim(line).empty()) continue;
    const std::vector<std::string> cells = SplitCsvLine(line);
    const std::string row_where = source + ":" + std::to_string(line_no);
    if (cells.size() != header.size()) {
      throw ParseError(row_where, "expected " + std::to_string(header.size()) +
                                      " cells, found " +
                                      std::to_string(cells.size()));
    }
    int label = kNoLabel;
    Split split = Split::kTrain;
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const std::string where = row_where + ":" + header[c];
      const std::string& cell = cells[c];
      if (column_role[c] == kLabel) {
        if (cell.empty()) continue;
        auto cls = schema.FindClass(cell);
        if (!cls) throw SchemaMismatchError(where, "unknown class label '" + cell + "'");
        label = static_cast<int>(*cls);
      } else if (column_role[c] == kSplit) {
        if (cell.empty() || cell == "train") {
          split = Split::kTrain;
        } else if (cell == "test") {
          split = Split::kTest;
        } else {
          throw ParseError(where, "split must be 'train' or 'test'");
        }
      } else {
        const std::size_t attr = column_role[c];
        if (cell.empty()) throw ParseError(where, "empty cell");
        if (schema.attribute(attr).is_categorical()) {
          auto cat = schema.FindCategory(attr, cell);
          if (!cat) throw ParseError(where, "unknown category '" + cell + "'");
          values[attr] = static_cast<double>(*cat);
        } else {
          auto number = ParseNumber(cell);
          if (!number) throw ParseError(where, "not a number: '" + cell + "'");
          values[attr] = *number;
        }
      }
    }
    table.AddRow(values, label, split);
  }
  if (table.num_rows() == 0) throw ParseError(source, "no data rows");
  return table;
}

SampleTable LoadSamples(const std::filesystem::path& path,
                        const DatasetSchema& schema) {
  std::ifstream in(path);
  if (!in) throw ParseError(path.string(), "cannot open dataset file");
  return ParseSamplesCsv(in, schema, path.string());
}

}  // namespace rulescope
