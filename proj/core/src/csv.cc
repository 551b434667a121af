// Copyright 2026 The fairpate Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include <charconv>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/ascii.h"
#include "absl/strings/cord.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fairpate/dataset.h"

namespace fairpate {
namespace {

constexpr char kCsvErrorUrl[] = "fairpate/csv_error";

absl::Status CsvError(absl::StatusCode code, CsvErrorKind kind,
                      std::string message) {
  absl::Status status(code, message);
  status.SetPayload(kCsvErrorUrl,
                    absl::Cord(std::to_string(static_cast<int>(kind))));
  return status;
}

// Splits one CSV record. Supports double-quoted fields with "" escapes.
std::vector<std::string> SplitRecord(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  bool quoted = false;
  for (size_t i = 0; i < line.size(); ++i) {
    const char ch = line[i];
    if (quoted) {
      if (ch == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur.push_back(ch);
      }
    } else if (ch == '"') {
      quoted = true;
    } else if (ch == ',') {
      fields.push_back(std::string(absl::StripAsciiWhitespace(cur)));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  fields.push_back(std::string(absl::StripAsciiWhitespace(cur)));
  return fields;
}

bool ParseDouble(const std::string& s, double& out) {
  if (s.empty()) return false;
  const char* begin = s.data();
  const char* end = s.data() + s.size();
  if (*begin == '+') ++begin;
  auto [ptr, ec] = std::from_chars(begin, end, out);
  return ec == std::errc() && ptr == end;
}

}  // namespace

CsvErrorKind GetCsvErrorKind(const absl::Status& status) {
  if (status.ok()) return CsvErrorKind::kNone;
  const auto payload = status.GetPayload(kCsvErrorUrl);
  if (!payload.has_value()) return CsvErrorKind::kMalformed;
  return static_cast<CsvErrorKind>(std::stoi(std::string(*payload)));
}

absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                const CsvSchema& schema) {
  std::ifstream in(path);
  if (!in) {
    return CsvError(absl::StatusCode::kNotFound, CsvErrorKind::kMissingFile,
                    absl::StrCat("cannot open CSV file: ", path));
  }

  int group_cols = 0, label_cols = 0, feature_cols = 0;
  for (const ColumnSpec& c : schema.columns) {
    switch (c.role) {
      case ColumnRole::kGroup: ++group_cols; break;
      case ColumnRole::kLabel: ++label_cols; break;
      case ColumnRole::kNumeric:
      case ColumnRole::kCategorical: ++feature_cols; break;
      case ColumnRole::kIgnore: break;
    }
    if ((c.role == ColumnRole::kCategorical || c.role == ColumnRole::kGroup ||
         c.role == ColumnRole::kLabel) &&
        c.categories.empty()) {
      return CsvError(absl::StatusCode::kInvalidArgument,
                      CsvErrorKind::kMalformed,
                      absl::StrCat("column '", c.name,
                                   "' needs an explicit category list"));
    }
  }
  if (group_cols != 1 || label_cols != 1 || feature_cols < 1) {
    return CsvError(absl::StatusCode::kInvalidArgument,
                    CsvErrorKind::kMalformed,
                    "schema needs one group column, one label column and at "
                    "least one feature column");
  }

  std::string line;
  bool have_header = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!absl::StripAsciiWhitespace(line).empty()) {
      have_header = true;
      break;
    }
  }
  if (!have_header) {
    return CsvError(absl::StatusCode::kFailedPrecondition,
                    CsvErrorKind::kEmptyFile,
                    absl::StrCat("CSV file is empty: ", path));
  }
  const std::vector<std::string> header = SplitRecord(line);
  std::map<std::string, size_t> position;
  for (size_t i = 0; i < header.size(); ++i) position[header[i]] = i;

  std::vector<size_t> source(schema.columns.size());
  int out_dims = 0;
  for (size_t c = 0; c < schema.columns.size(); ++c) {
    const ColumnSpec& spec = schema.columns[c];
    auto it = position.find(spec.name);
    if (it == position.end()) {
      return CsvError(absl::StatusCode::kInvalidArgument,
                      CsvErrorKind::kMalformed,
                      absl::StrCat("column '", spec.name, "' not in header"));
    }
    source[c] = it->second;
    if (spec.role == ColumnRole::kNumeric) out_dims += 1;
    if (spec.role == ColumnRole::kCategorical) {
      out_dims += static_cast<int>(spec.categories.size());
    }
  }

  std::vector<std::vector<double>> rows;
  std::vector<int> groups, labels;
  int num_groups = 0, num_labels = 0;
  size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (absl::StripAsciiWhitespace(line).empty()) continue;
    const std::vector<std::string> fields = SplitRecord(line);
    if (fields.size() != header.size()) {
      return CsvError(absl::StatusCode::kInvalidArgument,
                      CsvErrorKind::kMalformed,
                      absl::StrFormat("line %d has %d fields, header has %d",
                                      line_no, fields.size(), header.size()));
    }
    std::vector<double> row;
    row.reserve(static_cast<size_t>(out_dims));
    for (size_t c = 0; c < schema.columns.size(); ++c) {
      const ColumnSpec& spec = schema.columns[c];
      const std::string& value = fields[source[c]];
      if (spec.role == ColumnRole::kIgnore) continue;
      if (spec.role == ColumnRole::kNumeric) {
        double v;
        if (!ParseDouble(value, v)) {
          return CsvError(
              absl::StatusCode::kInvalidArgument, CsvErrorKind::kNonNumeric,
              absl::StrFormat("line %d: non-numeric value '%s' in column '%s'",
                              line_no, value, spec.name));
        }
        row.push_back(v);
        continue;
      }
      int code = -1;
      for (size_t k = 0; k < spec.categories.size(); ++k) {
        if (spec.categories[k] == value) code = static_cast<int>(k);
      }
      if (code < 0) {
        return CsvError(
            absl::StatusCode::kOutOfRange, CsvErrorKind::kUnknownCategory,
            absl::StrFormat("line %d: unknown category '%s' in column '%s'",
                            line_no, value, spec.name));
      }
      if (spec.role == ColumnRole::kCategorical) {
        for (size_t k = 0; k < spec.categories.size(); ++k) {
          row.push_back(static_cast<int>(k) == code ? 1.0 : 0.0);
        }
      } else if (spec.role == ColumnRole::kGroup) {
        groups.push_back(code);
        num_groups = static_cast<int>(spec.categories.size());
      } else {
        labels.push_back(code);
        num_labels = static_cast<int>(spec.categories.size());
      }
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) {
    return CsvError(absl::StatusCode::kFailedPrecondition,
                    CsvErrorKind::kEmptyFile,
                    absl::StrCat("CSV file has a header but no rows: ", path));
  }
  Matrix x(static_cast<Eigen::Index>(rows.size()), out_dims);
  for (size_t i = 0; i < rows.size(); ++i) {
    for (int j = 0; j < out_dims; ++j) {
      x(static_cast<Eigen::Index>(i), j) = rows[i][static_cast<size_t>(j)];
    }
  }
  return Dataset::Create(std::move(x), std::move(groups), std::move(labels),
                         num_groups, num_labels);
}

absl::Status WriteCsv(const Dataset& data, const std::string& path) {
  std::ofstream out(path);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (int j = 0; j < data.dims(); ++j) out << 'x' << j << ',';
  out << "group,label\n";
  for (size_t i = 0; i < data.size(); ++i) {
    for (int j = 0; j < data.dims(); ++j) {
      out << absl::StrFormat("%.17g",
                             data.features()(static_cast<Eigen::Index>(i), j))
          << ',';
    }
    out << data.groups()[i] << ',' << data.labels()[i] << '\n';
  }
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

}  // namespace fairpate
