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

#ifndef FAIRPATE_DATASET_H_
#define FAIRPATE_DATASET_H_

#include <atomic>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"

namespace fairpate {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic,
                             Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

// Rows of (features, group attribute, label). Immutable once built; all
// transformations return new datasets. Optional columns: `row_ids` records
// the provenance of each row in the originally loaded data, `clusters` holds
// the generator's latent cluster id for synthetic data.
class Dataset {
 public:
  Dataset() = default;

  static absl::StatusOr<Dataset> Create(Matrix features,
                                        std::vector<int> groups,
                                        std::vector<int> labels,
                                        int num_groups, int num_labels,
                                        std::vector<int64_t> row_ids = {},
                                        std::vector<int> clusters = {});

  size_t size() const { return groups_.size(); }
  bool empty() const { return groups_.empty(); }
  int dims() const { return static_cast<int>(features_.cols()); }
  int num_groups() const { return num_groups_; }
  int num_labels() const { return num_labels_; }

  const Matrix& features() const { return features_; }
  std::span<const int> groups() const { return groups_; }
  std::span<const int> labels() const { return labels_; }
  std::span<const int64_t> row_ids() const { return row_ids_; }
  std::span<const int> clusters() const { return clusters_; }
  bool has_clusters() const { return !clusters_.empty(); }

  // Rows in the given order (duplicates allowed).
  Dataset Subset(std::span<const size_t> rows) const;

  absl::StatusOr<Dataset> WithLabels(std::vector<int> labels) const;
  absl::StatusOr<Dataset> WithGroups(std::vector<int> groups) const;
  absl::StatusOr<Dataset> WithFeatures(Matrix features) const;

  // Copy whose label column is the group column, for models that predict
  // the group attribute from features.
  Dataset GroupsAsLabels() const;

  // Number of rows in each group.
  std::vector<size_t> GroupCounts() const;

 private:
  Matrix features_;
  std::vector<int> groups_;
  std::vector<int> labels_;
  std::vector<int64_t> row_ids_;
  std::vector<int> clusters_;
  int num_groups_ = 0;
  int num_labels_ = 0;
};

// Concatenates datasets that share dims, group and label counts.
absl::StatusOr<Dataset> Concatenate(std::span<const Dataset> parts);

// ---------------------------------------------------------------------------
// Student pool with unrevealed group attributes.
//
// Pipelines see only features and (unless hidden) labels. The group column
// can be read through RevealGroupsForEvaluation(), which is reserved for the
// evaluation harness; every call is counted so tests can assert that a
// pipeline never touched it. Label reads are counted the same way.
class StudentPool {
 public:
  explicit StudentPool(Dataset data, bool labels_hidden = false);

  size_t size() const { return data_.size(); }
  int dims() const { return data_.dims(); }
  int num_groups() const { return data_.num_groups(); }
  int num_labels() const { return data_.num_labels(); }
  const Matrix& features() const { return data_.features(); }
  std::span<const int64_t> row_ids() const { return data_.row_ids(); }

  // FailedPrecondition when labels are hidden.
  absl::StatusOr<std::span<const int>> labels() const;

  std::span<const int> RevealGroupsForEvaluation() const;
  const Dataset& RevealForEvaluation() const;

  StudentPool WithHiddenLabels() const;
  bool labels_hidden() const { return labels_hidden_; }

  int group_reads() const { return counters_->group_reads.load(); }
  int label_reads() const { return counters_->label_reads.load(); }

 private:
  struct Counters {
    std::atomic<int> group_reads{0};
    std::atomic<int> label_reads{0};
  };

  Dataset data_;
  bool labels_hidden_ = false;
  std::shared_ptr<Counters> counters_;
};

// ---------------------------------------------------------------------------
// Standardization.

struct StandardizeStats {
  Vector means;
  Vector stds;
};

inline constexpr double kStdFloor = 1e-8;

// Fits population mean/std on `data` when `stats` is null, otherwise applies
// the given statistics. Constant features map to 0.
absl::StatusOr<std::pair<Dataset, StandardizeStats>> Standardize(
    const Dataset& data, const StandardizeStats* stats = nullptr);

// ---------------------------------------------------------------------------
// Splits.

struct SplitSpec {
  double train_frac = 0.70;
  double eval_frac = 0.05;
  double test_frac = 0.25;
  uint64_t seed = 0;
  // When false, every part must receive at least one row.
  bool allow_empty = false;
};

struct SplitResult {
  Dataset train;
  Dataset eval;
  Dataset test;
};

// Largest-remainder part sizes for `n` rows; ties go to the earlier part.
std::vector<size_t> LargestRemainderSizes(size_t n,
                                          std::span<const double> fracs);

absl::StatusOr<SplitResult> Split(const Dataset& data, const SplitSpec& spec);

// Partitions `train` into `num_shards` disjoint shards whose sizes differ by
// at most one. With min_per_group > 0 rows are dealt round-robin per group so
// that every shard holds at least min_per_group rows of every group.
absl::StatusOr<std::vector<Dataset>> ShardTeachers(const Dataset& train,
                                                   int num_shards,
                                                   uint64_t seed,
                                                   int min_per_group = 0);

// Samples `s` rows without replacement; the result hides its group column.
absl::StatusOr<StudentPool> MakeStudentPool(const Dataset& source, size_t s,
                                            uint64_t seed);

// ---------------------------------------------------------------------------
// Synthetic biased data.
//
// Group a is drawn with probability 1 - minority_share for a = 0 and
// minority_share / (m - 1) otherwise. Each row belongs to one of two latent
// clusters per group (cluster id = 2a + c). Feature 0 is centered at
// group_shift * a, feature 1 at -1 / +1 by cluster, the rest are standard
// normal. The label is
//   y = 1{ s + gap * 0.5 * (a/(m-1) - E[a/(m-1)]) + noise * z > 0 },
// with s = (x_1 + ... + x_{d-1}) / sqrt(d-1) and z standard normal, so the
// label score is orthogonal to the group direction and base rates differ
// across groups only through `gap`.
struct SynthParams {
  size_t n = 5000;
  int d = 4;
  int m = 2;
  double gap = 3.0;
  double noise = 1.0;
  uint64_t seed = 0;
  double group_shift = 3.0;
  double minority_share = 0.3;
};

absl::StatusOr<Dataset> SynthBiased(const SynthParams& params);

// ---------------------------------------------------------------------------
// CSV input.

enum class ColumnRole { kNumeric, kCategorical, kGroup, kLabel, kIgnore };

struct ColumnSpec {
  std::string name;
  ColumnRole role = ColumnRole::kNumeric;
  // Required for kCategorical, kGroup and kLabel; order fixes the encoding.
  std::vector<std::string> categories;
};

struct CsvSchema {
  std::vector<ColumnSpec> columns;
};

enum class CsvErrorKind {
  kNone,
  kMissingFile,
  kEmptyFile,
  kUnknownCategory,
  kNonNumeric,
  kMalformed,
};

// Classifies a status returned by LoadCsv.
CsvErrorKind GetCsvErrorKind(const absl::Status& status);

// Loads a headered CSV. Categorical features are one-hot encoded in declared
// category order; group and label columns are integer coded the same way.
absl::StatusOr<Dataset> LoadCsv(const std::string& path,
                                const CsvSchema& schema);

// Writes features as x0..x{d-1} followed by group and label columns.
absl::Status WriteCsv(const Dataset& data, const std::string& path);

}  // namespace fairpate

#endif  // FAIRPATE_DATASET_H_
