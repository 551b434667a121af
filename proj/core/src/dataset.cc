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

#include "fairpate/dataset.h"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <utility>

#include "absl/strings/str_cat.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"

namespace fairpate {

absl::StatusOr<Dataset> Dataset::Create(Matrix features,
                                        std::vector<int> groups,
                                        std::vector<int> labels,
                                        int num_groups, int num_labels,
                                        std::vector<int64_t> row_ids,
                                        std::vector<int> clusters) {
  const size_t n = groups.size();
  if (labels.size() != n || static_cast<size_t>(features.rows()) != n) {
    return absl::InvalidArgumentError(absl::StrCat(
        "Dataset columns differ in length: features=", features.rows(),
        " groups=", n, " labels=", labels.size()));
  }
  if (num_groups < 1 || num_labels < 1) {
    return absl::InvalidArgumentError("group and label counts must be >= 1");
  }
  for (size_t i = 0; i < n; ++i) {
    if (groups[i] < 0 || groups[i] >= num_groups) {
      return absl::InvalidArgumentError(
          absl::StrCat("group ", groups[i], " at row ", i, " not in [0, ",
                       num_groups, ")"));
    }
    if (labels[i] < 0 || labels[i] >= num_labels) {
      return absl::InvalidArgumentError(
          absl::StrCat("label ", labels[i], " at row ", i, " not in [0, ",
                       num_labels, ")"));
    }
  }
  if (row_ids.empty()) {
    row_ids.resize(n);
    std::iota(row_ids.begin(), row_ids.end(), int64_t{0});
  } else if (row_ids.size() != n) {
    return absl::InvalidArgumentError("row_ids length mismatch");
  }
  if (!clusters.empty() && clusters.size() != n) {
    return absl::InvalidArgumentError("clusters length mismatch");
  }
  Dataset d;
  d.features_ = std::move(features);
  d.groups_ = std::move(groups);
  d.labels_ = std::move(labels);
  d.row_ids_ = std::move(row_ids);
  d.clusters_ = std::move(clusters);
  d.num_groups_ = num_groups;
  d.num_labels_ = num_labels;
  return d;
}

Dataset Dataset::Subset(std::span<const size_t> rows) const {
  Dataset d;
  d.num_groups_ = num_groups_;
  d.num_labels_ = num_labels_;
  d.features_.resize(static_cast<Eigen::Index>(rows.size()), features_.cols());
  d.groups_.reserve(rows.size());
  d.labels_.reserve(rows.size());
  d.row_ids_.reserve(rows.size());
  if (!clusters_.empty()) d.clusters_.reserve(rows.size());
  for (size_t k = 0; k < rows.size(); ++k) {
    const size_t i = rows[k];
    d.features_.row(static_cast<Eigen::Index>(k)) =
        features_.row(static_cast<Eigen::Index>(i));
    d.groups_.push_back(groups_[i]);
    d.labels_.push_back(labels_[i]);
    d.row_ids_.push_back(row_ids_[i]);
    if (!clusters_.empty()) d.clusters_.push_back(clusters_[i]);
  }
  return d;
}

absl::StatusOr<Dataset> Dataset::WithLabels(std::vector<int> labels) const {
  return Create(features_, groups_, std::move(labels), num_groups_,
                num_labels_, row_ids_, clusters_);
}

absl::StatusOr<Dataset> Dataset::WithGroups(std::vector<int> groups) const {
  return Create(features_, std::move(groups), labels_, num_groups_,
                num_labels_, row_ids_, clusters_);
}

absl::StatusOr<Dataset> Dataset::WithFeatures(Matrix features) const {
  return Create(std::move(features), groups_, labels_, num_groups_,
                num_labels_, row_ids_, clusters_);
}

Dataset Dataset::GroupsAsLabels() const {
  Dataset d = *this;
  d.labels_ = groups_;
  d.num_labels_ = num_groups_;
  return d;
}

std::vector<size_t> Dataset::GroupCounts() const {
  std::vector<size_t> counts(static_cast<size_t>(num_groups_), 0);
  for (int g : groups_) ++counts[static_cast<size_t>(g)];
  return counts;
}

absl::StatusOr<Dataset> Concatenate(std::span<const Dataset> parts) {
  if (parts.empty()) return absl::InvalidArgumentError("nothing to concatenate");
  const Dataset& first = parts.front();
  size_t total = 0;
  int with_clusters = 0, nonempty = 0;
  for (const Dataset& p : parts) {
    if (p.dims() != first.dims() || p.num_groups() != first.num_groups() ||
        p.num_labels() != first.num_labels()) {
      return absl::InvalidArgumentError("incompatible datasets");
    }
    if (!p.empty()) {
      ++nonempty;
      if (p.has_clusters()) ++with_clusters;
    }
    total += p.size();
  }
  if (with_clusters != 0 && with_clusters != nonempty) {
    return absl::InvalidArgumentError("cluster column present in some parts");
  }
  Matrix x(static_cast<Eigen::Index>(total), first.dims());
  std::vector<int> groups, labels, clusters;
  std::vector<int64_t> ids;
  Eigen::Index row = 0;
  for (const Dataset& p : parts) {
    if (!p.empty()) {
      x.middleRows(row, static_cast<Eigen::Index>(p.size())) = p.features();
    }
    row += static_cast<Eigen::Index>(p.size());
    groups.insert(groups.end(), p.groups().begin(), p.groups().end());
    labels.insert(labels.end(), p.labels().begin(), p.labels().end());
    ids.insert(ids.end(), p.row_ids().begin(), p.row_ids().end());
    clusters.insert(clusters.end(), p.clusters().begin(), p.clusters().end());
  }
  return Dataset::Create(std::move(x), std::move(groups), std::move(labels),
                         first.num_groups(), first.num_labels(), std::move(ids),
                         std::move(clusters));
}

// ---------------------------------------------------------------------------

StudentPool::StudentPool(Dataset data, bool labels_hidden)
    : data_(std::move(data)),
      labels_hidden_(labels_hidden),
      counters_(std::make_shared<Counters>()) {}

absl::StatusOr<std::span<const int>> StudentPool::labels() const {
  if (labels_hidden_) {
    return absl::FailedPreconditionError(
        "student pool labels are hidden in label-protection mode");
  }
  counters_->label_reads.fetch_add(1);
  return data_.labels();
}

std::span<const int> StudentPool::RevealGroupsForEvaluation() const {
  counters_->group_reads.fetch_add(1);
  return data_.groups();
}

const Dataset& StudentPool::RevealForEvaluation() const {
  counters_->group_reads.fetch_add(1);
  counters_->label_reads.fetch_add(1);
  return data_;
}

StudentPool StudentPool::WithHiddenLabels() const {
  StudentPool p(data_, /*labels_hidden=*/true);
  return p;
}

// ---------------------------------------------------------------------------

absl::StatusOr<std::pair<Dataset, StandardizeStats>> Standardize(
    const Dataset& data, const StandardizeStats* stats) {
  const Eigen::Index d = data.dims();
  StandardizeStats fitted;
  if (stats != nullptr) {
    if (stats->means.size() != d || stats->stds.size() != d) {
      return absl::InvalidArgumentError(
          absl::StrCat("standardization stats have dimension ",
                       stats->means.size(), ", data has ", d));
    }
    fitted = *stats;
  } else {
    if (data.empty()) {
      return absl::InvalidArgumentError("cannot fit stats on an empty dataset");
    }
    const double n = static_cast<double>(data.size());
    fitted.means = data.features().colwise().mean().transpose();
    fitted.stds.resize(d);
    for (Eigen::Index j = 0; j < d; ++j) {
      const double var =
          (data.features().col(j).array() - fitted.means(j)).square().sum() / n;
      fitted.stds(j) = std::max(std::sqrt(var), kStdFloor);
    }
  }
  Matrix x = data.features();
  for (Eigen::Index j = 0; j < d; ++j) {
    if (fitted.stds(j) <= kStdFloor) {
      x.col(j).setZero();
    } else {
      x.col(j) = (x.col(j).array() - fitted.means(j)) / fitted.stds(j);
    }
  }
  FAIRPATE_ASSIGN_OR_RETURN(Dataset out, data.WithFeatures(std::move(x)));
  return std::make_pair(std::move(out), std::move(fitted));
}

// ---------------------------------------------------------------------------

std::vector<size_t> LargestRemainderSizes(size_t n,
                                          std::span<const double> fracs) {
  std::vector<size_t> sizes(fracs.size());
  std::vector<double> rem(fracs.size());
  size_t assigned = 0;
  for (size_t i = 0; i < fracs.size(); ++i) {
    const double exact = fracs[i] * static_cast<double>(n);
    // Guard against 0.7 * 100 = 70.00000000000001 style representation error.
    const double fl = std::floor(exact + 1e-9);
    sizes[i] = static_cast<size_t>(fl);
    rem[i] = std::max(0.0, exact - fl);
    assigned += sizes[i];
  }
  std::vector<size_t> order(fracs.size());
  std::iota(order.begin(), order.end(), size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](size_t a, size_t b) { return rem[a] > rem[b] + 1e-12; });
  for (size_t k = 0; assigned < n && k < order.size(); ++k, ++assigned) {
    ++sizes[order[k]];
  }
  return sizes;
}

absl::StatusOr<SplitResult> Split(const Dataset& data, const SplitSpec& spec) {
  const double fracs[3] = {spec.train_frac, spec.eval_frac, spec.test_frac};
  for (double f : fracs) {
    if (!(f >= 0.0)) {
      return absl::InvalidArgumentError("split fractions must be nonnegative");
    }
  }
  if (std::abs(fracs[0] + fracs[1] + fracs[2] - 1.0) > 1e-12) {
    return absl::InvalidArgumentError("split fractions must sum to 1");
  }
  const size_t n = data.size();
  const std::vector<size_t> sizes = LargestRemainderSizes(n, fracs);
  if (!spec.allow_empty) {
    if (n < 10) {
      return absl::InvalidArgumentError(
          absl::StrCat("split needs at least 10 rows, got ", n));
    }
    for (size_t s : sizes) {
      if (s == 0) {
        return absl::InvalidArgumentError(
            absl::StrCat("n=", n, " too small to give every split a row"));
      }
    }
  }
  Rng rng(spec.seed);
  const std::vector<size_t> perm = rng.Permutation(n);
  std::span<const size_t> all(perm);
  SplitResult out;
  out.train = data.Subset(all.subspan(0, sizes[0]));
  out.eval = data.Subset(all.subspan(sizes[0], sizes[1]));
  out.test = data.Subset(all.subspan(sizes[0] + sizes[1], sizes[2]));
  return out;
}

absl::StatusOr<std::vector<Dataset>> ShardTeachers(const Dataset& train,
                                                   int num_shards,
                                                   uint64_t seed,
                                                   int min_per_group) {
  if (num_shards < 1) {
    return absl::InvalidArgumentError("number of shards must be >= 1");
  }
  const size_t k = static_cast<size_t>(num_shards);
  if (train.size() < k) {
    return absl::InvalidArgumentError(absl::StrCat(
        "cannot split ", train.size(), " rows into ", num_shards, " shards"));
  }
  if (min_per_group < 0) {
    return absl::InvalidArgumentError("min_per_group must be >= 0");
  }
  Rng rng(seed);
  std::vector<std::vector<size_t>> members(k);
  if (min_per_group == 0) {
    const std::vector<size_t> perm = rng.Permutation(train.size());
    for (size_t i = 0; i < perm.size(); ++i) members[i % k].push_back(perm[i]);
  } else {
    const std::vector<size_t> counts = train.GroupCounts();
    for (size_t g = 0; g < counts.size(); ++g) {
      if (counts[g] < k * static_cast<size_t>(min_per_group)) {
        return absl::FailedPreconditionError(absl::StrCat(
            "group ", g, " has ", counts[g], " rows; ", num_shards,
            " shards with ", min_per_group, " rows each need ",
            k * static_cast<size_t>(min_per_group)));
      }
    }
    std::vector<std::vector<size_t>> by_group(counts.size());
    for (size_t i = 0; i < train.size(); ++i) {
      by_group[static_cast<size_t>(train.groups()[i])].push_back(i);
    }
    size_t next = 0;
    for (auto& rows : by_group) {
      rng.Shuffle(std::span<size_t>(rows));
      for (size_t i : rows) {
        members[next].push_back(i);
        next = (next + 1) % k;
      }
    }
  }
  std::vector<Dataset> shards;
  shards.reserve(k);
  for (const auto& rows : members) shards.push_back(train.Subset(rows));
  return shards;
}

absl::StatusOr<StudentPool> MakeStudentPool(const Dataset& source, size_t s,
                                            uint64_t seed) {
  if (s == 0) return absl::InvalidArgumentError("student pool size must be > 0");
  if (s > source.size()) {
    return absl::InvalidArgumentError(absl::StrCat(
        "student pool size ", s, " exceeds source size ", source.size()));
  }
  Rng rng(seed);
  std::vector<size_t> perm = rng.Permutation(source.size());
  perm.resize(s);
  return StudentPool(source.Subset(perm));
}

// ---------------------------------------------------------------------------

absl::StatusOr<Dataset> SynthBiased(const SynthParams& p) {
  if (p.m < 2) return absl::InvalidArgumentError("synthetic data needs m >= 2");
  if (p.d < 2) return absl::InvalidArgumentError("synthetic data needs d >= 2");
  if (p.n < static_cast<size_t>(4 * p.m)) {
    return absl::InvalidArgumentError("synthetic data needs n >= 4m");
  }
  if (!(p.gap >= 0.0) || !(p.noise >= 0.0)) {
    return absl::InvalidArgumentError("gap and noise must be >= 0");
  }
  if (!(p.minority_share > 0.0 && p.minority_share < 1.0)) {
    return absl::InvalidArgumentError("minority_share must be in (0, 1)");
  }
  const int m = p.m;
  std::vector<double> cdf(static_cast<size_t>(m));
  double acc = 0.0;
  double mean_level = 0.0;
  for (int a = 0; a < m; ++a) {
    const double prob =
        a == 0 ? 1.0 - p.minority_share : p.minority_share / (m - 1);
    acc += prob;
    cdf[static_cast<size_t>(a)] = acc;
    mean_level += prob * static_cast<double>(a) / (m - 1);
  }
  cdf.back() = 1.0;

  Rng rng(p.seed);
  Matrix x(static_cast<Eigen::Index>(p.n), p.d);
  std::vector<int> groups(p.n), labels(p.n), clusters(p.n);
  const double score_scale = 1.0 / std::sqrt(static_cast<double>(p.d - 1));
  for (size_t i = 0; i < p.n; ++i) {
    const double u = rng.Uniform();
    int a = 0;
    while (u >= cdf[static_cast<size_t>(a)]) ++a;
    const int c = static_cast<int>(rng.UniformInt(2));
    const auto r = static_cast<Eigen::Index>(i);
    for (int j = 0; j < p.d; ++j) x(r, j) = rng.Gaussian();
    x(r, 0) += p.group_shift * a;
    x(r, 1) += c == 0 ? -1.0 : 1.0;
    double score = 0.0;
    for (int j = 1; j < p.d; ++j) score += x(r, j);
    score *= score_scale;
    const double level = static_cast<double>(a) / (m - 1) - mean_level;
    const double z = rng.Gaussian();
    groups[i] = a;
    clusters[i] = 2 * a + c;
    labels[i] = score + p.gap * 0.5 * level + p.noise * z > 0.0 ? 1 : 0;
  }
  return Dataset::Create(std::move(x), std::move(groups), std::move(labels), m,
                         2, {}, std::move(clusters));
}

}  // namespace fairpate
