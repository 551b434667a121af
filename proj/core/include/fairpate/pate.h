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

// Teacher ensembles and the end-to-end private pipelines: private group
// labelling of the student pool (SF_S), fair teachers with private label
// transfer (SF_T), and the randomized-response baseline (M).

#ifndef FAIRPATE_PATE_H_
#define FAIRPATE_PATE_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"
#include "fairpate/fairness.h"
#include "fairpate/mlp.h"
#include "fairpate/privacy.h"

namespace fairpate {

enum class TargetSpace { kGroups, kLabels };

struct TeacherEnsemble {
  std::vector<MlpParams> teachers;
  TargetSpace target = TargetSpace::kGroups;
  std::optional<FairnessSpec> fairness;  // set when fair-trained
  // Provenance: row ids of each teacher's shard.
  std::vector<std::vector<int64_t>> shard_row_ids;

  size_t size() const { return teachers.size(); }
  bool fair_trained() const { return fairness.has_value(); }
  int output_dims() const {
    return teachers.empty() ? 0 : teachers.front().arch().num_classes;
  }
  // predictions[k][i] = teacher k's prediction on row i.
  std::vector<std::vector<int>> PredictAll(const Matrix& x) const;
  // Per-row vote counts over output_dims() classes.
  absl::StatusOr<std::vector<VoteCounts>> Votes(const Matrix& x) const;
};

// Teacher k is trained with seed DeriveSeed(config.seed, kTeacherBase + k),
// so the ensemble does not depend on `threads`.
absl::StatusOr<TeacherEnsemble> TrainTeachersGroups(
    std::span<const Dataset> shards, const TrainConfig& config,
    int threads = 1);
absl::StatusOr<TeacherEnsemble> TrainTeachersFair(
    std::span<const Dataset> shards, const FairnessSpec& fairness,
    const TrainConfig& config, int threads = 1);

struct PipelineConfig {
  int num_teachers = 50;
  size_t pool_size = 200;
  double lambda = 1e-3;
  FairnessSpec fairness;
  // Exactly one of sigma / target_epsilon.
  std::optional<double> sigma;
  std::optional<double> target_epsilon;
  double delta = 1e-4;
  TrainConfig train;
  uint64_t seed = 0;
  int threads = 1;
  // SF_T only: never read pool labels; forces lambda = 0.
  bool label_protection = false;
  // SF_T only: rows of every group per shard.
  int min_per_group = 1;

  absl::Status Validate() const;
  // Noise scale: `sigma` when set, else calibrated for target_epsilon.
  absl::StatusOr<double> ResolveSigma() const;
};

struct RunReport {
  std::string method;
  // Calibration target when set, else the accounted value; +inf for
  // non-private runs.
  double epsilon = 0.0;
  double accuracy = 0.0;
  double xi = 0.0;
  std::optional<double> wasserstein;  // when the notion is gdp
  uint64_t seed = 0;
  double wall_ms = 0.0;
  // Diagnostics.
  double sigma = 0.0;
  int64_t queries = 0;
  // Privately released attribute per row (SF_S: pool groups, SF_T: pool
  // labels, M: training groups). Agreement with the truth is computed by the
  // evaluation harness, not by the pipelines.
  std::vector<int> released;
};

// Evaluation on test data against true groups.
struct Evaluation {
  double accuracy = 0.0;
  double xi = 0.0;
  std::optional<double> wasserstein;
};
absl::StatusOr<Evaluation> Evaluate(const MlpParams& model, const Dataset& test,
                                    const FairnessSpec& fairness);

// Private group release for the pool: Ã_i = noisy argmax of the group
// votes on pool row i. `noise` charges one query per row.
absl::StatusOr<std::vector<int>> PrivateGroups(const TeacherEnsemble& ensemble,
                                               const StudentPool& pool,
                                               CachedNoisyVotes& noise);

absl::StatusOr<RunReport> RunSfS(const Dataset& train, const StudentPool& pool,
                                 const Dataset& test,
                                 const PipelineConfig& config);
absl::StatusOr<RunReport> RunSfT(const Dataset& train, const StudentPool& pool,
                                 const Dataset& test,
                                 const PipelineConfig& config);
absl::StatusOr<RunReport> RunBaselineM(const Dataset& train,
                                       const Dataset& test,
                                       const PipelineConfig& config);

// Non-private references trained on the pool with its true groups.
absl::StatusOr<RunReport> RunNonPrivateFair(const StudentPool& pool,
                                            const Dataset& test,
                                            const PipelineConfig& config);
absl::StatusOr<RunReport> RunNonPrivateErm(const StudentPool& pool,
                                           const Dataset& test,
                                           const PipelineConfig& config);

struct AttributeAccuracyRow {
  int num_teachers = 0;
  double mean_accuracy = 0.0;
  std::vector<double> per_seed;
};

// For each K: shard `train` into K, fit group teachers, release Ã on `pool`
// with noise sigma and record P(Ã = A), averaged over seeds.
absl::StatusOr<std::vector<AttributeAccuracyRow>> EnsembleAttributeAccuracy(
    const Dataset& train, const StudentPool& pool,
    std::span<const int> teacher_counts, double sigma,
    std::span<const uint64_t> seeds, const TrainConfig& config,
    int threads = 1);

}  // namespace fairpate

#endif  // FAIRPATE_PATE_H_
