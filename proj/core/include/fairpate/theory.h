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

// Empirical checks of the fairness-transfer bounds: a student that is
// alpha-fair w.r.t. perturbed groups, and a noisy vote over an ensemble.

#ifndef FAIRPATE_THEORY_H_
#define FAIRPATE_THEORY_H_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"
#include "fairpate/fairness.h"
#include "fairpate/mlp.h"
#include "fairpate/pate.h"

namespace fairpate {

inline constexpr double kBoundTolerance = 0.02;

struct BoundReport {
  std::string kind;  // "transfer" or "vote"
  uint64_t seed = 0;
  double measured = 0.0;
  double bound = 0.0;
  double eta = 0.0;
  double b = 1.0;
  double alpha = 0.0;
  // min_a P(A~ = a) and min_a P(A = a); equal for the vote check.
  double min_prob_released = 0.0;
  double min_prob_true = 0.0;
  double tolerance = kBoundTolerance;
  bool holds = false;

  std::string ToJson() const;
};

// Discrete (X, Y) strata ids in [0, num_strata), every id nonempty.
struct Strata {
  std::vector<int> ids;
  int num_strata = 0;
};

// Cluster x label when the data carries generator cluster ids; otherwise
// each feature is split at its median and combined with the label, using
// as many leading features as fit in `max_strata` cells. Unused cells are
// dropped and the remaining ids renumbered.
absl::StatusOr<Strata> MakeStrata(const Dataset& data, int max_strata = 64);

// max over strata and a of |P^(A~ = a | s) - P^(A = a | s)|.
absl::StatusOr<double> EstimateEtaConditional(std::span<const int> groups,
                                              std::span<const int> released,
                                              int num_groups,
                                              const Strata& strata);

// eta * B / min_prob + alpha.
absl::StatusOr<double> BoundAlphaPrime(double eta, double b, double min_prob,
                                       double alpha);
// eta * B / (min_prob_true - eta) + alpha; needs min_prob_true > eta.
absl::StatusOr<double> BoundAlphaPrimeVariant(double eta, double b,
                                              double min_prob_true,
                                              double alpha);

// Smallest empirical group frequency.
absl::StatusOr<double> MinGroupProbability(std::span<const int> groups,
                                           int num_groups);

// `test` carries the true groups; `released` the perturbed ones. alpha is
// the student's violation w.r.t. `released`, measured the violation w.r.t.
// the true groups.
absl::StatusOr<BoundReport> VerifyTransfer(const MlpParams& student,
                                           const Dataset& test,
                                           std::span<const int> released,
                                           const FairnessSpec& spec,
                                           double tolerance = kBoundTolerance);

// A discrete tuple per row.
using Tuple = std::vector<int>;

// Exact total variation between two empirical distributions:
// 1/2 sum_cells |p(cell) - q(cell)|.
absl::StatusOr<double> EstimateTv(std::span<const Tuple> z,
                                  std::span<const Tuple> z_prime);

// predictions[k][i] = teacher k on row i of `data`. Releases the noisy
// argmax per row once per seed; measured = mean over seeds of the output's
// violation w.r.t. data.groups(); bound = B * max_a TV(Z, Z_a) with
// Z = (teacher predictions, Y). Every group needs >= min_group_rows rows.
absl::StatusOr<BoundReport> VerifyVoteFromPredictions(
    const std::vector<std::vector<int>>& predictions, int num_classes,
    const Dataset& data, double sigma, std::span<const uint64_t> seeds,
    const FairnessSpec& spec, double tolerance = kBoundTolerance,
    size_t min_group_rows = 100);

absl::StatusOr<BoundReport> VerifyVote(const TeacherEnsemble& ensemble,
                                       const Dataset& data, double sigma,
                                       std::span<const uint64_t> seeds,
                                       const FairnessSpec& spec,
                                       double tolerance = kBoundTolerance,
                                       size_t min_group_rows = 100);

// ---------------------------------------------------------------------------
// Seeded trials on synthetic data.

struct TransferTrialConfig {
  SynthParams data;  // seed is overwritten per trial
  double epsilon = 1.0;
  FairnessSpec fairness;
  TrainConfig train;
  double tolerance = kBoundTolerance;
};

// Perturbs train and test groups with randomized response at epsilon, fits
// an alpha-fair student on the perturbed training groups and checks the
// transfer bound on the test split.
absl::StatusOr<BoundReport> RunTransferTrial(const TransferTrialConfig& config,
                                             uint64_t seed);

struct VoteTrialConfig {
  SynthParams data;
  int num_teachers = 5;
  bool fair_teachers = false;
  double sigma = 1.0;
  int noise_draws = 5;
  FairnessSpec fairness;
  TrainConfig train;
  double tolerance = kBoundTolerance;
  int threads = 1;
};

// Trains label teachers on shards of the training split and checks the
// vote bound on the test split.
absl::StatusOr<BoundReport> RunVoteTrial(const VoteTrialConfig& config,
                                         uint64_t seed);

}  // namespace fairpate

#endif  // FAIRPATE_THEORY_H_
