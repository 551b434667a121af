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

// Group fairness functions, the violation functional xi, differentiable
// surrogates, a Lagrangian-dual constrained trainer and Wasserstein metrics.

#ifndef FAIRPATE_FAIRNESS_H_
#define FAIRPATE_FAIRNESS_H_

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"
#include "fairpate/mlp.h"

namespace fairpate {

enum class Notion {
  kDemographicParity,
  kEqualizedOdds,
  kAccuracyParity,
  kGeneralizedDp,
};

// When to apply the dual ascent step on the multipliers.
enum class DualSchedule {
  kPerEpoch,  // once per epoch on the epoch's running statistics
  // After every minibatch on running statistics: an exponential moving
  // average of per-group sums whose window is one epoch of batches.
  kPerBatch,
};

// Which group gaps drive the dual ascent.
enum class DualSignal {
  kSurrogate,  // gaps of the differentiable surrogate
  kHard,       // gaps of the hard (argmax) components
};

struct FairnessSpec {
  Notion notion = Notion::kDemographicParity;
  double alpha = 0.0;
  // Moment order H, used by kGeneralizedDp only.
  int moment_order = 1;
  double multiplier_step = 1e-2;
  DualSchedule schedule = DualSchedule::kPerBatch;
  DualSignal signal = DualSignal::kSurrogate;
  // Fraction of final epochs whose end-of-epoch iterates are candidates for
  // the returned parameters. When the last iterate violates alpha on the
  // training data, the candidate with the smallest hard violation is
  // returned instead (ties to the later epoch). 0 always returns the last
  // iterate.
  double select_window = 0.25;
  // Upper bound of the fairness function; 1 for every built-in notion.
  double bound_b = 1.0;

  absl::Status Validate() const;
  // Number of components c of h.
  int NumComponents() const;
  bool RequiresBinaryLabels() const {
    return notion != Notion::kAccuracyParity;
  }
  // Config key: "dp", "eo", "ap" or "gdp:<H>".
  std::string Key() const;
};

// Parses "dp" | "eo" | "ap" | "gdp:<H>" into a spec with default alpha.
absl::StatusOr<FairnessSpec> ParseNotion(std::string_view key);

// Per-row component values with per-row weights. Component j of group a is
// the weighted mean of values(:, j) over rows in group a with weights
// weights(:, j). Only equalized odds uses non-unit weights (label masks).
struct Components {
  Matrix values;
  Matrix weights;
};

// Hard (indicator) components computed from argmax predictions.
absl::StatusOr<Components> FairnessComponents(const Matrix& probs,
                                              std::span<const int> labels,
                                              const FairnessSpec& spec);
absl::StatusOr<Components> FairnessComponentsFromPredictions(
    std::span<const int> predictions, std::span<const int> labels,
    int num_labels, const FairnessSpec& spec);

// Differentiable surrogates of the components.
absl::StatusOr<Components> SurrogateComponents(const Matrix& probs,
                                               std::span<const int> labels,
                                               const FairnessSpec& spec);

// Signed gaps (group mean - population mean), shape m x c. Entries whose
// group has zero total weight for that component are NaN.
Matrix ComponentGaps(const Components& comps, std::span<const int> groups,
                     int num_groups);

// max_{a,j} |gap(a, j)| with an error if some group has no rows.
absl::StatusOr<double> ViolationFromComponents(const Components& comps,
                                               std::span<const int> groups,
                                               int num_groups);

// Hard violation of `params` on `data` measured against data.groups().
absl::StatusOr<double> ViolationXi(const Dataset& data,
                                   const MlpParams& params,
                                   const FairnessSpec& spec);

// Hard violation of fixed predictions.
absl::StatusOr<double> ViolationXiFromPredictions(
    std::span<const int> predictions, std::span<const int> labels,
    std::span<const int> groups, int num_groups, int num_labels,
    const FairnessSpec& spec);

// Optional observer of the dual state after each update (for tests).
struct FairTrainTrace {
  std::vector<double> min_multiplier;  // per dual update
  std::vector<double> max_violation;   // per dual update
  std::vector<double> epoch_xi;        // hard training xi per epoch
  Matrix final_multipliers;            // m x c
  int selected_epoch = -1;             // epoch of the returned iterate
};

// Minimizes cross-entropy + lambda * ||theta - theta_star||^2 +
// sum_{a,j} mu_{a,j} * max(0, |gap_{a,j}| - alpha) with dual ascent
// mu <- max(0, mu + step * (|gap| - alpha)).
absl::StatusOr<MlpParams> TrainFair(const Dataset& data,
                                    const FairnessSpec& spec,
                                    const TrainConfig& config,
                                    const MlpParams* theta_star = nullptr,
                                    double lambda = 0.0,
                                    FairTrainTrace* trace = nullptr);

// 1-Wasserstein distance between two empirical distributions.
absl::StatusOr<double> Wasserstein1d(std::span<const double> a,
                                     std::span<const double> b);

// max_a W1(scores of group a, scores of all rows) where scores are the
// predicted class-1 probabilities.
absl::StatusOr<double> MaxGroupWasserstein(const Dataset& data,
                                           const MlpParams& params);
absl::StatusOr<double> MaxGroupWassersteinFromScores(
    std::span<const double> scores, std::span<const int> groups,
    int num_groups);

}  // namespace fairpate

#endif  // FAIRPATE_FAIRNESS_H_
