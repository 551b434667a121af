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

// Vote counting, Gaussian noisy argmax, Renyi-DP accounting and randomized
// response.

#ifndef FAIRPATE_PRIVACY_H_
#define FAIRPATE_PRIVACY_H_

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"
#include "fairpate/random.h"

namespace fairpate {

using VoteCounts = std::vector<int>;

// counts[j] = number of predictions equal to j.
absl::StatusOr<VoteCounts> CountVotes(std::span<const int> predictions, int r);

// Index of the largest count; ties go to the lowest index.
int Argmax(std::span<const int> counts);

// argmax_j (counts[j] + N(0, sigma^2)). Draws one Gaussian per count, even
// when sigma = 0, so the generator advances identically for every sigma.
int NoisyArgmax(std::span<const int> counts, double sigma, Rng& rng);

// Answers noisy-argmax queries once per query id and caches the answer.
// Every distinct id is charged exactly one query; repeated calls for the
// same id return the cached answer without further charge. The noise for a
// query is drawn from DeriveSeed(seed, id), so answers do not depend on the
// order in which queries arrive. Thread-safe.
class CachedNoisyVotes {
 public:
  CachedNoisyVotes(double sigma, uint64_t seed) : sigma_(sigma), seed_(seed) {}

  int Answer(uint64_t query_id, std::span<const int> counts);
  int64_t queries_charged() const;
  double sigma() const { return sigma_; }

 private:
  double sigma_;
  uint64_t seed_;
  mutable std::mutex mu_;
  std::map<uint64_t, int> cache_;
};

// ---------------------------------------------------------------------------
// Accounting.

// RDP of one Gaussian noisy-argmax query: gamma / sigma^2.
absl::StatusOr<double> RdpEpsilon(double sigma, double gamma);

// RDP of s composed queries at order gamma: s * gamma / sigma^2.
absl::StatusOr<double> Compose(double sigma, int64_t s, double gamma);

struct RdpAccount {
  double sigma = 0.0;
  int64_t queries = 0;
  double delta = 1e-4;

  // sigma >= 0 (0 is the non-private debug mode), delta in (0, 1),
  // queries >= 0.
  absl::Status Validate() const;
  RdpAccount WithQueries(int64_t more) const {
    return RdpAccount{sigma, queries + more, delta};
  }
};

struct DpGuarantee {
  double epsilon = 0.0;
  // Optimal Renyi order; empty when s = 0 (any order works) or sigma = 0.
  std::optional<double> gamma_star;
};

// epsilon = min_{gamma > 1} s*gamma/sigma^2 + ln(1/delta)/(gamma - 1),
// attained at gamma* = 1 + sigma * sqrt(ln(1/delta) / s). sigma = 0 reports
// epsilon = +infinity.
absl::StatusOr<DpGuarantee> ToDp(const RdpAccount& account);

// Smallest sigma (bisection to 1e-6) with ToDp(sigma, s, delta) <= target.
absl::StatusOr<double> CalibrateSigma(int64_t s, double delta,
                                      double target_epsilon);

// {"sigma":..,"s":..,"delta":..,"gamma_star":..|null,"epsilon":..|"inf"}
std::string AccountReportJson(const RdpAccount& account,
                              const DpGuarantee& guarantee);

// ---------------------------------------------------------------------------
// Randomized response.

// Keeps `a` with probability e^eps / (e^eps + m - 1), otherwise returns one
// of the other m - 1 values uniformly. eps = +infinity always keeps.
int RandomizedResponse(int a, double epsilon, int m, Rng& rng);

// (m - 1) / (e^eps + m - 1).
double RrEta(double epsilon, int m);

// Probability of keeping the value: e^eps / (e^eps + m - 1).
double RrKeepProbability(double epsilon, int m);

// ---------------------------------------------------------------------------
// Sensitivity.

// Trains one teacher on `shard` and returns its predictions on `queries`.
using ShardTrainer = std::function<absl::StatusOr<std::vector<int>>(
    const Dataset& shard, const Matrix& queries)>;

struct SensitivityResult {
  // Largest L2 distance between the vote-count vectors of the original and
  // a neighbouring dataset, over all probed flips and query points.
  double max_distance = 0.0;
  // Per probed flip, the max over queries of the distance.
  std::vector<double> flip_distances;
};

// Exhaustively flips the group attribute of every row of every shard to
// every other value in [m), retrains the owning shard's teacher with
// `trainer` and measures how the vote counts over `queries` move. Votes are
// over `r` classes.
absl::StatusOr<SensitivityResult> SensitivityProbe(
    std::span<const Dataset> shards, const Matrix& queries, int r,
    const ShardTrainer& trainer);

}  // namespace fairpate

#endif  // FAIRPATE_PRIVACY_H_
