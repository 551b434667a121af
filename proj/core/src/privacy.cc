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

#include "fairpate/privacy.h"

#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fairpate/status_macros.h"
#include "json.hpp"

namespace fairpate {

absl::StatusOr<VoteCounts> CountVotes(std::span<const int> predictions, int r) {
  if (r < 1) return absl::InvalidArgumentError("vote domain must be >= 1");
  VoteCounts counts(static_cast<size_t>(r), 0);
  for (int p : predictions) {
    if (p < 0 || p >= r) {
      return absl::InvalidArgumentError(
          absl::StrCat("prediction ", p, " outside [0, ", r, ")"));
    }
    ++counts[static_cast<size_t>(p)];
  }
  return counts;
}

int Argmax(std::span<const int> counts) {
  int best = 0;
  for (size_t j = 1; j < counts.size(); ++j) {
    if (counts[j] > counts[static_cast<size_t>(best)]) best = static_cast<int>(j);
  }
  return best;
}

int NoisyArgmax(std::span<const int> counts, double sigma, Rng& rng) {
  int best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (size_t j = 0; j < counts.size(); ++j) {
    const double v = counts[j] + sigma * rng.Gaussian();
    if (v > best_value) {
      best_value = v;
      best = static_cast<int>(j);
    }
  }
  return best;
}

int CachedNoisyVotes::Answer(uint64_t query_id, std::span<const int> counts) {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(query_id);
  if (it != cache_.end()) return it->second;
  Rng rng(DeriveSeed(seed_, query_id));
  const int answer = NoisyArgmax(counts, sigma_, rng);
  cache_.emplace(query_id, answer);
  return answer;
}

int64_t CachedNoisyVotes::queries_charged() const {
  std::lock_guard<std::mutex> lock(mu_);
  return static_cast<int64_t>(cache_.size());
}

// ---------------------------------------------------------------------------

absl::StatusOr<double> RdpEpsilon(double sigma, double gamma) {
  if (!(sigma > 0.0)) return absl::InvalidArgumentError("sigma must be > 0");
  if (!(gamma >= 1.0)) return absl::InvalidArgumentError("gamma must be >= 1");
  return gamma / (sigma * sigma);
}

absl::StatusOr<double> Compose(double sigma, int64_t s, double gamma) {
  if (s < 0) return absl::InvalidArgumentError("query count must be >= 0");
  FAIRPATE_ASSIGN_OR_RETURN(const double per_query, RdpEpsilon(sigma, gamma));
  return static_cast<double>(s) * per_query;
}

absl::Status RdpAccount::Validate() const {
  if (!(sigma >= 0.0) || std::isnan(sigma)) {
    return absl::InvalidArgumentError("sigma must be >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (queries < 0) return absl::InvalidArgumentError("queries must be >= 0");
  return absl::OkStatus();
}

absl::StatusOr<DpGuarantee> ToDp(const RdpAccount& account) {
  FAIRPATE_RETURN_IF_ERROR(account.Validate());
  if (account.queries == 0) return DpGuarantee{0.0, std::nullopt};
  if (account.sigma == 0.0) {
    return DpGuarantee{std::numeric_limits<double>::infinity(), std::nullopt};
  }
  const double s = static_cast<double>(account.queries);
  const double log_inv_delta = std::log(1.0 / account.delta);
  const double sigma = account.sigma;
  const double gamma = 1.0 + sigma * std::sqrt(log_inv_delta / s);
  const double epsilon =
      s * gamma / (sigma * sigma) + log_inv_delta / (gamma - 1.0);
  return DpGuarantee{epsilon, gamma};
}

absl::StatusOr<double> CalibrateSigma(int64_t s, double delta,
                                      double target_epsilon) {
  if (!(target_epsilon > 0.0)) {
    return absl::InvalidArgumentError("target epsilon must be > 0");
  }
  if (std::isinf(target_epsilon)) return 0.0;
  if (s < 1) {
    return absl::InvalidArgumentError(
        "calibration needs at least one query (s = 0 is free at any sigma)");
  }
  auto eps_at = [&](double sigma) -> absl::StatusOr<double> {
    FAIRPATE_ASSIGN_OR_RETURN(DpGuarantee g, ToDp(RdpAccount{sigma, s, delta}));
    return g.epsilon;
  };
  double hi = 1.0;
  for (int i = 0; i < 200; ++i) {
    FAIRPATE_ASSIGN_OR_RETURN(const double e, eps_at(hi));
    if (e <= target_epsilon) break;
    hi *= 2.0;
  }
  double lo = 0.0;
  // epsilon(sigma) is continuous and strictly decreasing.
  while (hi - lo > 1e-6) {
    const double mid = 0.5 * (lo + hi);
    FAIRPATE_ASSIGN_OR_RETURN(const double e, eps_at(mid));
    if (e <= target_epsilon) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return hi;
}

std::string AccountReportJson(const RdpAccount& account,
                              const DpGuarantee& guarantee) {
  nlohmann::ordered_json j;
  j["sigma"] = account.sigma;
  j["s"] = account.queries;
  j["delta"] = account.delta;
  j["gamma_star"] = guarantee.gamma_star.has_value()
                        ? nlohmann::ordered_json(*guarantee.gamma_star)
                        : nlohmann::ordered_json(nullptr);
  j["epsilon"] = std::isinf(guarantee.epsilon)
                     ? nlohmann::ordered_json("inf")
                     : nlohmann::ordered_json(guarantee.epsilon);
  return j.dump();
}

// ---------------------------------------------------------------------------

double RrKeepProbability(double epsilon, int m) {
  if (std::isinf(epsilon)) return 1.0;
  // e^eps / (e^eps + m - 1) = 1 / (1 + (m - 1) e^-eps)
  return 1.0 / (1.0 + (m - 1) * std::exp(-epsilon));
}

double RrEta(double epsilon, int m) {
  if (std::isinf(epsilon)) return 0.0;
  return (m - 1) / (std::exp(epsilon) + (m - 1));
}

int RandomizedResponse(int a, double epsilon, int m, Rng& rng) {
  const double u = rng.Uniform();
  if (m < 2 || u < RrKeepProbability(epsilon, m)) return a;
  const int other = static_cast<int>(rng.UniformInt(static_cast<uint64_t>(m - 1)));
  return other >= a ? other + 1 : other;
}

// ---------------------------------------------------------------------------

absl::StatusOr<SensitivityResult> SensitivityProbe(
    std::span<const Dataset> shards, const Matrix& queries, int r,
    const ShardTrainer& trainer) {
  if (shards.empty()) return absl::InvalidArgumentError("no shards");
  const size_t q = static_cast<size_t>(queries.rows());
  // predictions[k][i]: teacher k on query i.
  std::vector<std::vector<int>> predictions;
  for (const Dataset& shard : shards) {
    FAIRPATE_ASSIGN_OR_RETURN(std::vector<int> p, trainer(shard, queries));
    if (p.size() != q) {
      return absl::InternalError("trainer returned wrong prediction count");
    }
    predictions.push_back(std::move(p));
  }
  auto counts_for = [&](size_t i) -> absl::StatusOr<VoteCounts> {
    std::vector<int> votes(shards.size());
    for (size_t k = 0; k < shards.size(); ++k) votes[k] = predictions[k][i];
    return CountVotes(votes, r);
  };
  std::vector<VoteCounts> base(q);
  for (size_t i = 0; i < q; ++i) {
    FAIRPATE_ASSIGN_OR_RETURN(base[i], counts_for(i));
  }

  SensitivityResult result;
  for (size_t k = 0; k < shards.size(); ++k) {
    const Dataset& shard = shards[k];
    for (size_t row = 0; row < shard.size(); ++row) {
      for (int a = 0; a < shard.num_groups(); ++a) {
        if (a == shard.groups()[row]) continue;
        std::vector<int> groups(shard.groups().begin(), shard.groups().end());
        groups[row] = a;
        FAIRPATE_ASSIGN_OR_RETURN(Dataset flipped,
                                  shard.WithGroups(std::move(groups)));
        FAIRPATE_ASSIGN_OR_RETURN(std::vector<int> p, trainer(flipped, queries));
        if (p.size() != q) {
          return absl::InternalError("trainer returned wrong prediction count");
        }
        double worst = 0.0;
        for (size_t i = 0; i < q; ++i) {
          // Only teacher k changed; recount with its new vote.
          VoteCounts c = base[i];
          if (p[i] < 0 || p[i] >= r) {
            return absl::InvalidArgumentError("prediction out of range");
          }
          --c[static_cast<size_t>(predictions[k][i])];
          ++c[static_cast<size_t>(p[i])];
          double sq = 0.0;
          for (size_t j = 0; j < c.size(); ++j) {
            const double d = c[j] - base[i][j];
            sq += d * d;
          }
          worst = std::max(worst, std::sqrt(sq));
        }
        result.flip_distances.push_back(worst);
        result.max_distance = std::max(result.max_distance, worst);
      }
    }
  }
  return result;
}

}  // namespace fairpate
