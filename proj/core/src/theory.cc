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

#include "fairpate/theory.h"

#include <algorithm>
#include <cmath>
#include <map>

#include "absl/strings/str_cat.h"
#include "fairpate/privacy.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"
#include "json.hpp"

namespace fairpate {
namespace {

absl::Status CheckUnit(double v, const char* name) {
  if (!(v >= 0.0) || !std::isfinite(v)) {
    return absl::InvalidArgumentError(
        absl::StrCat(name, " must be finite and >= 0"));
  }
  return absl::OkStatus();
}

std::vector<double> GroupFrequencies(std::span<const int> groups,
                                     int num_groups) {
  std::vector<double> f(static_cast<size_t>(num_groups), 0.0);
  for (int g : groups) f[static_cast<size_t>(g)] += 1.0;
  for (double& v : f) v /= static_cast<double>(groups.size());
  return f;
}

absl::Status CheckGroups(std::span<const int> groups, int num_groups) {
  for (int g : groups) {
    if (g < 0 || g >= num_groups) {
      return absl::InvalidArgumentError(
          absl::StrCat("group ", g, " outside [0, ", num_groups, ")"));
    }
  }
  return absl::OkStatus();
}

// Split, standardize with training statistics.
absl::StatusOr<SplitResult> PreparedSplit(const SynthParams& params,
                                          uint64_t seed) {
  SynthParams p = params;
  p.seed = DeriveSeed(seed, streams::kSynth);
  FAIRPATE_ASSIGN_OR_RETURN(Dataset data, SynthBiased(p));
  SplitSpec spec;
  spec.seed = DeriveSeed(seed, streams::kSplit);
  FAIRPATE_ASSIGN_OR_RETURN(SplitResult split, Split(data, spec));
  FAIRPATE_ASSIGN_OR_RETURN(auto train, Standardize(split.train));
  FAIRPATE_ASSIGN_OR_RETURN(auto eval, Standardize(split.eval, &train.second));
  FAIRPATE_ASSIGN_OR_RETURN(auto test, Standardize(split.test, &train.second));
  return SplitResult{std::move(train.first), std::move(eval.first),
                     std::move(test.first)};
}

}  // namespace

std::string BoundReport::ToJson() const {
  nlohmann::ordered_json j;
  j["kind"] = kind;
  j["seed"] = seed;
  j["measured"] = measured;
  j["bound"] = std::isfinite(bound) ? nlohmann::ordered_json(bound)
                                    : nlohmann::ordered_json("inf");
  j["eta"] = eta;
  j["b"] = b;
  j["alpha"] = alpha;
  j["min_prob_released"] = min_prob_released;
  j["min_prob_true"] = min_prob_true;
  j["tolerance"] = tolerance;
  j["holds"] = holds;
  return j.dump();
}

absl::StatusOr<Strata> MakeStrata(const Dataset& data, int max_strata) {
  if (data.empty()) return absl::InvalidArgumentError("no rows to stratify");
  if (max_strata < data.num_labels()) {
    return absl::InvalidArgumentError("max_strata below the label count");
  }
  const size_t n = data.size();
  std::vector<int64_t> raw(n);
  if (data.has_clusters()) {
    for (size_t i = 0; i < n; ++i) {
      raw[i] = static_cast<int64_t>(data.clusters()[i]) * data.num_labels() +
               data.labels()[i];
    }
  } else {
    int bits = 0;
    while (bits < data.dims() &&
           (int64_t{data.num_labels()} << (bits + 1)) <= max_strata) {
      ++bits;
    }
    std::vector<double> medians(static_cast<size_t>(bits));
    for (int f = 0; f < bits; ++f) {
      std::vector<double> col(n);
      for (size_t i = 0; i < n; ++i) {
        col[i] = data.features()(static_cast<Eigen::Index>(i), f);
      }
      auto mid = col.begin() + static_cast<std::ptrdiff_t>(n / 2);
      std::nth_element(col.begin(), mid, col.end());
      medians[static_cast<size_t>(f)] = *mid;
    }
    for (size_t i = 0; i < n; ++i) {
      int64_t code = 0;
      for (int f = 0; f < bits; ++f) {
        code = code * 2 +
               (data.features()(static_cast<Eigen::Index>(i), f) >=
                        medians[static_cast<size_t>(f)]
                    ? 1
                    : 0);
      }
      raw[i] = code * data.num_labels() + data.labels()[i];
    }
  }
  std::map<int64_t, int> renumber;
  for (int64_t r : raw) renumber.emplace(r, 0);
  int next = 0;
  for (auto& [key, id] : renumber) id = next++;
  Strata strata;
  strata.num_strata = next;
  strata.ids.reserve(n);
  for (int64_t r : raw) strata.ids.push_back(renumber[r]);
  return strata;
}

absl::StatusOr<double> EstimateEtaConditional(std::span<const int> groups,
                                              std::span<const int> released,
                                              int num_groups,
                                              const Strata& strata) {
  if (groups.size() != released.size() || groups.size() != strata.ids.size()) {
    return absl::InvalidArgumentError("group, release and strata lengths differ");
  }
  if (num_groups < 1 || strata.num_strata < 1) {
    return absl::InvalidArgumentError("need at least one group and stratum");
  }
  FAIRPATE_RETURN_IF_ERROR(CheckGroups(groups, num_groups));
  FAIRPATE_RETURN_IF_ERROR(CheckGroups(released, num_groups));
  const size_t s = static_cast<size_t>(strata.num_strata);
  const size_t m = static_cast<size_t>(num_groups);
  std::vector<double> rows(s, 0.0);
  // diff[s * m + a] = #(released = a) - #(group = a) within stratum s.
  std::vector<double> diff(s * m, 0.0);
  for (size_t i = 0; i < groups.size(); ++i) {
    const int id = strata.ids[i];
    if (id < 0 || id >= strata.num_strata) {
      return absl::InvalidArgumentError(absl::StrCat("stratum id ", id, " out of range"));
    }
    const size_t k = static_cast<size_t>(id);
    rows[k] += 1.0;
    diff[k * m + static_cast<size_t>(released[i])] += 1.0;
    diff[k * m + static_cast<size_t>(groups[i])] -= 1.0;
  }
  double eta = 0.0;
  for (size_t k = 0; k < s; ++k) {
    if (rows[k] == 0.0) {
      return absl::InvalidArgumentError(absl::StrCat("stratum ", k, " is empty"));
    }
    for (size_t a = 0; a < m; ++a) {
      eta = std::max(eta, std::abs(diff[k * m + a]) / rows[k]);
    }
  }
  return eta;
}

absl::StatusOr<double> BoundAlphaPrime(double eta, double b, double min_prob,
                                       double alpha) {
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(eta, "eta"));
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(b, "B"));
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(alpha, "alpha"));
  if (!(min_prob > 0.0)) {
    return absl::InvalidArgumentError("minimum group probability must be > 0");
  }
  return eta * b / min_prob + alpha;
}

absl::StatusOr<double> BoundAlphaPrimeVariant(double eta, double b,
                                              double min_prob_true,
                                              double alpha) {
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(eta, "eta"));
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(b, "B"));
  FAIRPATE_RETURN_IF_ERROR(CheckUnit(alpha, "alpha"));
  if (!(min_prob_true > eta)) {
    return absl::FailedPreconditionError(
        "bound is infeasible: min_a P(A = a) must exceed eta");
  }
  return eta * b / (min_prob_true - eta) + alpha;
}

absl::StatusOr<double> MinGroupProbability(std::span<const int> groups,
                                           int num_groups) {
  if (groups.empty()) return absl::InvalidArgumentError("no rows");
  if (num_groups < 1) return absl::InvalidArgumentError("no groups");
  FAIRPATE_RETURN_IF_ERROR(CheckGroups(groups, num_groups));
  const auto f = GroupFrequencies(groups, num_groups);
  return *std::min_element(f.begin(), f.end());
}

absl::StatusOr<BoundReport> VerifyTransfer(const MlpParams& student,
                                           const Dataset& test,
                                           std::span<const int> released,
                                           const FairnessSpec& spec,
                                           double tolerance) {
  if (released.size() != test.size()) {
    return absl::InvalidArgumentError("released groups do not match test rows");
  }
  FAIRPATE_ASSIGN_OR_RETURN(Strata strata, MakeStrata(test));
  const std::vector<int> preds = Predict(student, test.features());
  BoundReport r;
  r.kind = "transfer";
  r.b = spec.bound_b;
  r.tolerance = tolerance;
  FAIRPATE_ASSIGN_OR_RETURN(
      r.alpha, ViolationXiFromPredictions(preds, test.labels(), released,
                                          test.num_groups(), test.num_labels(),
                                          spec));
  FAIRPATE_ASSIGN_OR_RETURN(
      r.measured, ViolationXiFromPredictions(preds, test.labels(), test.groups(),
                                             test.num_groups(),
                                             test.num_labels(), spec));
  FAIRPATE_ASSIGN_OR_RETURN(
      r.eta, EstimateEtaConditional(test.groups(), released, test.num_groups(),
                                    strata));
  FAIRPATE_ASSIGN_OR_RETURN(r.min_prob_released,
                            MinGroupProbability(released, test.num_groups()));
  FAIRPATE_ASSIGN_OR_RETURN(r.min_prob_true,
                            MinGroupProbability(test.groups(), test.num_groups()));
  FAIRPATE_ASSIGN_OR_RETURN(
      r.bound, BoundAlphaPrime(r.eta, r.b,
                               std::min(r.min_prob_released, r.min_prob_true),
                               r.alpha));
  r.holds = r.measured <= r.bound + r.tolerance;
  return r;
}

absl::StatusOr<double> EstimateTv(std::span<const Tuple> z,
                                  std::span<const Tuple> z_prime) {
  if (z.empty() || z_prime.empty()) {
    return absl::InvalidArgumentError("TV needs two nonempty samples");
  }
  std::map<Tuple, double> cells;
  const double wz = 1.0 / static_cast<double>(z.size());
  const double wp = 1.0 / static_cast<double>(z_prime.size());
  for (const Tuple& t : z) cells[t] += wz;
  for (const Tuple& t : z_prime) cells[t] -= wp;
  double l1 = 0.0;
  for (const auto& [cell, d] : cells) l1 += std::abs(d);
  return std::clamp(0.5 * l1, 0.0, 1.0);
}

absl::StatusOr<BoundReport> VerifyVoteFromPredictions(
    const std::vector<std::vector<int>>& predictions, int num_classes,
    const Dataset& data, double sigma, std::span<const uint64_t> seeds,
    const FairnessSpec& spec, double tolerance, size_t min_group_rows) {
  if (predictions.empty()) return absl::InvalidArgumentError("no teachers");
  if (seeds.empty()) return absl::InvalidArgumentError("no noise seeds");
  if (!(sigma >= 0.0)) return absl::InvalidArgumentError("sigma must be >= 0");
  const size_t n = data.size();
  for (const auto& p : predictions) {
    if (p.size() != n) {
      return absl::InvalidArgumentError("teacher predictions do not match rows");
    }
  }
  const std::vector<size_t> counts = data.GroupCounts();
  for (size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] < min_group_rows) {
      return absl::FailedPreconditionError(
          absl::StrCat("group ", a, " has ", counts[a], " rows, need ",
                       min_group_rows));
    }
  }

  // Z = (teacher predictions..., Y).
  std::vector<Tuple> z(n);
  std::vector<std::vector<Tuple>> z_by_group(counts.size());
  for (size_t i = 0; i < n; ++i) {
    Tuple& t = z[i];
    t.reserve(predictions.size() + 1);
    for (const auto& p : predictions) t.push_back(p[i]);
    t.push_back(data.labels()[i]);
    z_by_group[static_cast<size_t>(data.groups()[i])].push_back(t);
  }
  double tv = 0.0;
  for (const auto& za : z_by_group) {
    FAIRPATE_ASSIGN_OR_RETURN(const double d, EstimateTv(z, za));
    tv = std::max(tv, d);
  }

  std::vector<VoteCounts> votes(n);
  for (size_t i = 0; i < n; ++i) {
    std::vector<int> column(predictions.size());
    for (size_t k = 0; k < predictions.size(); ++k) column[k] = predictions[k][i];
    FAIRPATE_ASSIGN_OR_RETURN(votes[i], CountVotes(column, num_classes));
  }
  double measured = 0.0;
  for (uint64_t seed : seeds) {
    CachedNoisyVotes noise(sigma, DeriveSeed(seed, streams::kVoteNoise));
    std::vector<int> out(n);
    for (size_t i = 0; i < n; ++i) out[i] = noise.Answer(i, votes[i]);
    FAIRPATE_ASSIGN_OR_RETURN(
        const double xi,
        ViolationXiFromPredictions(out, data.labels(), data.groups(),
                                   data.num_groups(), data.num_labels(), spec));
    measured += xi;
  }
  BoundReport r;
  r.kind = "vote";
  r.measured = measured / static_cast<double>(seeds.size());
  r.eta = tv;
  r.b = spec.bound_b;
  r.bound = tv * spec.bound_b;
  FAIRPATE_ASSIGN_OR_RETURN(r.min_prob_true,
                            MinGroupProbability(data.groups(), data.num_groups()));
  r.min_prob_released = r.min_prob_true;
  r.tolerance = tolerance;
  r.holds = r.measured <= r.bound + r.tolerance;
  return r;
}

absl::StatusOr<BoundReport> VerifyVote(const TeacherEnsemble& ensemble,
                                       const Dataset& data, double sigma,
                                       std::span<const uint64_t> seeds,
                                       const FairnessSpec& spec,
                                       double tolerance,
                                       size_t min_group_rows) {
  if (ensemble.target != TargetSpace::kLabels) {
    return absl::InvalidArgumentError("vote check needs label teachers");
  }
  if (ensemble.size() == 0) return absl::InvalidArgumentError("empty ensemble");
  return VerifyVoteFromPredictions(ensemble.PredictAll(data.features()),
                                   ensemble.output_dims(), data, sigma, seeds,
                                   spec, tolerance, min_group_rows);
}

absl::StatusOr<BoundReport> RunTransferTrial(const TransferTrialConfig& config,
                                             uint64_t seed) {
  FAIRPATE_ASSIGN_OR_RETURN(SplitResult split, PreparedSplit(config.data, seed));
  const int m = split.train.num_groups();
  Rng rng(DeriveSeed(seed, streams::kRandomizedResponse));
  auto perturb = [&](const Dataset& d) {
    std::vector<int> out(d.size());
    for (size_t i = 0; i < d.size(); ++i) {
      out[i] = RandomizedResponse(d.groups()[i], config.epsilon, m, rng);
    }
    return out;
  };
  FAIRPATE_ASSIGN_OR_RETURN(Dataset train_tilde,
                            split.train.WithGroups(perturb(split.train)));
  const std::vector<int> test_tilde = perturb(split.test);
  TrainConfig tc = config.train;
  tc.seed = DeriveSeed(seed, streams::kStudent);
  FAIRPATE_ASSIGN_OR_RETURN(MlpParams student,
                            TrainFair(train_tilde, config.fairness, tc));
  FAIRPATE_ASSIGN_OR_RETURN(
      BoundReport r, VerifyTransfer(student, split.test, test_tilde,
                                    config.fairness, config.tolerance));
  r.seed = seed;
  return r;
}

absl::StatusOr<BoundReport> RunVoteTrial(const VoteTrialConfig& config,
                                         uint64_t seed) {
  if (config.noise_draws < 1) {
    return absl::InvalidArgumentError("noise_draws must be >= 1");
  }
  FAIRPATE_ASSIGN_OR_RETURN(SplitResult split, PreparedSplit(config.data, seed));
  FAIRPATE_ASSIGN_OR_RETURN(
      std::vector<Dataset> shards,
      ShardTeachers(split.train, config.num_teachers,
                    DeriveSeed(seed, streams::kShard),
                    config.fair_teachers ? 1 : 0));
  TrainConfig tc = config.train;
  tc.seed = DeriveSeed(seed, streams::kTeacherBase);
  TeacherEnsemble ensemble;
  if (config.fair_teachers) {
    FAIRPATE_ASSIGN_OR_RETURN(
        ensemble, TrainTeachersFair(shards, config.fairness, tc, config.threads));
  } else {
    ensemble.teachers.resize(shards.size());
    for (size_t k = 0; k < shards.size(); ++k) {
      TrainConfig ck = tc;
      ck.seed = DeriveSeed(tc.seed, streams::kTeacherBase + k);
      FAIRPATE_ASSIGN_OR_RETURN(ensemble.teachers[k], TrainErm(shards[k], ck));
    }
    ensemble.target = TargetSpace::kLabels;
  }
  std::vector<uint64_t> noise_seeds;
  for (int t = 0; t < config.noise_draws; ++t) {
    noise_seeds.push_back(DeriveSeed(seed, streams::kVoteNoise + 16 * (t + 1)));
  }
  FAIRPATE_ASSIGN_OR_RETURN(
      BoundReport r, VerifyVote(ensemble, split.test, config.sigma, noise_seeds,
                                config.fairness, config.tolerance));
  r.seed = seed;
  return r;
}

}  // namespace fairpate
