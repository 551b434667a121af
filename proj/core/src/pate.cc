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

#include "fairpate/pate.h"

#include <chrono>
#include <cmath>
#include <limits>

#include "absl/strings/str_cat.h"
#include "fairpate/parallel.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"

namespace fairpate {
namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

class Stopwatch {
 public:
  Stopwatch() : start_(std::chrono::steady_clock::now()) {}
  double ElapsedMs() const {
    return std::chrono::duration<double, std::milli>(
               std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

TrainConfig WithSeed(const TrainConfig& config, uint64_t seed) {
  TrainConfig out = config;
  out.seed = seed;
  return out;
}

// Trains one model per shard; `train_one(k, shard, config_k)`.
template <typename TrainOne>
absl::StatusOr<TeacherEnsemble> TrainEnsemble(std::span<const Dataset> shards,
                                              const TrainConfig& config,
                                              int threads,
                                              TrainOne train_one) {
  if (shards.empty()) return absl::InvalidArgumentError("no teacher shards");
  TeacherEnsemble ensemble;
  ensemble.teachers.resize(shards.size());
  for (size_t k = 0; k < shards.size(); ++k) {
    if (shards[k].empty()) {
      return absl::InvalidArgumentError(absl::StrCat("shard ", k, " is empty"));
    }
    ensemble.shard_row_ids.emplace_back(shards[k].row_ids().begin(),
                                        shards[k].row_ids().end());
  }
  FAIRPATE_RETURN_IF_ERROR(ParallelFor(
      shards.size(), threads, [&](size_t k) -> absl::Status {
        const TrainConfig ck = WithSeed(
            config, DeriveSeed(config.seed, streams::kTeacherBase + k));
        FAIRPATE_ASSIGN_OR_RETURN(ensemble.teachers[k],
                                  train_one(k, shards[k], ck));
        return absl::OkStatus();
      }));
  return ensemble;
}

// A dataset built from pool features only, with caller-supplied columns.
absl::StatusOr<Dataset> PoolDataset(const StudentPool& pool,
                                    std::vector<int> groups,
                                    std::vector<int> labels) {
  return Dataset::Create(pool.features(), std::move(groups), std::move(labels),
                         pool.num_groups(), pool.num_labels(),
                         std::vector<int64_t>(pool.row_ids().begin(),
                                              pool.row_ids().end()));
}

absl::Status CheckPool(const StudentPool& pool, const Dataset& train,
                       const Dataset& test) {
  if (pool.size() == 0) return absl::InvalidArgumentError("empty student pool");
  if (pool.dims() != train.dims() || pool.dims() != test.dims()) {
    return absl::InvalidArgumentError("pool/train/test feature dims differ");
  }
  return absl::OkStatus();
}

RunReport BaseReport(std::string method, const PipelineConfig& config) {
  RunReport r;
  r.method = std::move(method);
  r.seed = config.seed;
  return r;
}

void Fill(RunReport& report, const Evaluation& eval) {
  report.accuracy = eval.accuracy;
  report.xi = eval.xi;
  report.wasserstein = eval.wasserstein;
}

}  // namespace

std::vector<std::vector<int>> TeacherEnsemble::PredictAll(
    const Matrix& x) const {
  std::vector<std::vector<int>> out;
  out.reserve(teachers.size());
  for (const MlpParams& t : teachers) out.push_back(Predict(t, x));
  return out;
}

absl::StatusOr<std::vector<VoteCounts>> TeacherEnsemble::Votes(
    const Matrix& x) const {
  if (teachers.empty()) return absl::FailedPreconditionError("empty ensemble");
  if (x.cols() != teachers.front().arch().input_dims) {
    return absl::InvalidArgumentError("query dims do not match teachers");
  }
  const auto preds = PredictAll(x);
  const int r = output_dims();
  std::vector<VoteCounts> votes(static_cast<size_t>(x.rows()),
                                VoteCounts(static_cast<size_t>(r), 0));
  for (const auto& p : preds) {
    for (size_t i = 0; i < p.size(); ++i) ++votes[i][static_cast<size_t>(p[i])];
  }
  return votes;
}

absl::StatusOr<TeacherEnsemble> TrainTeachersGroups(
    std::span<const Dataset> shards, const TrainConfig& config, int threads) {
  FAIRPATE_ASSIGN_OR_RETURN(
      TeacherEnsemble ensemble,
      TrainEnsemble(shards, config, threads,
                    [](size_t, const Dataset& shard, const TrainConfig& c) {
                      return TrainErm(shard.GroupsAsLabels(), c);
                    }));
  ensemble.target = TargetSpace::kGroups;
  return ensemble;
}

absl::StatusOr<TeacherEnsemble> TrainTeachersFair(
    std::span<const Dataset> shards, const FairnessSpec& fairness,
    const TrainConfig& config, int threads) {
  for (size_t k = 0; k < shards.size(); ++k) {
    const std::vector<size_t> counts = shards[k].GroupCounts();
    for (size_t a = 0; a < counts.size(); ++a) {
      if (counts[a] == 0) {
        return absl::FailedPreconditionError(absl::StrCat(
            "shard ", k, " has no rows of group ", a,
            "; fair teachers need every group (shard with min_per_group >= 1)"));
      }
    }
  }
  FAIRPATE_ASSIGN_OR_RETURN(
      TeacherEnsemble ensemble,
      TrainEnsemble(shards, config, threads,
                    [&](size_t, const Dataset& shard, const TrainConfig& c) {
                      return TrainFair(shard, fairness, c);
                    }));
  ensemble.target = TargetSpace::kLabels;
  ensemble.fairness = fairness;
  return ensemble;
}

absl::Status PipelineConfig::Validate() const {
  if (num_teachers < 1) return absl::InvalidArgumentError("K must be >= 1");
  if (pool_size < 1) return absl::InvalidArgumentError("s must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    return absl::InvalidArgumentError("lambda must be finite and >= 0");
  }
  if (sigma.has_value() == target_epsilon.has_value()) {
    return absl::InvalidArgumentError(
        "set exactly one of sigma and target_epsilon");
  }
  if (sigma.has_value() && !(*sigma >= 0.0)) {
    return absl::InvalidArgumentError("sigma must be >= 0");
  }
  if (target_epsilon.has_value() && !(*target_epsilon > 0.0)) {
    return absl::InvalidArgumentError("target epsilon must be > 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) {
    return absl::InvalidArgumentError("delta must lie in (0, 1)");
  }
  if (min_per_group < 0) {
    return absl::InvalidArgumentError("min_per_group must be >= 0");
  }
  FAIRPATE_RETURN_IF_ERROR(fairness.Validate());
  return train.Validate();
}

absl::StatusOr<double> PipelineConfig::ResolveSigma() const {
  FAIRPATE_RETURN_IF_ERROR(Validate());
  if (sigma.has_value()) return *sigma;
  return CalibrateSigma(static_cast<int64_t>(pool_size), delta,
                        *target_epsilon);
}

absl::StatusOr<Evaluation> Evaluate(const MlpParams& model, const Dataset& test,
                                    const FairnessSpec& fairness) {
  FAIRPATE_ASSIGN_OR_RETURN(Matrix probs, Forward(model, test.features()));
  const std::vector<int> preds = ArgmaxRows(probs);
  Evaluation eval;
  eval.accuracy = Accuracy(preds, test.labels());
  FAIRPATE_ASSIGN_OR_RETURN(
      eval.xi, ViolationXiFromPredictions(preds, test.labels(), test.groups(),
                                          test.num_groups(), test.num_labels(),
                                          fairness));
  if (fairness.notion == Notion::kGeneralizedDp) {
    std::vector<double> scores(static_cast<size_t>(probs.rows()));
    for (Eigen::Index i = 0; i < probs.rows(); ++i) {
      scores[static_cast<size_t>(i)] = probs(i, 1);
    }
    FAIRPATE_ASSIGN_OR_RETURN(
        eval.wasserstein,
        MaxGroupWassersteinFromScores(scores, test.groups(), test.num_groups()));
  }
  return eval;
}

absl::StatusOr<std::vector<int>> PrivateGroups(const TeacherEnsemble& ensemble,
                                               const StudentPool& pool,
                                               CachedNoisyVotes& noise) {
  if (ensemble.target != TargetSpace::kGroups) {
    return absl::InvalidArgumentError("ensemble does not predict groups");
  }
  FAIRPATE_ASSIGN_OR_RETURN(std::vector<VoteCounts> votes,
                            ensemble.Votes(pool.features()));
  std::vector<int> released(votes.size());
  for (size_t i = 0; i < votes.size(); ++i) {
    released[i] = noise.Answer(i, votes[i]);
  }
  return released;
}

absl::StatusOr<RunReport> RunSfS(const Dataset& train, const StudentPool& pool,
                                 const Dataset& test,
                                 const PipelineConfig& config) {
  Stopwatch clock;
  FAIRPATE_RETURN_IF_ERROR(CheckPool(pool, train, test));
  FAIRPATE_ASSIGN_OR_RETURN(const double sigma, config.ResolveSigma());
  RunReport report = BaseReport("sf_s", config);

  // (1) Group-predicting teachers on disjoint shards.
  FAIRPATE_ASSIGN_OR_RETURN(
      std::vector<Dataset> shards,
      ShardTeachers(train, config.num_teachers,
                    DeriveSeed(config.seed, streams::kShard)));
  FAIRPATE_ASSIGN_OR_RETURN(
      TeacherEnsemble ensemble,
      TrainTeachersGroups(shards,
                          WithSeed(config.train, DeriveSeed(config.seed,
                                                            streams::kTeacherBase)),
                          config.threads));

  // (2) One charged noisy-argmax query per pool row.
  CachedNoisyVotes noise(sigma, DeriveSeed(config.seed, streams::kVoteNoise));
  FAIRPATE_ASSIGN_OR_RETURN(std::vector<int> groups_tilde,
                            PrivateGroups(ensemble, pool, noise));

  // (3) Unconstrained reference on the pool.
  FAIRPATE_ASSIGN_OR_RETURN(std::span<const int> pool_labels, pool.labels());
  std::vector<int> labels(pool_labels.begin(), pool_labels.end());
  FAIRPATE_ASSIGN_OR_RETURN(Dataset released,
                            PoolDataset(pool, groups_tilde, labels));
  const TrainConfig student_config =
      WithSeed(config.train, DeriveSeed(config.seed, streams::kStudent));
  FAIRPATE_ASSIGN_OR_RETURN(MlpParams theta_star,
                            TrainErm(released, student_config));

  // (4) Fair student w.r.t. the released groups, kept near theta_star.
  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams student, TrainFair(released, config.fairness, student_config,
                                   &theta_star, config.lambda));

  // (5) Evaluate against true groups.
  FAIRPATE_ASSIGN_OR_RETURN(Evaluation eval,
                            Evaluate(student, test, config.fairness));
  Fill(report, eval);
  report.sigma = sigma;
  report.queries = noise.queries_charged();
  FAIRPATE_ASSIGN_OR_RETURN(
      DpGuarantee dp, ToDp(RdpAccount{sigma, report.queries, config.delta}));
  // The grid value when calibrated; the accountant's value never exceeds it.
  report.epsilon = config.target_epsilon.value_or(dp.epsilon);
  report.released = std::move(groups_tilde);
  report.wall_ms = clock.ElapsedMs();
  return report;
}

absl::StatusOr<RunReport> RunSfT(const Dataset& train, const StudentPool& pool,
                                 const Dataset& test,
                                 const PipelineConfig& config) {
  Stopwatch clock;
  FAIRPATE_RETURN_IF_ERROR(CheckPool(pool, train, test));
  FAIRPATE_ASSIGN_OR_RETURN(const double sigma, config.ResolveSigma());
  RunReport report = BaseReport("sf_t", config);

  // (1) Fair label-predicting teachers; every shard sees every group.
  FAIRPATE_ASSIGN_OR_RETURN(
      std::vector<Dataset> shards,
      ShardTeachers(train, config.num_teachers,
                    DeriveSeed(config.seed, streams::kShard),
                    config.min_per_group));
  FAIRPATE_ASSIGN_OR_RETURN(
      TeacherEnsemble ensemble,
      TrainTeachersFair(shards, config.fairness,
                        WithSeed(config.train, DeriveSeed(config.seed,
                                                          streams::kTeacherBase)),
                        config.threads));

  // (2) Noisy label votes, one charged query per pool row.
  CachedNoisyVotes noise(sigma, DeriveSeed(config.seed, streams::kVoteNoise));
  FAIRPATE_ASSIGN_OR_RETURN(std::vector<VoteCounts> votes,
                            ensemble.Votes(pool.features()));
  std::vector<int> labels_tilde(votes.size());
  for (size_t i = 0; i < votes.size(); ++i) {
    labels_tilde[i] = noise.Answer(i, votes[i]);
  }

  // (3) theta_star from the pool's own labels unless labels are protected.
  const TrainConfig student_config =
      WithSeed(config.train, DeriveSeed(config.seed, streams::kStudent));
  std::vector<int> no_groups(pool.size(), 0);
  FAIRPATE_ASSIGN_OR_RETURN(Dataset released,
                            PoolDataset(pool, no_groups, labels_tilde));
  double lambda = config.lambda;
  MlpParams theta_star(
      student_config.ArchitectureFor(pool.dims(), pool.num_labels()));
  if (config.label_protection) {
    lambda = 0.0;
  } else if (lambda > 0.0) {
    FAIRPATE_ASSIGN_OR_RETURN(std::span<const int> pool_labels, pool.labels());
    FAIRPATE_ASSIGN_OR_RETURN(
        Dataset own,
        PoolDataset(pool, no_groups,
                    std::vector<int>(pool_labels.begin(), pool_labels.end())));
    FAIRPATE_ASSIGN_OR_RETURN(theta_star, TrainErm(own, student_config));
  }

  // (4) Student on the noisy labels.
  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams student,
      TrainProximal(released, nullptr, theta_star, lambda, student_config));

  // (5) Evaluate against true groups.
  FAIRPATE_ASSIGN_OR_RETURN(Evaluation eval,
                            Evaluate(student, test, config.fairness));
  Fill(report, eval);
  report.sigma = sigma;
  report.queries = noise.queries_charged();
  FAIRPATE_ASSIGN_OR_RETURN(
      DpGuarantee dp, ToDp(RdpAccount{sigma, report.queries, config.delta}));
  // The grid value when calibrated; the accountant's value never exceeds it.
  report.epsilon = config.target_epsilon.value_or(dp.epsilon);
  report.released = std::move(labels_tilde);
  report.wall_ms = clock.ElapsedMs();
  return report;
}

absl::StatusOr<RunReport> RunBaselineM(const Dataset& train,
                                       const Dataset& test,
                                       const PipelineConfig& config) {
  Stopwatch clock;
  FAIRPATE_RETURN_IF_ERROR(config.Validate());
  if (!config.target_epsilon.has_value()) {
    return absl::InvalidArgumentError(
        "baseline M is parameterized by a target epsilon, not sigma");
  }
  const double epsilon = *config.target_epsilon;
  RunReport report = BaseReport("baseline_m", config);
  Rng rng(DeriveSeed(config.seed, streams::kRandomizedResponse));
  std::vector<int> perturbed(train.size());
  for (size_t i = 0; i < train.size(); ++i) {
    perturbed[i] =
        RandomizedResponse(train.groups()[i], epsilon, train.num_groups(), rng);
  }
  FAIRPATE_ASSIGN_OR_RETURN(Dataset noisy, train.WithGroups(perturbed));
  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams model,
      TrainFair(noisy, config.fairness,
                WithSeed(config.train,
                         DeriveSeed(config.seed, streams::kStudent))));
  FAIRPATE_ASSIGN_OR_RETURN(Evaluation eval,
                            Evaluate(model, test, config.fairness));
  Fill(report, eval);
  report.epsilon = epsilon;
  report.released = std::move(perturbed);
  report.wall_ms = clock.ElapsedMs();
  return report;
}

absl::StatusOr<RunReport> RunNonPrivateFair(const StudentPool& pool,
                                            const Dataset& test,
                                            const PipelineConfig& config) {
  Stopwatch clock;
  FAIRPATE_RETURN_IF_ERROR(config.train.Validate());
  RunReport report = BaseReport("nonprivate_fair", config);
  const Dataset& data = pool.RevealForEvaluation();
  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams model,
      TrainFair(data, config.fairness,
                WithSeed(config.train,
                         DeriveSeed(config.seed, streams::kStudent))));
  FAIRPATE_ASSIGN_OR_RETURN(Evaluation eval,
                            Evaluate(model, test, config.fairness));
  Fill(report, eval);
  report.epsilon = kInf;
  report.wall_ms = clock.ElapsedMs();
  return report;
}

absl::StatusOr<RunReport> RunNonPrivateErm(const StudentPool& pool,
                                           const Dataset& test,
                                           const PipelineConfig& config) {
  Stopwatch clock;
  RunReport report = BaseReport("nonprivate_erm", config);
  FAIRPATE_ASSIGN_OR_RETURN(std::span<const int> labels, pool.labels());
  FAIRPATE_ASSIGN_OR_RETURN(
      Dataset data,
      PoolDataset(pool, std::vector<int>(pool.size(), 0),
                  std::vector<int>(labels.begin(), labels.end())));
  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams model,
      TrainErm(data, WithSeed(config.train,
                              DeriveSeed(config.seed, streams::kStudent))));
  FAIRPATE_ASSIGN_OR_RETURN(Evaluation eval,
                            Evaluate(model, test, config.fairness));
  Fill(report, eval);
  report.epsilon = kInf;
  report.wall_ms = clock.ElapsedMs();
  return report;
}

absl::StatusOr<std::vector<AttributeAccuracyRow>> EnsembleAttributeAccuracy(
    const Dataset& train, const StudentPool& pool,
    std::span<const int> teacher_counts, double sigma,
    std::span<const uint64_t> seeds, const TrainConfig& config, int threads) {
  if (seeds.empty()) return absl::InvalidArgumentError("no seeds");
  std::span<const int> truth = pool.RevealGroupsForEvaluation();
  std::vector<AttributeAccuracyRow> rows;
  for (int k : teacher_counts) {
    if (k < 1 || static_cast<size_t>(k) > train.size()) {
      return absl::InvalidArgumentError(
          absl::StrCat("K=", k, " outside [1, n=", train.size(), "]"));
    }
    AttributeAccuracyRow row;
    row.num_teachers = k;
    for (uint64_t seed : seeds) {
      FAIRPATE_ASSIGN_OR_RETURN(
          std::vector<Dataset> shards,
          ShardTeachers(train, k, DeriveSeed(seed, streams::kShard)));
      FAIRPATE_ASSIGN_OR_RETURN(
          TeacherEnsemble ensemble,
          TrainTeachersGroups(
              shards,
              WithSeed(config, DeriveSeed(seed, streams::kTeacherBase)),
              threads));
      CachedNoisyVotes noise(sigma, DeriveSeed(seed, streams::kVoteNoise));
      FAIRPATE_ASSIGN_OR_RETURN(std::vector<int> released,
                                PrivateGroups(ensemble, pool, noise));
      size_t hits = 0;
      for (size_t i = 0; i < released.size(); ++i) {
        hits += released[i] == truth[i];
      }
      row.per_seed.push_back(static_cast<double>(hits) /
                             static_cast<double>(released.size()));
    }
    double sum = 0.0;
    for (double v : row.per_seed) sum += v;
    row.mean_accuracy = sum / static_cast<double>(row.per_seed.size());
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace fairpate
