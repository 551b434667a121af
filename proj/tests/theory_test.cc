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

#include <cmath>
#include <set>

#include "fairpate/privacy.h"
#include "fairpate/random.h"
#include "fairpate/theory.h"
#include "gtest/gtest.h"
#include "json.hpp"
#include "test_util.h"

namespace fairpate {
namespace {

using testing::MakeDataset;
using testing::Synth;

TEST(BoundTest, ClosedForms) {
  EXPECT_DOUBLE_EQ(*BoundAlphaPrime(0.1, 1.0, 0.5, 0.05), 0.25);
  EXPECT_DOUBLE_EQ(*BoundAlphaPrime(0.0, 1.0, 0.2, 0.07), 0.07);
  EXPECT_DOUBLE_EQ(*BoundAlphaPrimeVariant(0.1, 1.0, 0.5, 0.05), 0.3);
  EXPECT_FALSE(BoundAlphaPrimeVariant(0.3, 1.0, 0.3, 0.0).ok());
  EXPECT_FALSE(BoundAlphaPrime(0.1, 1.0, 0.0, 0.0).ok());
  EXPECT_FALSE(BoundAlphaPrime(-0.1, 1.0, 0.5, 0.0).ok());
}

TEST(BoundTest, Monotonicity) {
  Rng rng(4);
  for (int t = 0; t < 200; ++t) {
    const double eta = 0.3 * rng.Uniform(), p = 0.05 + 0.45 * rng.Uniform();
    const double alpha = 0.2 * rng.Uniform(), d = 0.01 + 0.05 * rng.Uniform();
    const double base = *BoundAlphaPrime(eta, 1.0, p, alpha);
    EXPECT_GE(base, alpha);
    EXPECT_LT(base, *BoundAlphaPrime(eta + d, 1.0, p, alpha));
    EXPECT_GT(base, *BoundAlphaPrime(eta, 1.0, p + d, alpha));
    EXPECT_LE(base, *BoundAlphaPrime(eta, 2.0, p, alpha));
    if (p > eta) EXPECT_GE(*BoundAlphaPrimeVariant(eta, 1.0, p, alpha), base);
  }
}

TEST(MinGroupProbabilityTest, Examples) {
  EXPECT_DOUBLE_EQ(*MinGroupProbability(std::vector<int>{0, 0, 1, 2}, 3), 0.25);
  EXPECT_DOUBLE_EQ(*MinGroupProbability(std::vector<int>{0, 0, 1, 1}, 3), 0.0);
  EXPECT_FALSE(MinGroupProbability(std::vector<int>{}, 2).ok());
  EXPECT_FALSE(MinGroupProbability(std::vector<int>{0, 5}, 2).ok());
}

Strata OneStratum(size_t n) { return Strata{std::vector<int>(n, 0), 1}; }

TEST(EtaTest, HandExamples) {
  const std::vector<int> g = {0, 0, 1, 1};
  EXPECT_DOUBLE_EQ(*EstimateEtaConditional(g, g, 2, OneStratum(4)), 0.0);
  // P(released = 0) = 1/4 vs P(A = 0) = 1/2.
  const std::vector<int> r = {0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(*EstimateEtaConditional(g, r, 2, OneStratum(4)), 0.25);
  // Two strata: the second is perfectly flipped.
  const Strata two{{0, 0, 1, 1}, 2};
  const std::vector<int> g2 = {0, 1, 0, 0};
  const std::vector<int> r2 = {0, 1, 1, 1};
  EXPECT_DOUBLE_EQ(*EstimateEtaConditional(g2, r2, 2, two), 1.0);
  const Strata hole{{0, 0, 2, 2}, 3};
  EXPECT_FALSE(EstimateEtaConditional(g, r, 2, hole).ok());
}

TEST(EtaTest, RandomizedResponseEtaIsRecovered) {
  // Every row has A = 0, so the estimate is the flip rate of the mechanism.
  const size_t n = 200000;
  Rng rng(8);
  std::vector<int> g(n, 0), r(n);
  for (size_t i = 0; i < n; ++i) r[i] = RandomizedResponse(0, 1.0, 2, rng);
  EXPECT_NEAR(*EstimateEtaConditional(g, r, 2, OneStratum(n)), RrEta(1.0, 2), 0.005);
}

TEST(TvTest, ExamplesAndMetricProperties) {
  using T = Tuple;
  const std::vector<T> a = {{0, 1}, {0, 1}, {1, 0}, {1, 1}};
  const std::vector<T> disjoint = {{2, 2}};
  EXPECT_DOUBLE_EQ(*EstimateTv(a, a), 0.0);
  EXPECT_DOUBLE_EQ(*EstimateTv(a, disjoint), 1.0);
  const std::vector<T> b = {{0, 1}, {1, 0}};
  // a: {01: 1/2, 10: 1/4, 11: 1/4}; b: {01: 1/2, 10: 1/2}.
  EXPECT_DOUBLE_EQ(*EstimateTv(a, b), 0.25);
  EXPECT_FALSE(EstimateTv(a, std::vector<T>{}).ok());

  Rng rng(12);
  auto sample = [&](size_t n, int bias) {
    std::vector<T> z(n);
    for (T& t : z) {
      t = {static_cast<int>(rng.UniformInt(3)),
           static_cast<int>(rng.UniformInt(2 + bias))};
    }
    return z;
  };
  for (int t = 0; t < 50; ++t) {
    auto x = sample(20 + t, 0), y = sample(30, 1), z = sample(15, 2);
    const double xy = *EstimateTv(x, y);
    EXPECT_GE(xy, 0.0);
    EXPECT_LE(xy, 1.0);
    EXPECT_NEAR(xy, *EstimateTv(y, x), 1e-12);
    EXPECT_LE(xy, *EstimateTv(x, z) + *EstimateTv(z, y) + 1e-12);
  }
}

TEST(StrataTest, ClusterStrataCoverEveryRow) {
  Dataset d = Synth(2000, 3.0, 5, 3);
  FP_ASSERT_OK_AND_ASSIGN(Strata s, MakeStrata(d));
  ASSERT_EQ(s.ids.size(), d.size());
  EXPECT_LE(s.num_strata, 2 * 3 * 2);  // clusters x labels
  std::set<int> used(s.ids.begin(), s.ids.end());
  EXPECT_EQ(static_cast<int>(used.size()), s.num_strata);
  EXPECT_EQ(*used.begin(), 0);
  EXPECT_EQ(*used.rbegin(), s.num_strata - 1);
}

TEST(StrataTest, MedianStrataWithoutClusters) {
  Rng rng(6);
  std::vector<std::vector<double>> rows;
  std::vector<int> g, y;
  for (int i = 0; i < 500; ++i) {
    std::vector<double> row(10);
    for (double& v : row) v = rng.Gaussian();
    rows.push_back(row);
    g.push_back(i % 2);
    y.push_back(static_cast<int>(rng.UniformInt(2)));
  }
  Dataset d = MakeDataset(rows, g, y);
  FP_ASSERT_OK_AND_ASSIGN(Strata s, MakeStrata(d, 64));
  EXPECT_LE(s.num_strata, 64);
  EXPECT_GT(s.num_strata, 16);
  std::set<int> used(s.ids.begin(), s.ids.end());
  EXPECT_EQ(static_cast<int>(used.size()), s.num_strata);
}

TEST(VerifyVoteTest, ConstantTeachersAreFairAndBoundIsTight) {
  // Group-independent data and constant predictions: both sides near zero.
  Rng rng(7);
  const size_t n = 4000;
  std::vector<std::vector<double>> rows(n, {0.0});
  std::vector<int> g(n), y(n);
  for (size_t i = 0; i < n; ++i) {
    g[i] = static_cast<int>(rng.UniformInt(2));
    y[i] = static_cast<int>(rng.UniformInt(2));
  }
  Dataset d = MakeDataset(rows, g, y);
  std::vector<std::vector<int>> preds(3, std::vector<int>(n, 1));
  const std::vector<uint64_t> seeds = {1, 2};
  FP_ASSERT_OK_AND_ASSIGN(
      BoundReport r,
      VerifyVoteFromPredictions(preds, 2, d, 0.0, seeds, *ParseNotion("dp")));
  EXPECT_EQ(r.kind, "vote");
  EXPECT_DOUBLE_EQ(r.measured, 0.0);
  EXPECT_LT(r.bound, 0.05);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.min_prob_released, r.min_prob_true);
}

TEST(VerifyVoteTest, GroupRevealingTeachersSaturateTheBound) {
  // Teachers that output the group: the vote is maximally unfair and the
  // conditional distributions of Z are disjoint, so TV = 1.
  const size_t n = 1000;
  std::vector<std::vector<double>> rows(n, {0.0});
  std::vector<int> g(n), y(n, 0);
  for (size_t i = 0; i < n; ++i) g[i] = static_cast<int>(i % 2);
  Dataset d = MakeDataset(rows, g, y);
  std::vector<std::vector<int>> preds(3, g);
  const std::vector<uint64_t> seeds = {1};
  FP_ASSERT_OK_AND_ASSIGN(
      BoundReport r,
      VerifyVoteFromPredictions(preds, 2, d, 0.0, seeds, *ParseNotion("dp")));
  EXPECT_DOUBLE_EQ(r.measured, 0.5);
  EXPECT_GE(r.bound, r.measured);
  EXPECT_TRUE(r.holds);
}

TEST(VerifyVoteTest, SmallGroupsRejected) {
  Dataset d = MakeDataset({{0.0}, {1.0}, {2.0}}, {0, 1, 0}, {0, 1, 1});
  std::vector<std::vector<int>> preds(1, std::vector<int>(3, 0));
  const std::vector<uint64_t> seeds = {1};
  EXPECT_FALSE(
      VerifyVoteFromPredictions(preds, 2, d, 0.0, seeds, *ParseNotion("dp")).ok());
  EXPECT_TRUE(VerifyVoteFromPredictions(preds, 2, d, 0.0, seeds, *ParseNotion("dp"),
                                        kBoundTolerance, 1)
                  .ok());
}

TrainConfig Quick() {
  TrainConfig c;
  c.epochs = 15;
  c.learning_rate = 1e-2;
  c.batch_size = 64;
  c.hidden1 = 16;
  c.hidden2 = 16;
  return c;
}

TEST(TrialTest, TransferTrialIsConsistent) {
  TransferTrialConfig c;
  c.data.n = 3000;
  c.epsilon = 1.0;
  c.fairness = *ParseNotion("dp");
  c.fairness.alpha = 0.05;
  c.train = Quick();
  FP_ASSERT_OK_AND_ASSIGN(BoundReport r, RunTransferTrial(c, 4));
  EXPECT_EQ(r.kind, "transfer");
  EXPECT_EQ(r.seed, 4u);
  const double min_p = std::min(r.min_prob_released, r.min_prob_true);
  EXPECT_NEAR(r.bound, r.eta * r.b / min_p + r.alpha, 1e-12);
  EXPECT_EQ(r.holds, r.measured <= r.bound + r.tolerance);
  EXPECT_TRUE(r.holds);
  FP_ASSERT_OK_AND_ASSIGN(BoundReport again, RunTransferTrial(c, 4));
  EXPECT_EQ(again.measured, r.measured);
  auto j = nlohmann::json::parse(r.ToJson());
  EXPECT_EQ(j["kind"], "transfer");
  EXPECT_EQ(j["holds"], r.holds);
}

TEST(TrialTest, VoteTrialIsConsistent) {
  VoteTrialConfig c;
  c.data.n = 3000;
  c.fairness = *ParseNotion("dp");
  c.train = Quick();
  c.noise_draws = 3;
  FP_ASSERT_OK_AND_ASSIGN(BoundReport r, RunVoteTrial(c, 2));
  EXPECT_EQ(r.kind, "vote");
  EXPECT_GE(r.bound, 0.0);
  EXPECT_LE(r.bound, 1.0);
  EXPECT_TRUE(r.holds);
}

}  // namespace
}  // namespace fairpate
