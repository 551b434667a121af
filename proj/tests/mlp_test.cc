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
#include <limits>

#include "fairpate/dataset.h"
#include "fairpate/mlp.h"
#include "fairpate/random.h"
#include "grad_check.h"
#include "gtest/gtest.h"
#include "test_util.h"

namespace fairpate {
namespace {

using testing::MakeDataset;
using testing::Synth;

Architecture Arch(int d, int c = 2) { return Architecture{d, 8, 6, c}; }

TEST(ArchitectureTest, ParameterCount) {
  // 3*8+8 + 8*6+6 + 6*2+2
  EXPECT_EQ(Arch(3).ParameterCount(), 32u + 54u + 14u);
}

TEST(ForwardTest, ZeroParamsGiveUniformRows) {
  MlpParams p(Arch(3, 4));
  Matrix x = Matrix::Random(5, 3);
  FP_ASSERT_OK_AND_ASSIGN(Matrix probs, Forward(p, x));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    for (Eigen::Index j = 0; j < 4; ++j) EXPECT_DOUBLE_EQ(probs(i, j), 0.25);
  }
}

TEST(ForwardTest, RowsSumToOneAndLargeLogitDominates) {
  MlpParams p = MlpParams::Initialize(Arch(3), 1);
  Matrix x = Matrix::Random(7, 3);
  FP_ASSERT_OK_AND_ASSIGN(Matrix probs, Forward(p, x));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    EXPECT_NEAR(probs.row(i).sum(), 1.0, 1e-9);
    EXPECT_GE(probs.row(i).minCoeff(), 0.0);
  }
  MlpParams q(Arch(3));
  q.b3()[1] = 20.0;
  FP_ASSERT_OK_AND_ASSIGN(Matrix sharp, Forward(q, x.topRows(1)));
  EXPECT_GT(sharp(0, 1), 0.999);
}

TEST(ForwardTest, RejectsBadInput) {
  MlpParams p(Arch(3));
  EXPECT_FALSE(Forward(p, Matrix::Zero(2, 4)).ok());
  Matrix x = Matrix::Zero(2, 3);
  x(1, 2) = std::numeric_limits<double>::quiet_NaN();
  EXPECT_FALSE(Forward(p, x).ok());
}

TEST(LossTest, ClosedForms) {
  Matrix perfect(1, 2);
  perfect << 1.0, 0.0;
  EXPECT_NEAR(*Loss(perfect, std::vector<int>{0}), 0.0, 1e-15);
  Matrix uniform = Matrix::Constant(3, 2, 0.5);
  EXPECT_NEAR(*Loss(uniform, std::vector<int>{0, 1, 1}), std::log(2.0), 1e-12);
  // Clamp guards a zero-probability true class.
  EXPECT_NEAR(*Loss(perfect, std::vector<int>{1}), -std::log(kProbClamp), 1e-9);
  EXPECT_FALSE(Loss(uniform, std::vector<int>{0, 2, 1}).ok());
}

TEST(LossTest, BatchMeanOfRowLosses) {
  Matrix p(2, 2);
  p << 0.8, 0.2, 0.3, 0.7;
  const double l0 = *Loss(p.topRows(1), std::vector<int>{0});
  const double l1 = *Loss(p.bottomRows(1), std::vector<int>{0});
  EXPECT_NEAR(*Loss(p, std::vector<int>{0, 0}), 0.5 * (l0 + l1), 1e-15);
}

TEST(BackwardTest, MatchesFiniteDifferences) {
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::CheckRandomConfiguration(seed);
    EXPECT_LT(r.max_rel_error, 1e-4) << "seed " << seed;
    EXPECT_GT(r.checked, 0u);
  }
}

TEST(BackwardTest, DuplicatedBatchHasSameGradient) {
  MlpParams p = MlpParams::Initialize(Arch(2), 3);
  Matrix x(2, 2);
  x << 0.5, -1.0, 2.0, 0.1;
  Matrix xx(4, 2);
  xx << x, x;
  FP_ASSERT_OK_AND_ASSIGN(Vector g1, Backward(p, x, std::vector<int>{0, 1}));
  FP_ASSERT_OK_AND_ASSIGN(Vector g2, Backward(p, xx, std::vector<int>{0, 1, 0, 1}));
  EXPECT_LT((g1 - g2).norm(), 1e-12);
}

TEST(BackwardTest, NearZeroAtSeparableOptimum) {
  Dataset d = MakeDataset({{-1.0}, {1.0}}, {0, 1}, {0, 1});
  TrainConfig c;
  c.epochs = 3000;
  c.batch_size = 2;
  c.learning_rate = 1e-2;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams p, TrainErm(d, c));
  FP_ASSERT_OK_AND_ASSIGN(Vector g, Backward(p, d.features(), d.labels()));
  EXPECT_LT(g.norm(), 1e-3);
}

TEST(PredictTest, ArgmaxTiesToLowest) {
  Matrix p(2, 3);
  p << 0.4, 0.4, 0.2, 0.1, 0.45, 0.45;
  EXPECT_EQ(ArgmaxRows(p), (std::vector<int>{0, 1}));
  EXPECT_DOUBLE_EQ(Accuracy(std::vector<int>{0, 1, 1}, std::vector<int>{0, 0, 1}),
                   2.0 / 3.0);
}

TEST(TrainErmTest, SeparableGaussiansReachHighAccuracy) {
  // Class means 4 standard deviations apart on the first axis.
  Rng rng(5);
  auto make = [&](size_t n) {
    std::vector<std::vector<double>> rows;
    std::vector<int> g, y;
    for (size_t i = 0; i < n; ++i) {
      const int label = static_cast<int>(rng.UniformInt(2));
      rows.push_back({(label ? 2.0 : -2.0) + rng.Gaussian(), rng.Gaussian()});
      g.push_back(static_cast<int>(rng.UniformInt(2)));
      y.push_back(label);
    }
    return MakeDataset(rows, g, y);
  };
  Dataset train = make(500), test = make(2000);
  TrainConfig c;
  c.epochs = 50;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams p, TrainErm(train, c));
  EXPECT_GE(Accuracy(Predict(p, test.features()), test.labels()), 0.95);
}

TEST(TrainErmTest, ConstantLabelIsPredictedEverywhere) {
  Dataset d = Synth(200, 0.0, 6);
  FP_ASSERT_OK_AND_ASSIGN(Dataset ones, d.WithLabels(std::vector<int>(200, 1)));
  TrainConfig c;
  c.epochs = 20;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams p, TrainErm(ones, c));
  for (int y : Predict(p, Synth(100, 0.0, 7).features())) EXPECT_EQ(y, 1);
}

TEST(TrainErmTest, DeterministicPerSeed) {
  Dataset d = Synth(300, 1.0, 8);
  TrainConfig c;
  c.epochs = 5;
  c.seed = 42;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams a, TrainErm(d, c));
  FP_ASSERT_OK_AND_ASSIGN(MlpParams b, TrainErm(d, c));
  EXPECT_EQ(a.flat(), b.flat());
  c.seed = 43;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams e, TrainErm(d, c));
  EXPECT_NE(a.flat(), e.flat());
}

TEST(TrainErmTest, RejectsInvalidConfig) {
  Dataset d = Synth(50, 1.0, 9);
  TrainConfig c;
  c.epochs = 0;
  EXPECT_FALSE(TrainErm(d, c).ok());
  c = TrainConfig{};
  c.learning_rate = 0;
  EXPECT_FALSE(TrainErm(d, c).ok());
}

TEST(TrainErmTest, NonFiniteLossAborts) {
  Dataset d = Synth(50, 1.0, 10);
  TrainConfig c;
  c.epochs = 50;
  c.learning_rate = 1e300;
  auto r = TrainErm(d, c);
  if (!r.ok()) {
    EXPECT_EQ(r.status().code(), absl::StatusCode::kInternal);
  } else {
    EXPECT_TRUE(r->AllFinite());
  }
}

TEST(TrainProximalTest, ZeroLambdaMatchesErm) {
  Dataset d = Synth(300, 1.0, 11);
  TrainConfig c;
  c.epochs = 5;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams erm, TrainErm(d, c));
  MlpParams star = MlpParams::Initialize(c.ArchitectureFor(d.dims(), 2), 99);
  FP_ASSERT_OK_AND_ASSIGN(MlpParams prox, TrainProximal(d, nullptr, star, 0.0, c));
  EXPECT_EQ(erm.flat(), prox.flat());
}

TEST(TrainProximalTest, DistanceToReferenceShrinksWithLambda) {
  Dataset d = Synth(300, 1.0, 12);
  TrainConfig c;
  c.epochs = 20;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams star, TrainErm(d, c));
  c.seed = 7;
  c.batch_size = 16;
  c.epochs = 100;
  std::vector<double> dist;
  for (double lambda : {0.0, 1e-2, 1.0, 1e6}) {
    FP_ASSERT_OK_AND_ASSIGN(MlpParams p, TrainProximal(d, nullptr, star, lambda, c));
    dist.push_back((p.flat() - star.flat()).norm());
  }
  EXPECT_LT(dist[1], dist[0]);
  EXPECT_LT(dist[2], dist[1]);
  // Past lambda = 1 the pull saturates at Adam's step-size floor.
  EXPECT_LT(dist[3], 1.05 * dist[2]);
  // Adam's second moment remembers the early huge gradients, so the pull is
  // strong but not exact within a finite budget.
  EXPECT_LT(dist.back(), 0.15 * dist.front());
}

TEST(TrainProximalTest, SmallLambdaKeepsAccuracy) {
  Dataset train = Synth(2000, 1.0, 13), test = Synth(2000, 1.0, 14);
  TrainConfig c;
  c.epochs = 30;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams star, TrainErm(train, c));
  c.seed = 1;
  FP_ASSERT_OK_AND_ASSIGN(MlpParams free, TrainProximal(train, nullptr, star, 0.0, c));
  FP_ASSERT_OK_AND_ASSIGN(MlpParams prox, TrainProximal(train, nullptr, star, 1e-3, c));
  EXPECT_NEAR(Accuracy(Predict(prox, test.features()), test.labels()),
              Accuracy(Predict(free, test.features()), test.labels()), 0.03);
}

TEST(TrainProximalTest, LabelOverrideIsUsedAndChecked) {
  Dataset d = Synth(100, 1.0, 15);
  TrainConfig c;
  c.epochs = 30;
  MlpParams star(c.ArchitectureFor(d.dims(), 2));
  std::vector<int> zeros(100, 0);
  FP_ASSERT_OK_AND_ASSIGN(MlpParams p, TrainProximal(d, &zeros, star, 0.0, c));
  for (int y : Predict(p, d.features())) EXPECT_EQ(y, 0);
  std::vector<int> short_labels(10, 0);
  EXPECT_FALSE(TrainProximal(d, &short_labels, star, 0.0, c).ok());
  MlpParams wrong(Architecture{d.dims() + 1, 32, 32, 2});
  EXPECT_FALSE(TrainProximal(d, nullptr, wrong, 1.0, c).ok());
}

TEST(SerializationTest, BinaryAndJsonRoundTrip) {
  MlpParams p = MlpParams::Initialize(Arch(3, 3), 17);
  const std::string bytes = SerializeParams(p);
  EXPECT_EQ(bytes.substr(0, 8), "FPMLP001");
  FP_ASSERT_OK_AND_ASSIGN(MlpParams back, DeserializeParams(bytes));
  EXPECT_EQ(back.arch(), p.arch());
  EXPECT_EQ(back.flat(), p.flat());
  FP_ASSERT_OK_AND_ASSIGN(MlpParams from_json, ParamsFromJson(ParamsToJson(p)));
  EXPECT_EQ(from_json.flat(), p.flat());
  EXPECT_FALSE(DeserializeParams("garbage").ok());
  EXPECT_FALSE(DeserializeParams(bytes.substr(0, bytes.size() - 1)).ok());
  EXPECT_FALSE(ParamsFromJson("{\"magic\":\"nope\"}").ok());
}

TEST(AdamTest, FirstStepMovesByLearningRate) {
  Adam adam(2, 0.1);
  Vector theta = Vector::Zero(2);
  Vector grad(2);
  grad << 3.0, -0.5;
  adam.Step(theta, grad);
  // Bias-corrected first step is lr * sign(g) up to epsilon.
  EXPECT_NEAR(theta[0], -0.1, 1e-6);
  EXPECT_NEAR(theta[1], 0.1, 1e-6);
}

}  // namespace
}  // namespace fairpate
