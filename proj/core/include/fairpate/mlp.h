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

// Two-hidden-layer ReLU classifier with softmax output, trained by minibatch
// Adam on mean cross-entropy.

#ifndef FAIRPATE_MLP_H_
#define FAIRPATE_MLP_H_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "Eigen/Core"
#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"

namespace fairpate {

struct Architecture {
  int input_dims = 0;
  int hidden1 = 32;
  int hidden2 = 32;
  int num_classes = 2;

  size_t ParameterCount() const;
  bool operator==(const Architecture&) const = default;
};

// Parameters stored as one flat vector in the order W1, b1, W2, b2, W3, b3,
// each weight matrix row-major with shape (fan_out, fan_in).
class MlpParams {
 public:
  using MatrixMap = Eigen::Map<Matrix>;
  using ConstMatrixMap = Eigen::Map<const Matrix>;
  using VectorMap = Eigen::Map<Vector>;
  using ConstVectorMap = Eigen::Map<const Vector>;

  MlpParams() = default;
  // All-zero parameters.
  explicit MlpParams(const Architecture& arch);

  // Uniform He-style initialization: weights ~ U(-sqrt(6/fan_in),
  // sqrt(6/fan_in)), biases zero.
  static MlpParams Initialize(const Architecture& arch, uint64_t seed);

  const Architecture& arch() const { return arch_; }
  Vector& flat() { return theta_; }
  const Vector& flat() const { return theta_; }

  ConstMatrixMap w1() const { return CMat(0, arch_.hidden1, arch_.input_dims); }
  ConstVectorMap b1() const { return CVec(offsets_[1], arch_.hidden1); }
  ConstMatrixMap w2() const { return CMat(2, arch_.hidden2, arch_.hidden1); }
  ConstVectorMap b2() const { return CVec(offsets_[3], arch_.hidden2); }
  ConstMatrixMap w3() const { return CMat(4, arch_.num_classes, arch_.hidden2); }
  ConstVectorMap b3() const { return CVec(offsets_[5], arch_.num_classes); }

  MatrixMap w1() { return Mat(0, arch_.hidden1, arch_.input_dims); }
  VectorMap b1() { return Vec(offsets_[1], arch_.hidden1); }
  MatrixMap w2() { return Mat(2, arch_.hidden2, arch_.hidden1); }
  VectorMap b2() { return Vec(offsets_[3], arch_.hidden2); }
  MatrixMap w3() { return Mat(4, arch_.num_classes, arch_.hidden2); }
  VectorMap b3() { return Vec(offsets_[5], arch_.num_classes); }

  bool AllFinite() const { return theta_.allFinite(); }

 private:
  void ComputeOffsets();
  ConstMatrixMap CMat(int block, int rows, int cols) const {
    return ConstMatrixMap(theta_.data() + offsets_[block], rows, cols);
  }
  MatrixMap Mat(int block, int rows, int cols) {
    return MatrixMap(theta_.data() + offsets_[block], rows, cols);
  }
  ConstVectorMap CVec(size_t off, int n) const {
    return ConstVectorMap(theta_.data() + off, n);
  }
  VectorMap Vec(size_t off, int n) { return VectorMap(theta_.data() + off, n); }

  Architecture arch_;
  Vector theta_;
  size_t offsets_[6] = {0, 0, 0, 0, 0, 0};
};

struct TrainConfig {
  int epochs = 200;
  int batch_size = 32;
  double learning_rate = 1e-3;
  uint64_t seed = 0;
  int hidden1 = 32;
  int hidden2 = 32;

  absl::Status Validate() const;
  Architecture ArchitectureFor(int input_dims, int num_classes) const {
    return Architecture{input_dims, hidden1, hidden2, num_classes};
  }
};

// Intermediate activations of one forward pass.
struct ForwardCache {
  Matrix z1, a1, z2, a2, logits, probs;
};

// Unchecked forward pass; `x` must have arch().input_dims columns.
void ForwardInto(const MlpParams& params, const Eigen::Ref<const Matrix>& x,
                 ForwardCache& cache);

// Row-wise class probabilities.
absl::StatusOr<Matrix> Forward(const MlpParams& params, const Matrix& x);

inline constexpr double kProbClamp = 1e-12;

// Mean cross-entropy with probabilities clamped at kProbClamp.
absl::StatusOr<double> Loss(const Matrix& probs, std::span<const int> labels);

// Gradient of the flat parameter vector given dL/dlogits for every row of
// the cached forward pass.
Vector BackwardFromLogits(const MlpParams& params, const ForwardCache& cache,
                          const Eigen::Ref<const Matrix>& x,
                          const Matrix& dlogits);

// Gradient of the mean cross-entropy over (x, labels).
absl::StatusOr<Vector> Backward(const MlpParams& params, const Matrix& x,
                                std::span<const int> labels);

// Gathers the `batch` rows of `features` into `xb`, runs the forward pass
// into `cache` and returns the mean cross-entropy against `labels` (indexed
// by original row). `dlogits` receives the gradient w.r.t. the logits.
double CrossEntropyBatch(const Matrix& features, std::span<const int> labels,
                         std::span<const size_t> batch, const MlpParams& params,
                         Matrix& xb, ForwardCache& cache, Matrix& dlogits);

// Hard predictions: argmax with ties to the lowest class index.
std::vector<int> ArgmaxRows(const Matrix& probs);
std::vector<int> Predict(const MlpParams& params, const Matrix& x);
double Accuracy(std::span<const int> predictions, std::span<const int> labels);

class Adam {
 public:
  Adam(Eigen::Index size, double learning_rate, double beta1 = 0.9,
       double beta2 = 0.999, double epsilon = 1e-8);
  void Step(Vector& theta, const Vector& grad);

 private:
  double lr_, beta1_, beta2_, eps_;
  double beta1_pow_ = 1.0, beta2_pow_ = 1.0;
  Vector m_, v_;
};

// Callback computing the objective on one minibatch. It must write the
// gradient into `grad` (pre-sized, zeroed) and return the objective value.
using BatchObjective = std::function<absl::StatusOr<double>(
    std::span<const size_t> batch, const MlpParams& params, Vector& grad)>;

// Called after every epoch; a non-OK status aborts training.
using EpochHook = std::function<absl::Status(int epoch, const MlpParams&)>;

// Shared minibatch Adam loop. Initialization draws from
// DeriveSeed(config.seed, 0) and batch shuffling from DeriveSeed(seed, 1), so
// every trainer built on this loop follows the same trajectory when its
// extra objective terms vanish.
absl::StatusOr<MlpParams> RunMinibatchAdam(size_t num_rows,
                                           const Architecture& arch,
                                           const TrainConfig& config,
                                           const BatchObjective& objective,
                                           const EpochHook& on_epoch_end = {});

// Minimizes mean cross-entropy on (features, labels).
absl::StatusOr<MlpParams> TrainErm(const Dataset& data,
                                   const TrainConfig& config);

// Minimizes mean cross-entropy + lambda * ||theta - theta_star||^2. When
// `labels_override` is non-null it replaces the dataset's labels.
absl::StatusOr<MlpParams> TrainProximal(const Dataset& data,
                                        const std::vector<int>* labels_override,
                                        const MlpParams& theta_star,
                                        double lambda,
                                        const TrainConfig& config);

// Serialization. Binary layout: 8-byte magic "FPMLP001", four little-endian
// int32 (d, h1, h2, label_count), then the flat parameters as float64.
inline constexpr char kMlpMagic[] = "FPMLP001";
std::string SerializeParams(const MlpParams& params);
absl::StatusOr<MlpParams> DeserializeParams(std::string_view bytes);
// JSON: {"magic":"FPMLP001","d":..,"h1":..,"h2":..,"label_count":..,
//        "weights":[...]}
std::string ParamsToJson(const MlpParams& params);
absl::StatusOr<MlpParams> ParamsFromJson(std::string_view json);

}  // namespace fairpate

#endif  // FAIRPATE_MLP_H_
