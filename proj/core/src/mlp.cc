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

#include "fairpate/mlp.h"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"
#include "json.hpp"

namespace fairpate {

size_t Architecture::ParameterCount() const {
  const size_t d = static_cast<size_t>(input_dims);
  const size_t h1 = static_cast<size_t>(hidden1);
  const size_t h2 = static_cast<size_t>(hidden2);
  const size_t c = static_cast<size_t>(num_classes);
  return h1 * d + h1 + h2 * h1 + h2 + c * h2 + c;
}

MlpParams::MlpParams(const Architecture& arch) : arch_(arch) {
  theta_ = Vector::Zero(static_cast<Eigen::Index>(arch.ParameterCount()));
  ComputeOffsets();
}

void MlpParams::ComputeOffsets() {
  const size_t d = static_cast<size_t>(arch_.input_dims);
  const size_t h1 = static_cast<size_t>(arch_.hidden1);
  const size_t h2 = static_cast<size_t>(arch_.hidden2);
  offsets_[0] = 0;
  offsets_[1] = offsets_[0] + h1 * d;
  offsets_[2] = offsets_[1] + h1;
  offsets_[3] = offsets_[2] + h2 * h1;
  offsets_[4] = offsets_[3] + h2;
  offsets_[5] = offsets_[4] + static_cast<size_t>(arch_.num_classes) * h2;
}

MlpParams MlpParams::Initialize(const Architecture& arch, uint64_t seed) {
  MlpParams p(arch);
  Rng rng(seed);
  auto fill = [&](MatrixMap w) {
    const double bound = std::sqrt(6.0 / static_cast<double>(w.cols()));
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) {
        w(i, j) = (2.0 * rng.Uniform() - 1.0) * bound;
      }
    }
  };
  fill(p.w1());
  fill(p.w2());
  fill(p.w3());
  return p;
}

absl::Status TrainConfig::Validate() const {
  if (epochs < 1) return absl::InvalidArgumentError("epochs must be >= 1");
  if (batch_size < 1) return absl::InvalidArgumentError("batch_size must be >= 1");
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    return absl::InvalidArgumentError("learning_rate must be > 0");
  }
  if (hidden1 < 1 || hidden2 < 1) {
    return absl::InvalidArgumentError("hidden sizes must be >= 1");
  }
  return absl::OkStatus();
}

void ForwardInto(const MlpParams& params, const Eigen::Ref<const Matrix>& x,
                 ForwardCache& cache) {
  cache.z1.noalias() = x * params.w1().transpose();
  cache.z1.rowwise() += params.b1().transpose();
  cache.a1 = cache.z1.cwiseMax(0.0);
  cache.z2.noalias() = cache.a1 * params.w2().transpose();
  cache.z2.rowwise() += params.b2().transpose();
  cache.a2 = cache.z2.cwiseMax(0.0);
  cache.logits.noalias() = cache.a2 * params.w3().transpose();
  cache.logits.rowwise() += params.b3().transpose();
  cache.probs = cache.logits;
  for (Eigen::Index i = 0; i < cache.probs.rows(); ++i) {
    auto row = cache.probs.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
}

absl::StatusOr<Matrix> Forward(const MlpParams& params, const Matrix& x) {
  if (x.cols() != params.arch().input_dims) {
    return absl::InvalidArgumentError(
        absl::StrCat("input has ", x.cols(), " columns, model expects ",
                     params.arch().input_dims));
  }
  if (!x.allFinite()) {
    return absl::InvalidArgumentError("input contains non-finite values");
  }
  ForwardCache cache;
  ForwardInto(params, x, cache);
  return std::move(cache.probs);
}

absl::StatusOr<double> Loss(const Matrix& probs, std::span<const int> labels) {
  if (static_cast<size_t>(probs.rows()) != labels.size()) {
    return absl::InvalidArgumentError("probability/label row mismatch");
  }
  if (labels.empty()) return 0.0;
  double total = 0.0;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= probs.cols()) {
      return absl::InvalidArgumentError(
          absl::StrCat("label ", labels[i], " out of range at row ", i));
    }
    total -= std::log(std::max(
        probs(static_cast<Eigen::Index>(i), labels[i]), kProbClamp));
  }
  return total / static_cast<double>(labels.size());
}

Vector BackwardFromLogits(const MlpParams& params, const ForwardCache& cache,
                          const Eigen::Ref<const Matrix>& x,
                          const Matrix& dlogits) {
  Vector grad(params.flat().size());
  MlpParams view(params.arch());
  // Reuse the offsets of a params object to address gradient blocks.
  view.flat().setZero();
  view.w3().noalias() = dlogits.transpose() * cache.a2;
  view.b3() = dlogits.colwise().sum().transpose();
  Matrix d2 = dlogits * params.w3();
  d2 = (cache.z2.array() > 0.0).select(d2, 0.0);
  view.w2().noalias() = d2.transpose() * cache.a1;
  view.b2() = d2.colwise().sum().transpose();
  Matrix d1 = d2 * params.w2();
  d1 = (cache.z1.array() > 0.0).select(d1, 0.0);
  view.w1().noalias() = d1.transpose() * x;
  view.b1() = d1.colwise().sum().transpose();
  grad = std::move(view.flat());
  return grad;
}

absl::StatusOr<Vector> Backward(const MlpParams& params, const Matrix& x,
                                std::span<const int> labels) {
  if (x.cols() != params.arch().input_dims) {
    return absl::InvalidArgumentError("input dimension mismatch");
  }
  if (static_cast<size_t>(x.rows()) != labels.size() || labels.empty()) {
    return absl::InvalidArgumentError("need one label per (nonzero) row");
  }
  ForwardCache cache;
  ForwardInto(params, x, cache);
  Matrix dlogits = cache.probs;
  for (size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] < 0 || labels[i] >= params.arch().num_classes) {
      return absl::InvalidArgumentError("label out of range");
    }
    dlogits(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  }
  dlogits /= static_cast<double>(labels.size());
  return BackwardFromLogits(params, cache, x, dlogits);
}

std::vector<int> ArgmaxRows(const Matrix& probs) {
  std::vector<int> out(static_cast<size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    int best = 0;
    for (Eigen::Index j = 1; j < probs.cols(); ++j) {
      if (probs(i, j) > probs(i, best)) best = static_cast<int>(j);
    }
    out[static_cast<size_t>(i)] = best;
  }
  return out;
}

std::vector<int> Predict(const MlpParams& params, const Matrix& x) {
  ForwardCache cache;
  ForwardInto(params, x, cache);
  return ArgmaxRows(cache.probs);
}

double Accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (labels.empty()) return 0.0;
  size_t hits = 0;
  for (size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

Adam::Adam(Eigen::Index size, double learning_rate, double beta1, double beta2,
           double epsilon)
    : lr_(learning_rate),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(Vector::Zero(size)),
      v_(Vector::Zero(size)) {}

void Adam::Step(Vector& theta, const Vector& grad) {
  beta1_pow_ *= beta1_;
  beta2_pow_ *= beta2_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * grad;
  v_ = beta2_ * v_ + (1.0 - beta2_) * grad.cwiseProduct(grad);
  const double c1 = 1.0 / (1.0 - beta1_pow_);
  const double c2 = 1.0 / (1.0 - beta2_pow_);
  theta.array() -=
      lr_ * (m_.array() * c1) / ((v_.array() * c2).sqrt() + eps_);
}

absl::StatusOr<MlpParams> RunMinibatchAdam(size_t num_rows,
                                           const Architecture& arch,
                                           const TrainConfig& config,
                                           const BatchObjective& objective,
                                           const EpochHook& on_epoch_end) {
  FAIRPATE_RETURN_IF_ERROR(config.Validate());
  if (num_rows == 0) return absl::InvalidArgumentError("no training rows");
  MlpParams params = MlpParams::Initialize(arch, DeriveSeed(config.seed, 0));
  Rng shuffle_rng(DeriveSeed(config.seed, 1));
  Adam adam(params.flat().size(), config.learning_rate);
  std::vector<size_t> order(num_rows);
  for (size_t i = 0; i < num_rows; ++i) order[i] = i;
  const size_t batch = static_cast<size_t>(config.batch_size);
  Vector grad(params.flat().size());
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    shuffle_rng.Shuffle(std::span<size_t>(order));
    for (size_t start = 0; start < num_rows; start += batch) {
      const size_t len = std::min(batch, num_rows - start);
      grad.setZero();
      FAIRPATE_ASSIGN_OR_RETURN(
          const double value,
          objective(std::span<const size_t>(order).subspan(start, len), params,
                    grad));
      if (!std::isfinite(value) || !grad.allFinite()) {
        return absl::InternalError(absl::StrFormat(
            "non-finite training objective (%g) at epoch %d, batch offset %d",
            value, epoch, start));
      }
      adam.Step(params.flat(), grad);
    }
    if (on_epoch_end) FAIRPATE_RETURN_IF_ERROR(on_epoch_end(epoch, params));
  }
  if (!params.AllFinite()) {
    return absl::InternalError("training produced non-finite parameters");
  }
  return params;
}

double CrossEntropyBatch(const Matrix& features, std::span<const int> labels,
                         std::span<const size_t> batch, const MlpParams& params,
                         Matrix& xb, ForwardCache& cache, Matrix& dlogits) {
  const auto b = static_cast<Eigen::Index>(batch.size());
  xb.resize(b, features.cols());
  for (Eigen::Index k = 0; k < b; ++k) {
    xb.row(k) =
        features.row(static_cast<Eigen::Index>(batch[static_cast<size_t>(k)]));
  }
  ForwardInto(params, xb, cache);
  dlogits = cache.probs;
  double loss = 0.0;
  for (Eigen::Index k = 0; k < b; ++k) {
    const int y = labels[batch[static_cast<size_t>(k)]];
    loss -= std::log(std::max(cache.probs(k, y), kProbClamp));
    dlogits(k, y) -= 1.0;
  }
  dlogits /= static_cast<double>(b);
  return loss / static_cast<double>(b);
}

namespace {

absl::Status CheckTrainable(const Dataset& data, const TrainConfig& config,
                            std::span<const int> labels) {
  FAIRPATE_RETURN_IF_ERROR(config.Validate());
  if (data.empty()) {
    return absl::InvalidArgumentError("empty training set");
  }
  if (labels.size() != data.size()) {
    return absl::InvalidArgumentError("label override length mismatch");
  }
  for (int y : labels) {
    if (y < 0 || y >= data.num_labels()) {
      return absl::InvalidArgumentError("label override out of range");
    }
  }
  if (!data.features().allFinite()) {
    return absl::InvalidArgumentError("training features are not finite");
  }
  return absl::OkStatus();
}

// Cross-entropy (+ optional proximal term) objective on a batch.
BatchObjective CrossEntropyObjective(const Dataset& data,
                                     std::span<const int> labels,
                                     const MlpParams* theta_star,
                                     double lambda) {
  struct Scratch {
    Matrix xb, dlogits;
    ForwardCache cache;
  };
  auto scratch = std::make_shared<Scratch>();
  return [&data, labels, theta_star, lambda, scratch](
             std::span<const size_t> batch, const MlpParams& params,
             Vector& grad) -> absl::StatusOr<double> {
    double loss =
        CrossEntropyBatch(data.features(), labels, batch, params, scratch->xb,
                          scratch->cache, scratch->dlogits);
    grad = BackwardFromLogits(params, scratch->cache, scratch->xb,
                              scratch->dlogits);
    if (theta_star != nullptr && lambda > 0.0) {
      const Vector diff = params.flat() - theta_star->flat();
      loss += lambda * diff.squaredNorm();
      grad += 2.0 * lambda * diff;
    }
    return loss;
  };
}

}  // namespace

absl::StatusOr<MlpParams> TrainErm(const Dataset& data,
                                   const TrainConfig& config) {
  FAIRPATE_RETURN_IF_ERROR(CheckTrainable(data, config, data.labels()));
  const Architecture arch =
      config.ArchitectureFor(data.dims(), data.num_labels());
  return RunMinibatchAdam(
      data.size(), arch, config,
      CrossEntropyObjective(data, data.labels(), nullptr, 0.0));
}

absl::StatusOr<MlpParams> TrainProximal(const Dataset& data,
                                        const std::vector<int>* labels_override,
                                        const MlpParams& theta_star,
                                        double lambda,
                                        const TrainConfig& config) {
  std::span<const int> labels =
      labels_override != nullptr ? std::span<const int>(*labels_override)
                                 : data.labels();
  FAIRPATE_RETURN_IF_ERROR(CheckTrainable(data, config, labels));
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    return absl::InvalidArgumentError("lambda must be finite and >= 0");
  }
  const Architecture arch =
      config.ArchitectureFor(data.dims(), data.num_labels());
  if (!(theta_star.arch() == arch)) {
    return absl::InvalidArgumentError(
        "theta_star architecture does not match the training architecture");
  }
  return RunMinibatchAdam(
      data.size(), arch, config,
      CrossEntropyObjective(data, labels, &theta_star, lambda));
}

// ---------------------------------------------------------------------------

std::string SerializeParams(const MlpParams& params) {
  static_assert(std::endian::native == std::endian::little,
                "serialization assumes a little-endian host");
  std::string out(kMlpMagic, 8);
  const Architecture& a = params.arch();
  const int32_t header[4] = {a.input_dims, a.hidden1, a.hidden2,
                             a.num_classes};
  out.append(reinterpret_cast<const char*>(header), sizeof(header));
  out.append(reinterpret_cast<const char*>(params.flat().data()),
             static_cast<size_t>(params.flat().size()) * sizeof(double));
  return out;
}

absl::StatusOr<MlpParams> DeserializeParams(std::string_view bytes) {
  constexpr size_t kHeader = 8 + 4 * sizeof(int32_t);
  if (bytes.size() < kHeader || bytes.substr(0, 8) != std::string_view(kMlpMagic, 8)) {
    return absl::InvalidArgumentError("not a serialized MLP (bad magic)");
  }
  int32_t header[4];
  std::memcpy(header, bytes.data() + 8, sizeof(header));
  for (int32_t h : header) {
    if (h < 1) return absl::InvalidArgumentError("bad architecture header");
  }
  Architecture arch{header[0], header[1], header[2], header[3]};
  MlpParams params(arch);
  const size_t payload = static_cast<size_t>(params.flat().size()) * sizeof(double);
  if (bytes.size() != kHeader + payload) {
    return absl::InvalidArgumentError("serialized MLP has wrong length");
  }
  std::memcpy(params.flat().data(), bytes.data() + kHeader, payload);
  if (!params.AllFinite()) {
    return absl::InvalidArgumentError("serialized MLP has non-finite weights");
  }
  return params;
}

std::string ParamsToJson(const MlpParams& params) {
  nlohmann::json j;
  j["magic"] = kMlpMagic;
  j["d"] = params.arch().input_dims;
  j["h1"] = params.arch().hidden1;
  j["h2"] = params.arch().hidden2;
  j["label_count"] = params.arch().num_classes;
  j["weights"] = std::vector<double>(params.flat().data(),
                                     params.flat().data() + params.flat().size());
  return j.dump();
}

absl::StatusOr<MlpParams> ParamsFromJson(std::string_view text) {
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded() || !j.is_object()) {
    return absl::InvalidArgumentError("MLP JSON does not parse");
  }
  if (j.value("magic", "") != std::string(kMlpMagic)) {
    return absl::InvalidArgumentError("MLP JSON has bad magic");
  }
  try {
    Architecture arch{j.at("d").get<int>(), j.at("h1").get<int>(),
                      j.at("h2").get<int>(), j.at("label_count").get<int>()};
    if (arch.input_dims < 1 || arch.hidden1 < 1 || arch.hidden2 < 1 ||
        arch.num_classes < 1) {
      return absl::InvalidArgumentError("bad architecture header");
    }
    const auto weights = j.at("weights").get<std::vector<double>>();
    MlpParams params(arch);
    if (weights.size() != static_cast<size_t>(params.flat().size())) {
      return absl::InvalidArgumentError("MLP JSON has wrong weight count");
    }
    params.flat() = Eigen::Map<const Vector>(
        weights.data(), static_cast<Eigen::Index>(weights.size()));
    if (!params.AllFinite()) {
      return absl::InvalidArgumentError("MLP JSON has non-finite weights");
    }
    return params;
  } catch (const nlohmann::json::exception& e) {
    return absl::InvalidArgumentError(absl::StrCat("MLP JSON: ", e.what()));
  }
}

}  // namespace fairpate
