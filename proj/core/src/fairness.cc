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

#include "fairpate/fairness.h"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <limits>
#include <memory>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "fairpate/status_macros.h"

namespace fairpate {

absl::Status FairnessSpec::Validate() const {
  if (!(alpha >= 0.0)) return absl::InvalidArgumentError("alpha must be >= 0");
  if (notion == Notion::kGeneralizedDp && moment_order < 1) {
    return absl::InvalidArgumentError("moment order H must be >= 1");
  }
  if (!(multiplier_step > 0.0) || !std::isfinite(multiplier_step)) {
    return absl::InvalidArgumentError("multiplier step must be > 0");
  }
  if (!(bound_b >= 0.0)) return absl::InvalidArgumentError("B must be >= 0");
  if (!(select_window >= 0.0 && select_window <= 1.0)) {
    return absl::InvalidArgumentError("select_window must lie in [0, 1]");
  }
  return absl::OkStatus();
}

int FairnessSpec::NumComponents() const {
  switch (notion) {
    case Notion::kDemographicParity:
    case Notion::kAccuracyParity:
      return 1;
    case Notion::kEqualizedOdds:
      return 2;
    case Notion::kGeneralizedDp:
      return moment_order;
  }
  return 1;
}

std::string FairnessSpec::Key() const {
  switch (notion) {
    case Notion::kDemographicParity: return "dp";
    case Notion::kEqualizedOdds: return "eo";
    case Notion::kAccuracyParity: return "ap";
    case Notion::kGeneralizedDp: return absl::StrCat("gdp:", moment_order);
  }
  return "dp";
}

absl::StatusOr<FairnessSpec> ParseNotion(std::string_view key) {
  FairnessSpec spec;
  if (key == "dp") {
    spec.notion = Notion::kDemographicParity;
  } else if (key == "eo") {
    spec.notion = Notion::kEqualizedOdds;
  } else if (key == "ap") {
    spec.notion = Notion::kAccuracyParity;
  } else if (key.starts_with("gdp:")) {
    spec.notion = Notion::kGeneralizedDp;
    const std::string_view digits = key.substr(4);
    int h = 0;
    auto [ptr, ec] =
        std::from_chars(digits.data(), digits.data() + digits.size(), h);
    if (ec != std::errc() || ptr != digits.data() + digits.size() || h < 1) {
      return absl::InvalidArgumentError(
          absl::StrCat("bad moment order in notion '", std::string(key), "'"));
    }
    spec.moment_order = h;
  } else {
    return absl::InvalidArgumentError(absl::StrCat(
        "unknown fairness notion '", std::string(key), "' (want dp, eo, ap or gdp:<H>)"));
  }
  return spec;
}

namespace {

absl::Status CheckLabels(std::span<const int> labels, size_t rows,
                         int num_labels, const FairnessSpec& spec) {
  FAIRPATE_RETURN_IF_ERROR(spec.Validate());
  if (labels.size() != rows) {
    return absl::InvalidArgumentError("label count does not match rows");
  }
  if (spec.RequiresBinaryLabels() && num_labels != 2) {
    return absl::InvalidArgumentError(absl::StrCat(
        "notion '", spec.Key(), "' needs binary labels, got label_count=",
        num_labels));
  }
  for (int y : labels) {
    if (y < 0 || y >= num_labels) {
      return absl::InvalidArgumentError("label out of range");
    }
  }
  return absl::OkStatus();
}

}  // namespace

absl::StatusOr<Components> FairnessComponentsFromPredictions(
    std::span<const int> predictions, std::span<const int> labels,
    int num_labels, const FairnessSpec& spec) {
  FAIRPATE_RETURN_IF_ERROR(
      CheckLabels(labels, predictions.size(), num_labels, spec));
  const auto n = static_cast<Eigen::Index>(predictions.size());
  const int c = spec.NumComponents();
  Components out{Matrix::Zero(n, c), Matrix::Ones(n, c)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int pred = predictions[static_cast<size_t>(i)];
    const int y = labels[static_cast<size_t>(i)];
    switch (spec.notion) {
      case Notion::kDemographicParity:
        out.values(i, 0) = pred == 1 ? 1.0 : 0.0;
        break;
      case Notion::kGeneralizedDp:
        // Indicator powers are the indicator itself.
        out.values.row(i).setConstant(pred == 1 ? 1.0 : 0.0);
        break;
      case Notion::kAccuracyParity:
        out.values(i, 0) = pred != y ? 1.0 : 0.0;
        break;
      case Notion::kEqualizedOdds:
        for (int j = 0; j < 2; ++j) {
          out.values(i, j) = (pred == 1 && y == j) ? 1.0 : 0.0;
          out.weights(i, j) = y == j ? 1.0 : 0.0;
        }
        break;
    }
  }
  return out;
}

absl::StatusOr<Components> FairnessComponents(const Matrix& probs,
                                              std::span<const int> labels,
                                              const FairnessSpec& spec) {
  const std::vector<int> preds = ArgmaxRows(probs);
  return FairnessComponentsFromPredictions(
      preds, labels, static_cast<int>(probs.cols()), spec);
}

absl::StatusOr<Components> SurrogateComponents(const Matrix& probs,
                                               std::span<const int> labels,
                                               const FairnessSpec& spec) {
  FAIRPATE_RETURN_IF_ERROR(CheckLabels(labels, static_cast<size_t>(probs.rows()),
                                       static_cast<int>(probs.cols()), spec));
  const Eigen::Index n = probs.rows();
  const int c = spec.NumComponents();
  Components out{Matrix::Zero(n, c), Matrix::Ones(n, c)};
  for (Eigen::Index i = 0; i < n; ++i) {
    const int y = labels[static_cast<size_t>(i)];
    switch (spec.notion) {
      case Notion::kDemographicParity:
        out.values(i, 0) = probs(i, 1);
        break;
      case Notion::kGeneralizedDp: {
        double power = 1.0;
        for (int h = 0; h < c; ++h) {
          power *= probs(i, 1);
          out.values(i, h) = power;
        }
        break;
      }
      case Notion::kAccuracyParity:
        out.values(i, 0) = -std::log(std::max(probs(i, y), kProbClamp));
        break;
      case Notion::kEqualizedOdds:
        for (int j = 0; j < 2; ++j) {
          out.values(i, j) = y == j ? probs(i, 1) : 0.0;
          out.weights(i, j) = y == j ? 1.0 : 0.0;
        }
        break;
    }
  }
  return out;
}

Matrix ComponentGaps(const Components& comps, std::span<const int> groups,
                     int num_groups) {
  const Eigen::Index c = comps.values.cols();
  Matrix sums = Matrix::Zero(num_groups, c);
  Matrix weights = Matrix::Zero(num_groups, c);
  for (Eigen::Index i = 0; i < comps.values.rows(); ++i) {
    const int a = groups[static_cast<size_t>(i)];
    sums.row(a) += comps.values.row(i).cwiseProduct(comps.weights.row(i));
    weights.row(a) += comps.weights.row(i);
  }
  Matrix gaps(num_groups, c);
  for (Eigen::Index j = 0; j < c; ++j) {
    const double total_w = weights.col(j).sum();
    const double pop = total_w > 0 ? sums.col(j).sum() / total_w : 0.0;
    for (int a = 0; a < num_groups; ++a) {
      gaps(a, j) = weights(a, j) > 0
                       ? sums(a, j) / weights(a, j) - pop
                       : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return gaps;
}

absl::StatusOr<double> ViolationFromComponents(const Components& comps,
                                               std::span<const int> groups,
                                               int num_groups) {
  if (groups.size() != static_cast<size_t>(comps.values.rows())) {
    return absl::InvalidArgumentError("group count does not match rows");
  }
  std::vector<size_t> counts(static_cast<size_t>(num_groups), 0);
  for (int a : groups) {
    if (a < 0 || a >= num_groups) {
      return absl::InvalidArgumentError("group out of range");
    }
    ++counts[static_cast<size_t>(a)];
  }
  for (int a = 0; a < num_groups; ++a) {
    if (counts[static_cast<size_t>(a)] == 0) {
      return absl::FailedPreconditionError(
          absl::StrCat("group ", a, " has no rows"));
    }
  }
  const Matrix gaps = ComponentGaps(comps, groups, num_groups);
  double xi = 0.0;
  for (Eigen::Index k = 0; k < gaps.size(); ++k) {
    const double g = gaps.data()[k];
    // A group with rows but no mass for a conditional component (e.g. no
    // Y=1 rows under equalized odds) imposes no constraint.
    if (!std::isnan(g)) xi = std::max(xi, std::abs(g));
  }
  return xi;
}

absl::StatusOr<double> ViolationXiFromPredictions(
    std::span<const int> predictions, std::span<const int> labels,
    std::span<const int> groups, int num_groups, int num_labels,
    const FairnessSpec& spec) {
  FAIRPATE_ASSIGN_OR_RETURN(
      Components comps,
      FairnessComponentsFromPredictions(predictions, labels, num_labels, spec));
  return ViolationFromComponents(comps, groups, num_groups);
}

absl::StatusOr<double> ViolationXi(const Dataset& data,
                                   const MlpParams& params,
                                   const FairnessSpec& spec) {
  FAIRPATE_ASSIGN_OR_RETURN(Matrix probs, Forward(params, data.features()));
  FAIRPATE_ASSIGN_OR_RETURN(Components comps,
                            FairnessComponents(probs, data.labels(), spec));
  return ViolationFromComponents(comps, data.groups(), data.num_groups());
}

// ---------------------------------------------------------------------------
// Constrained training.

namespace {

// d value_ij / d logits_i for the surrogate of `spec`, accumulated as
// coef * derivative into dlogits row i.
void AddSurrogateLogitGrad(const FairnessSpec& spec, const Matrix& probs,
                           Eigen::Index i, int y, int j, double coef,
                           Matrix& dlogits) {
  const auto p = probs.row(i);
  switch (spec.notion) {
    case Notion::kDemographicParity:
    case Notion::kEqualizedOdds: {
      // dp1/dz_k = p1 (1{k=1} - p_k)
      dlogits.row(i) -= coef * p(1) * p;
      dlogits(i, 1) += coef * p(1);
      break;
    }
    case Notion::kGeneralizedDp: {
      const int h = j + 1;
      const double scale = coef * h * std::pow(p(1), h - 1) * p(1);
      dlogits.row(i) -= scale * p;
      dlogits(i, 1) += scale;
      break;
    }
    case Notion::kAccuracyParity:
      // d(-log p_y)/dz = p - e_y
      dlogits.row(i) += coef * p;
      dlogits(i, y) -= coef;
      break;
  }
}

// Weighted per-group sums (m x c) with helpers for running averages.
struct GroupSums {
  Matrix sums, weights;

  void Reset(int m, int c) {
    sums = Matrix::Zero(m, c);
    weights = Matrix::Zero(m, c);
  }
  void Add(const Components& comps, std::span<const int> groups) {
    for (Eigen::Index i = 0; i < comps.values.rows(); ++i) {
      const int a = groups[static_cast<size_t>(i)];
      sums.row(a) += comps.values.row(i).cwiseProduct(comps.weights.row(i));
      weights.row(a) += comps.weights.row(i);
    }
  }
  // this <- decay * this + batch
  void Decay(double decay, const GroupSums& batch) {
    sums = decay * sums + batch.sums;
    weights = decay * weights + batch.weights;
  }
};

struct FairScratch {
  Matrix xb, dlogits;
  ForwardCache cache;
  std::vector<int> batch_labels, batch_groups;
  // Exponential moving average of the surrogate sums with a one-epoch
  // window; its gaps set the direction and activation of the penalty.
  GroupSums running_surrogate;
  // Dual signal accumulated over the current epoch and as a moving average.
  GroupSums epoch_signal, running_signal;
  double decay = 0.0;
  Matrix multipliers;
};

void DualStep(const FairnessSpec& spec, const Matrix& gaps, Matrix& mu,
              FairTrainTrace* trace) {
  double max_violation = 0.0;
  for (Eigen::Index k = 0; k < mu.size(); ++k) {
    const double g = gaps.data()[k];
    if (std::isnan(g)) continue;
    const double violation = std::abs(g) - spec.alpha;
    max_violation = std::max(max_violation, violation);
    mu.data()[k] = std::max(0.0, mu.data()[k] + spec.multiplier_step * violation);
  }
  if (trace != nullptr) {
    trace->min_multiplier.push_back(mu.minCoeff());
    trace->max_violation.push_back(max_violation);
  }
}

Matrix GapsFromSums(const Matrix& sums, const Matrix& weights) {
  Matrix gaps(sums.rows(), sums.cols());
  for (Eigen::Index j = 0; j < sums.cols(); ++j) {
    const double total_w = weights.col(j).sum();
    const double pop = total_w > 0 ? sums.col(j).sum() / total_w : 0.0;
    for (Eigen::Index a = 0; a < sums.rows(); ++a) {
      gaps(a, j) = weights(a, j) > 0
                       ? sums(a, j) / weights(a, j) - pop
                       : std::numeric_limits<double>::quiet_NaN();
    }
  }
  return gaps;
}

}  // namespace

absl::StatusOr<MlpParams> TrainFair(const Dataset& data,
                                    const FairnessSpec& spec,
                                    const TrainConfig& config,
                                    const MlpParams* theta_star, double lambda,
                                    FairTrainTrace* trace) {
  FAIRPATE_RETURN_IF_ERROR(config.Validate());
  FAIRPATE_RETURN_IF_ERROR(
      CheckLabels(data.labels(), data.size(), data.num_labels(), spec));
  if (data.empty()) return absl::InvalidArgumentError("empty training set");
  const std::vector<size_t> counts = data.GroupCounts();
  for (size_t a = 0; a < counts.size(); ++a) {
    if (counts[a] == 0) {
      return absl::FailedPreconditionError(
          absl::StrCat("group ", a, " is absent from the training data"));
    }
  }
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    return absl::InvalidArgumentError("lambda must be finite and >= 0");
  }
  const Architecture arch =
      config.ArchitectureFor(data.dims(), data.num_labels());
  if (theta_star != nullptr && !(theta_star->arch() == arch)) {
    return absl::InvalidArgumentError(
        "theta_star architecture does not match the training architecture");
  }

  const int m = data.num_groups();
  const int c = spec.NumComponents();
  auto s = std::make_shared<FairScratch>();
  s->multipliers = Matrix::Zero(m, c);
  s->running_surrogate.Reset(m, c);
  s->epoch_signal.Reset(m, c);
  s->running_signal.Reset(m, c);
  const double batches_per_epoch = std::ceil(
      static_cast<double>(data.size()) / static_cast<double>(config.batch_size));
  s->decay = 1.0 - 1.0 / batches_per_epoch;
  std::span<const int> labels = data.labels();
  std::span<const int> groups = data.groups();

  BatchObjective objective =
      [&, s](std::span<const size_t> batch, const MlpParams& params,
             Vector& grad) -> absl::StatusOr<double> {
    double loss = CrossEntropyBatch(data.features(), labels, batch, params,
                                    s->xb, s->cache, s->dlogits);
    const auto b = static_cast<Eigen::Index>(batch.size());
    s->batch_labels.resize(batch.size());
    s->batch_groups.resize(batch.size());
    for (size_t k = 0; k < batch.size(); ++k) {
      s->batch_labels[k] = labels[batch[k]];
      s->batch_groups[k] = groups[batch[k]];
    }
    FAIRPATE_ASSIGN_OR_RETURN(
        Components comps,
        SurrogateComponents(s->cache.probs, s->batch_labels, spec));
    GroupSums batch_sums;
    batch_sums.Reset(m, c);
    batch_sums.Add(comps, s->batch_groups);
    s->running_surrogate.Decay(s->decay, batch_sums);

    GroupSums batch_signal;
    if (spec.signal == DualSignal::kSurrogate) {
      batch_signal = batch_sums;
    } else {
      FAIRPATE_ASSIGN_OR_RETURN(
          Components hard,
          FairnessComponents(s->cache.probs, s->batch_labels, spec));
      batch_signal.Reset(m, c);
      batch_signal.Add(hard, s->batch_groups);
    }
    s->epoch_signal.sums += batch_signal.sums;
    s->epoch_signal.weights += batch_signal.weights;
    s->running_signal.Decay(s->decay, batch_signal);

    // Penalty sum_{a,j} mu_aj * max(0, |G_aj| - alpha). G is the running
    // gap; its gradient is estimated by the derivative of this batch's gap.
    const Matrix running_gaps = GapsFromSums(s->running_surrogate.sums,
                                             s->running_surrogate.weights);
    Matrix& mu = s->multipliers;
    for (int j = 0; j < c; ++j) {
      const double total_w = batch_sums.weights.col(j).sum();
      for (int a = 0; a < m; ++a) {
        const double g = running_gaps(a, j);
        if (mu(a, j) <= 0.0 || std::isnan(g)) continue;
        if (batch_sums.weights(a, j) <= 0.0) continue;
        const double excess = std::abs(g) - spec.alpha;
        if (excess <= 0.0) continue;
        loss += mu(a, j) * excess;
        const double sign = g > 0 ? 1.0 : -1.0;
        for (Eigen::Index i = 0; i < b; ++i) {
          const double w = comps.weights(i, j);
          if (w == 0.0) continue;
          const bool in_group = s->batch_groups[static_cast<size_t>(i)] == a;
          const double dgap_dv =
              w * ((in_group ? 1.0 / batch_sums.weights(a, j) : 0.0) -
                   1.0 / total_w);
          AddSurrogateLogitGrad(spec, s->cache.probs, i,
                                s->batch_labels[static_cast<size_t>(i)], j,
                                mu(a, j) * sign * dgap_dv, s->dlogits);
        }
      }
    }
    grad = BackwardFromLogits(params, s->cache, s->xb, s->dlogits);
    if (theta_star != nullptr && lambda > 0.0) {
      const Vector diff = params.flat() - theta_star->flat();
      loss += lambda * diff.squaredNorm();
      grad += 2.0 * lambda * diff;
    }
    if (spec.schedule == DualSchedule::kPerBatch) {
      DualStep(spec,
               GapsFromSums(s->running_signal.sums, s->running_signal.weights),
               mu, trace);
    }
    return loss;
  };

  // Candidate iterates for the returned parameters.
  const int window_start =
      spec.select_window > 0.0
          ? config.epochs - std::max(1, static_cast<int>(std::ceil(
                                            spec.select_window * config.epochs)))
          : config.epochs;
  struct Best {
    double xi = std::numeric_limits<double>::infinity();
    int epoch = -1;
    MlpParams params;
  };
  auto best = std::make_shared<Best>();
  double last_xi = 0.0;

  EpochHook on_epoch = [&, s, best](int epoch,
                                    const MlpParams& params) -> absl::Status {
    const bool track = trace != nullptr || epoch >= window_start;
    if (track) {
      FAIRPATE_ASSIGN_OR_RETURN(const double xi,
                                ViolationXi(data, params, spec));
      if (trace != nullptr) trace->epoch_xi.push_back(xi);
      if (epoch >= window_start && xi <= best->xi) {
        best->xi = xi;
        best->epoch = epoch;
        best->params = params;
      }
      last_xi = xi;
    }
    for (int a = 0; a < m; ++a) {
      if (s->epoch_signal.weights.row(a).sum() <= 0.0) {
        return absl::FailedPreconditionError(
            absl::StrFormat("group %d empty during epoch %d", a, epoch));
      }
    }
    if (spec.schedule == DualSchedule::kPerEpoch) {
      DualStep(spec,
               GapsFromSums(s->epoch_signal.sums, s->epoch_signal.weights),
               s->multipliers, trace);
    }
    s->epoch_signal.Reset(m, c);
    return absl::OkStatus();
  };

  FAIRPATE_ASSIGN_OR_RETURN(
      MlpParams params,
      RunMinibatchAdam(data.size(), arch, config, objective, on_epoch));
  if (trace != nullptr) {
    trace->final_multipliers = s->multipliers;
    trace->selected_epoch = config.epochs - 1;
  }
  if (best->epoch < 0 || last_xi <= spec.alpha) return params;
  if (trace != nullptr) trace->selected_epoch = best->epoch;
  return std::move(best->params);
}

// ---------------------------------------------------------------------------
// Wasserstein.

absl::StatusOr<double> Wasserstein1d(std::span<const double> a,
                                     std::span<const double> b) {
  if (a.empty() || b.empty()) {
    return absl::InvalidArgumentError("Wasserstein distance of empty sample");
  }
  std::vector<double> x(a.begin(), a.end());
  std::vector<double> y(b.begin(), b.end());
  std::sort(x.begin(), x.end());
  std::sort(y.begin(), y.end());
  const double nx = static_cast<double>(x.size());
  const double ny = static_cast<double>(y.size());
  if (x.size() == y.size()) {
    double total = 0.0;
    for (size_t i = 0; i < x.size(); ++i) total += std::abs(x[i] - y[i]);
    return total / nx;
  }
  // Integrate |Qx(t) - Qy(t)| over t in [0, 1]; both quantile functions are
  // piecewise constant with breakpoints at i/nx and j/ny.
  double total = 0.0, t = 0.0;
  size_t i = 0, j = 0;
  while (i < x.size() && j < y.size()) {
    const double tx = static_cast<double>(i + 1) / nx;
    const double ty = static_cast<double>(j + 1) / ny;
    const double next = std::min(tx, ty);
    total += (next - t) * std::abs(x[i] - y[j]);
    t = next;
    // Advance both when breakpoints coincide, using exact integer comparison.
    const uint64_t lx = (i + 1) * y.size();
    const uint64_t ly = (j + 1) * x.size();
    if (lx <= ly) ++i;
    if (ly <= lx) ++j;
  }
  return total;
}

absl::StatusOr<double> MaxGroupWassersteinFromScores(
    std::span<const double> scores, std::span<const int> groups,
    int num_groups) {
  if (scores.size() != groups.size() || scores.empty()) {
    return absl::InvalidArgumentError("scores/groups mismatch or empty");
  }
  std::vector<std::vector<double>> by_group(static_cast<size_t>(num_groups));
  for (size_t i = 0; i < scores.size(); ++i) {
    if (groups[i] < 0 || groups[i] >= num_groups) {
      return absl::InvalidArgumentError("group out of range");
    }
    by_group[static_cast<size_t>(groups[i])].push_back(scores[i]);
  }
  double worst = 0.0;
  for (int a = 0; a < num_groups; ++a) {
    if (by_group[static_cast<size_t>(a)].empty()) {
      return absl::FailedPreconditionError(
          absl::StrCat("group ", a, " has no rows"));
    }
    FAIRPATE_ASSIGN_OR_RETURN(
        const double w, Wasserstein1d(by_group[static_cast<size_t>(a)], scores));
    worst = std::max(worst, w);
  }
  return worst;
}

absl::StatusOr<double> MaxGroupWasserstein(const Dataset& data,
                                           const MlpParams& params) {
  FAIRPATE_ASSIGN_OR_RETURN(Matrix probs, Forward(params, data.features()));
  if (probs.cols() < 2) {
    return absl::InvalidArgumentError("class-1 scores need >= 2 classes");
  }
  std::vector<double> scores(static_cast<size_t>(probs.rows()));
  for (Eigen::Index i = 0; i < probs.rows(); ++i) {
    scores[static_cast<size_t>(i)] = probs(i, 1);
  }
  return MaxGroupWassersteinFromScores(scores, data.groups(),
                                       data.num_groups());
}

}  // namespace fairpate
