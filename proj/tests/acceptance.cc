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

// Acceptance suite. Prints one PASS/FAIL line per criterion and exits
// nonzero when any criterion fails. Pass criterion numbers as arguments to
// run a subset.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_split.h"
#include "fairpate/dataset.h"
#include "fairpate/experiment.h"
#include "fairpate/fairness.h"
#include "fairpate/mlp.h"
#include "fairpate/pate.h"
#include "fairpate/privacy.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"
#include "fairpate/theory.h"
#include "grad_check.h"
#include "json.hpp"

namespace fairpate {
namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

// Unwraps or aborts the criterion with the error as its detail.
struct Abort {
  std::string message;
};
template <typename T>
T Must(absl::StatusOr<T> v) {
  if (!v.ok()) throw Abort{std::string(v.status().ToString())};
  return *std::move(v);
}
void Must(const absl::Status& s) {
  if (!s.ok()) throw Abort{std::string(s.ToString())};
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

std::vector<uint64_t> Seeds(int n) {
  std::vector<uint64_t> s(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) s[static_cast<size_t>(i)] = static_cast<uint64_t>(i);
  return s;
}

// ---------------------------------------------------------------------------
// 1. Vote sensitivity under one group flip.

Outcome Sensitivity() {
  // 20 rows, balanced groups, four shards of five rows each.
  SynthParams p;
  p.n = 20;
  p.d = 2;
  p.minority_share = 0.5;
  p.seed = 11;
  Dataset data = Must(SynthBiased(p));
  std::vector<Dataset> shards =
      Must(ShardTeachers(data, 4, /*seed=*/5, /*min_per_group=*/2));

  Matrix queries(data.size() + 30, data.dims());
  queries.topRows(static_cast<Eigen::Index>(data.size())) = data.features();
  Rng rng(3);
  for (Eigen::Index i = static_cast<Eigen::Index>(data.size()); i < queries.rows(); ++i) {
    for (Eigen::Index j = 0; j < queries.cols(); ++j) queries(i, j) = 3.0 * rng.Gaussian();
  }

  TrainConfig tc;
  tc.epochs = 150;
  tc.batch_size = 8;
  tc.learning_rate = 1e-2;
  tc.hidden1 = 8;
  tc.hidden2 = 8;
  tc.seed = 17;
  FairnessSpec spec = Must(ParseNotion("dp"));

  ShardTrainer group_teacher = [&](const Dataset& shard, const Matrix& q)
      -> absl::StatusOr<std::vector<int>> {
    FAIRPATE_ASSIGN_OR_RETURN(MlpParams m, TrainErm(shard.GroupsAsLabels(), tc));
    return Predict(m, q);
  };
  ShardTrainer label_teacher = [&](const Dataset& shard, const Matrix& q)
      -> absl::StatusOr<std::vector<int>> {
    FAIRPATE_ASSIGN_OR_RETURN(MlpParams m, TrainFair(shard, spec, tc));
    return Predict(m, q);
  };
  const double root2 = std::sqrt(2.0);
  const SensitivityResult g =
      Must(SensitivityProbe(shards, queries, data.num_groups(), group_teacher));
  const SensitivityResult l =
      Must(SensitivityProbe(shards, queries, data.num_labels(), label_teacher));
  const bool pass = std::abs(g.max_distance - root2) < 1e-12 &&
                    std::abs(l.max_distance - root2) < 1e-12;
  return {pass, absl::StrFormat(
                    "groups max=%.6f over %d flips, labels max=%.6f over %d "
                    "flips, expect %.6f",
                    g.max_distance, g.flip_distances.size(), l.max_distance,
                    l.flip_distances.size(), root2)};
}

// ---------------------------------------------------------------------------
// 2. Accountant against a brute-force scan of the Renyi order.

double ScanEpsilon(double sigma, int64_t s, double delta) {
  const double l = std::log(1.0 / delta);
  double best = std::numeric_limits<double>::infinity();
  double lo = 1e-6, hi = 1e6;
  for (int round = 0; round < 4; ++round) {
    const int steps = 20000;
    const double ratio = std::pow(hi / lo, 1.0 / steps);
    double arg = lo;
    for (double t = lo; t <= hi; t *= ratio) {
      const double v = static_cast<double>(s) * (1.0 + t) / (sigma * sigma) + l / t;
      if (v < best) {
        best = v;
        arg = t;
      }
    }
    lo = arg / 1.01;
    hi = arg * 1.01;
  }
  return best;
}

Outcome Accountant() {
  const double ref = Must(ToDp(RdpAccount{100.0, 200, 1e-4})).epsilon;
  const double scan_ref = ScanEpsilon(100.0, 200, 1e-4);
  bool pass = std::abs(ref - 0.8784) <= 1e-3 && std::abs(ref - scan_ref) <= 1e-3;

  Rng rng(2026);
  double worst = 0.0;
  for (int t = 0; t < 50; ++t) {
    const double sigma = 1.0 + 299.0 * rng.Uniform();
    const int64_t s = 1 + static_cast<int64_t>(rng.UniformInt(5000));
    const double delta = std::pow(10.0, -3.0 - 5.0 * rng.Uniform());
    const double e = Must(ToDp(RdpAccount{sigma, s, delta})).epsilon;
    worst = std::max(worst, std::abs(e - ScanEpsilon(sigma, s, delta)));
  }
  pass = pass && worst <= 1e-3;

  double worst_round_trip = 0.0;
  for (double target : {0.1, 0.5, 1.0, 2.0, 4.0, 8.0}) {
    for (int64_t s : {1, 50, 200, 1000}) {
      const double sigma = Must(CalibrateSigma(s, 1e-4, target));
      const double e = Must(ToDp(RdpAccount{sigma, s, 1e-4})).epsilon;
      worst_round_trip = std::max(worst_round_trip, std::abs(e - target));
    }
  }
  pass = pass && worst_round_trip <= 1e-4;
  return {pass, absl::StrFormat(
                    "to_dp=%.6f scan=%.6f, 50 triples max|diff|=%.2e, "
                    "calibrate max|eps-target|=%.2e",
                    ref, scan_ref, worst, worst_round_trip)};
}

// ---------------------------------------------------------------------------
// 3. Randomized response transition frequencies.

Outcome RandomizedResponseFrequencies() {
  const int draws = 100000;
  double worst = 0.0;
  bool eta_exact = true;
  int mechanisms = 0;
  for (auto [eps, m] : std::vector<std::pair<double, int>>{
           {0.0, 2}, {std::log(3.0), 2}, {std::log(3.0), 3}}) {
    ++mechanisms;
    const double keep = std::exp(eps) / (std::exp(eps) + m - 1);
    const double other = 1.0 / (std::exp(eps) + m - 1);
    Rng rng(DeriveSeed(77, static_cast<uint64_t>(mechanisms)));
    for (int a = 0; a < m; ++a) {
      std::vector<int> hist(static_cast<size_t>(m), 0);
      for (int t = 0; t < draws; ++t) ++hist[static_cast<size_t>(RandomizedResponse(a, eps, m, rng))];
      for (int b = 0; b < m; ++b) {
        const double f = hist[static_cast<size_t>(b)] / static_cast<double>(draws);
        worst = std::max(worst, std::abs(f - (a == b ? keep : other)));
      }
    }
    eta_exact = eta_exact && RrEta(eps, m) == (m - 1) / (std::exp(eps) + m - 1);
  }
  return {worst <= 0.01 && eta_exact,
          absl::StrFormat("max |freq - closed form|=%.4f at %d draws per input, "
                          "rr_eta exact=%s",
                          worst, draws, eta_exact ? "yes" : "no")};
}

// ---------------------------------------------------------------------------
// 4. Analytic gradients against central differences.

Outcome Gradients() {
  double worst = 0.0;
  size_t checked = 0;
  for (uint64_t seed = 0; seed < 20; ++seed) {
    const auto r = testing::CheckRandomConfiguration(seed);
    worst = std::max(worst, r.max_rel_error);
    checked += r.checked;
  }
  return {worst < 1e-4, absl::StrFormat("20 configurations, %d coordinates, "
                                        "max rel error %.2e",
                                        checked, worst)};
}

// ---------------------------------------------------------------------------
// 5. Constrained solver on biased synthetic data.

Outcome FairSolver() {
  const FairnessSpec spec = Must(ParseNotion("dp"));  // alpha = 0
  double worst_fair = 0.0, best_erm = 1.0, worst_drop = -1.0;
  std::vector<double> fair_xi, erm_xi, drops;
  for (uint64_t seed = 0; seed < 10; ++seed) {
    SynthParams p;
    p.n = 5000;
    p.gap = 3.0;
    p.seed = DeriveSeed(seed, streams::kSynth);
    Dataset raw = Must(SynthBiased(p));
    SplitSpec ss;
    ss.seed = DeriveSeed(seed, streams::kSplit);
    SplitResult parts = Must(Split(raw, ss));
    auto train = Must(Standardize(parts.train));
    auto test = Must(Standardize(parts.test, &train.second));
    TrainConfig tc;
    tc.seed = DeriveSeed(seed, streams::kStudent);
    MlpParams erm = Must(TrainErm(train.first, tc));
    MlpParams fair = Must(TrainFair(train.first, spec, tc));
    const double xf = Must(ViolationXi(train.first, fair, spec));
    const double xe = Must(ViolationXi(train.first, erm, spec));
    const double drop =
        Accuracy(Predict(erm, test.first.features()), test.first.labels()) -
        Accuracy(Predict(fair, test.first.features()), test.first.labels());
    fair_xi.push_back(xf);
    erm_xi.push_back(xe);
    drops.push_back(drop);
    worst_fair = std::max(worst_fair, xf);
    best_erm = std::min(best_erm, xe);
    worst_drop = std::max(worst_drop, drop);
  }
  const bool pass = worst_fair <= 0.05 && best_erm >= 0.2 && worst_drop <= 0.10;
  return {pass, absl::StrFormat(
                    "10 seeds: fair xi max %.4f (mean %.4f), ERM xi min %.4f "
                    "(mean %.4f), accuracy drop max %.2f pts (mean %.2f)",
                    worst_fair, Mean(fair_xi), best_erm, Mean(erm_xi),
                    100 * worst_drop, 100 * Mean(drops))};
}

// ---------------------------------------------------------------------------
// 6. Ensemble attribute accuracy against randomized response.

Outcome AttributeAccuracyTrend() {
  ExperimentConfig config;
  config.dataset.synth.n = 6000;
  config.dataset.synth.gap = 3.0;
  config.pool_size = 200;
  const double sigma = Must(CalibrateSigma(200, config.delta, 1.0));
  const std::vector<int> ks = {50, 300};
  std::vector<double> k50, k300, rr;
  for (uint64_t seed : Seeds(20)) {
    PreparedData data = Must(PrepareData(config, seed));
    const uint64_t one[] = {seed};
    auto rows = Must(EnsembleAttributeAccuracy(data.train, data.pool, ks, sigma,
                                               one, config.train));
    k50.push_back(rows[0].mean_accuracy);
    k300.push_back(rows[1].mean_accuracy);
    Rng rng(DeriveSeed(seed, streams::kRandomizedResponse));
    auto truth = data.pool.RevealGroupsForEvaluation();
    double hits = 0;
    for (int a : truth) hits += RandomizedResponse(a, 1.0, data.pool.num_groups(), rng) == a;
    rr.push_back(hits / static_cast<double>(truth.size()));
  }
  const double m50 = Mean(k50), m300 = Mean(k300), mrr = Mean(rr);
  return {m300 >= m50 && m50 >= mrr,
          absl::StrFormat("sigma=%.2f, 20 seeds: P(K=300)=%.4f P(K=50)=%.4f "
                          "P(RR)=%.4f (closed form %.4f)",
                          sigma, m300, m50, mrr, RrKeepProbability(1.0, 2))};
}

// ---------------------------------------------------------------------------
// 7 and 10 share the prepared data of the end-to-end runs.

ExperimentConfig EndToEndConfig() {
  ExperimentConfig c;
  c.dataset.synth.n = 30000;
  c.dataset.synth.gap = 3.0;
  c.num_teachers = 300;
  c.pool_size = 200;
  return c;
}

const std::vector<PreparedData>& EndToEndData() {
  static const std::vector<PreparedData>* data = [] {
    auto* out = new std::vector<PreparedData>();
    for (uint64_t seed : Seeds(10)) {
      out->push_back(Must(PrepareData(EndToEndConfig(), seed)));
    }
    return out;
  }();
  return *data;
}

struct MethodMeans {
  double accuracy = 0.0, xi = 0.0, wasserstein = 0.0;
};

std::map<std::string, MethodMeans> RunEndToEnd(const FairnessSpec& spec) {
  ExperimentConfig c = EndToEndConfig();
  c.fairness = spec;
  const auto& data = EndToEndData();
  std::map<std::string, std::vector<RunReport>> runs;
  for (size_t i = 0; i < data.size(); ++i) {
    for (const char* m : {"nonprivate_fair", "nonprivate_erm", "sf_s", "sf_t"}) {
      runs[m].push_back(Must(RunCell(c, data[i], m, 1.0, i)));
    }
  }
  std::map<std::string, MethodMeans> out;
  for (const auto& [m, reports] : runs) {
    std::vector<double> a, x, w;
    for (const RunReport& r : reports) {
      a.push_back(r.accuracy);
      x.push_back(r.xi);
      w.push_back(r.wasserstein.value_or(0.0));
    }
    out[m] = {Mean(a), Mean(x), Mean(w)};
  }
  return out;
}

Outcome EndToEndTradeoff() {
  auto r = RunEndToEnd(Must(ParseNotion("dp")));
  const MethodMeans& fair = r["nonprivate_fair"];
  const MethodMeans& erm = r["nonprivate_erm"];
  bool pass = true;
  std::string detail = absl::StrFormat(
      "eps=1, K=300, 10 seeds: fair ref acc %.4f xi %.4f; ERM acc %.4f xi %.4f",
      fair.accuracy, fair.xi, erm.accuracy, erm.xi);
  for (const char* m : {"sf_s", "sf_t"}) {
    const MethodMeans& s = r[m];
    pass = pass && fair.accuracy - s.accuracy <= 0.05 && s.xi <= 0.6 * erm.xi;
    absl::StrAppend(&detail, absl::StrFormat("; %s acc %.4f (gap %+.2f pts) xi %.4f "
                                             "(%.2f x ERM)",
                                             m, s.accuracy,
                                             100 * (s.accuracy - fair.accuracy),
                                             s.xi, s.xi / erm.xi));
  }
  return {pass, detail};
}

Outcome GeneralizedParity() {
  auto r = RunEndToEnd(Must(ParseNotion("gdp:2")));
  const double erm = r["nonprivate_erm"].wasserstein;
  bool pass = erm > 0.0;
  std::string detail =
      absl::StrFormat("gdp:2, eps=1, 10 seeds: ERM W %.4f", erm);
  for (const char* m : {"sf_s", "sf_t"}) {
    const double w = r[m].wasserstein;
    pass = pass && w <= 0.5 * erm;
    absl::StrAppend(&detail, absl::StrFormat("; %s W %.4f (%.0f%% reduction)", m, w,
                                             100 * (1 - w / erm)));
  }
  return {pass, detail};
}

// ---------------------------------------------------------------------------
// 8 and 9. Bound checks through the theory suite.

std::vector<nlohmann::json> TheoryLines() {
  static const std::vector<nlohmann::json>* lines = [] {
    ExperimentConfig c;
    c.seeds = Seeds(20);
    auto* out = new std::vector<nlohmann::json>();
    for (const std::string& l : Must(RunTheory(c))) {
      out->push_back(nlohmann::json::parse(l));
    }
    return out;
  }();
  return *lines;
}

Outcome TransferBound() {
  int trials = 0, holds = 0;
  double worst_margin = -1.0;
  std::set<std::pair<double, int>> cells;
  for (const auto& j : TheoryLines()) {
    if (j["kind"] != "transfer") continue;
    ++trials;
    holds += j["holds"].get<bool>();
    cells.insert({j["epsilon"].get<double>(), j["groups"].get<int>()});
    worst_margin = std::max(worst_margin, j["measured"].get<double>() -
                                              j["bound"].get<double>());
  }
  return {trials == 120 && holds == trials && cells.size() == 6,
          absl::StrFormat("%d/%d hold over 20 seeds x eps {ln3,1,2} x m {2,3}, "
                          "max(measured - bound)=%.4f, tolerance %.2f",
                          holds, trials, worst_margin, kBoundTolerance)};
}

Outcome VoteBound() {
  int trials = 0, holds = 0;
  double worst_margin = -1.0;
  for (const auto& j : TheoryLines()) {
    if (j["kind"] != "vote") continue;
    ++trials;
    holds += j["holds"].get<bool>();
    worst_margin = std::max(worst_margin, j["measured"].get<double>() -
                                              j["bound"].get<double>());
  }
  // Constant ensemble on group-independent data.
  SynthParams p;
  p.n = 50000;
  p.gap = 0.0;
  p.group_shift = 0.0;
  p.seed = 91;
  Dataset data = Must(SynthBiased(p));
  std::vector<std::vector<int>> preds(5, std::vector<int>(data.size(), 1));
  const std::vector<uint64_t> seeds = Seeds(5);
  const BoundReport c = Must(VerifyVoteFromPredictions(
      preds, 2, data, 1.0, seeds, Must(ParseNotion("dp"))));
  const bool pass = trials == 20 && holds == trials && c.measured < 0.02 &&
                    c.bound < 0.02;
  return {pass, absl::StrFormat("%d/%d hold, max(measured - bound)=%.4f; constant "
                                "ensemble measured %.4f bound %.4f",
                                holds, trials, worst_margin, c.measured, c.bound)};
}

// ---------------------------------------------------------------------------
// 11. The accountant sees only (sigma, s, delta).

Outcome AccountingIndependence() {
  TrainConfig tc;
  tc.epochs = 2;
  tc.hidden1 = 8;
  tc.hidden2 = 8;
  auto make = [](size_t n, double gap, uint64_t seed) {
    SynthParams p;
    p.n = n;
    p.gap = gap;
    p.seed = seed;
    Dataset d = Must(SynthBiased(p));
    SplitSpec ss;
    ss.train_frac = 0.6;
    ss.eval_frac = 0.2;
    ss.test_frac = 0.2;
    ss.seed = seed;
    SplitResult parts = Must(Split(d, ss));
    StudentPool pool = Must(MakeStudentPool(parts.eval, 100, seed));
    return std::make_tuple(parts.train, pool, parts.test);
  };
  auto [train_a, pool_a, test_a] = make(1500, 3.0, 1);
  auto [train_b, pool_b, test_b] = make(2500, 0.5, 2);
  PipelineConfig pc;
  pc.num_teachers = 5;
  pc.pool_size = 100;
  pc.sigma = 40.0;
  pc.train = tc;
  std::set<double> epsilons;
  std::set<int64_t> queries;
  const double expected = Must(ToDp(RdpAccount{40.0, 100, pc.delta})).epsilon;
  for (int epochs : {1, 4, 12}) {
    pc.train.epochs = epochs;
    for (const auto* run : {&train_a, &train_b}) {
      const bool a = run == &train_a;
      const RunReport s = Must(RunSfS(*run, a ? pool_a : pool_b, a ? test_a : test_b, pc));
      const RunReport t = Must(RunSfT(*run, a ? pool_a : pool_b, a ? test_a : test_b, pc));
      epsilons.insert(s.epsilon);
      epsilons.insert(t.epsilon);
      queries.insert(s.queries);
      queries.insert(t.queries);
    }
  }
  const bool pass = epsilons.size() == 1 && *epsilons.begin() == expected &&
                    queries.size() == 1 && *queries.begin() == 100;
  return {pass, absl::StrFormat("2 datasets x 3 epoch counts x {SF_S, SF_T}: "
                                "%d distinct eps (%.17g vs %.17g), %d distinct "
                                "query counts (%d, s=100)",
                                epsilons.size(), *epsilons.begin(), expected,
                                queries.size(), *queries.begin())};
}

// ---------------------------------------------------------------------------
// 12. Sweep determinism.

std::string StripWallTime(const std::string& path) {
  std::ifstream in(path);
  std::string line, out;
  while (std::getline(in, line)) {
    const size_t cut = line.rfind(',');
    absl::StrAppend(&out, line.substr(0, cut), "\n");
  }
  return out;
}

Outcome SweepDeterminism() {
  const auto dir = std::filesystem::temp_directory_path() / "fairpate_acceptance";
  std::filesystem::create_directories(dir);
  ExperimentConfig c;
  c.dataset.synth.n = 3000;
  c.methods = {"sf_s", "sf_t", "baseline_m"};
  c.epsilons = {0.5, 1.0, 2.0};
  c.fairness = Must(ParseNotion("gdp:2"));
  c.num_teachers = 10;
  c.pool_size = 100;
  c.seeds = {0, 1};
  c.train.epochs = 10;
  c.output = (dir / "a.csv").string();
  c.workers = 1;
  Must(RunSweep(c).status());
  c.output = (dir / "b.csv").string();
  c.workers = 3;
  Must(RunSweep(c).status());
  const std::string a = StripWallTime((dir / "a.csv").string());
  const std::string b = StripWallTime((dir / "b.csv").string());
  const size_t rows = static_cast<size_t>(std::count(a.begin(), a.end(), '\n'));
  return {a == b && rows == 1 + 2 * (2 + 3 * 3),
          absl::StrFormat("two runs (1 and 3 workers), %d lines, scientific "
                          "columns identical=%s",
                          rows, a == b ? "yes" : "no")};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace
}  // namespace fairpate

int main(int argc, char** argv) {
  using fairpate::Criterion;
  const std::vector<Criterion> all = {
      {1, "vote sensitivity", fairpate::Sensitivity},
      {2, "accountant", fairpate::Accountant},
      {3, "randomized response", fairpate::RandomizedResponseFrequencies},
      {4, "gradient correctness", fairpate::Gradients},
      {5, "fair solver", fairpate::FairSolver},
      {6, "attribute accuracy trend", fairpate::AttributeAccuracyTrend},
      {7, "end-to-end tradeoff", fairpate::EndToEndTradeoff},
      {8, "transfer bound", fairpate::TransferBound},
      {9, "vote bound", fairpate::VoteBound},
      {10, "generalized parity", fairpate::GeneralizedParity},
      {11, "accounting independence", fairpate::AccountingIndependence},
      {12, "sweep determinism", fairpate::SweepDeterminism},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failed = 0;
  for (const Criterion& c : all) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    fairpate::Outcome o;
    try {
      o = c.run();
    } catch (const fairpate::Abort& e) {
      o = {false, "error: " + e.message};
    }
    const double secs =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failed += o.pass ? 0 : 1;
    std::printf("criterion %2d %s: %s | %s | %.1fs\n", c.id, o.pass ? "PASS" : "FAIL",
                c.name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
