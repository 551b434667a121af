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

#include "fairpate/experiment.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "absl/strings/numbers.h"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_format.h"
#include "absl/strings/str_join.h"
#include "absl/strings/str_split.h"
#include "fairpate/parallel.h"
#include "fairpate/random.h"
#include "fairpate/status_macros.h"
#include "fairpate/theory.h"
#include "json.hpp"

namespace fairpate {
namespace {

using nlohmann::json;

absl::Status ConfigError(const std::string& what) {
  return absl::InvalidArgumentError(absl::StrCat("config: ", what));
}

// Typed access to one JSON object that rejects unknown keys.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {}

  absl::Status CheckObject() const {
    if (!j_.is_object()) return ConfigError(absl::StrCat(path_, " must be an object"));
    return absl::OkStatus();
  }

  bool Has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  template <typename T>
  absl::Status Get(const std::string& key, T& out) {
    if (!Has(key)) return absl::OkStatus();
    try {
      out = j_.at(key).get<T>();
    } catch (const json::exception&) {
      return ConfigError(absl::StrCat(Path(key), " has the wrong type"));
    }
    return absl::OkStatus();
  }

  const json& At(const std::string& key) const { return j_.at(key); }
  std::string Path(const std::string& key) const {
    return path_.empty() ? key : absl::StrCat(path_, ".", key);
  }

  absl::Status Finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.count(it.key())) {
        return ConfigError(absl::StrCat("unknown key ", Path(it.key())));
      }
    }
    return absl::OkStatus();
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

absl::Status ApplyOverride(json& root, const std::string& assignment) {
  const size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    return ConfigError(absl::StrCat("override '", assignment,
                                    "' is not path=value"));
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, /*allow_exceptions=*/false);
  if (value.is_discarded()) value = text;
  json* node = &root;
  std::vector<std::string> parts = absl::StrSplit(path, '.');
  for (size_t i = 0; i + 1 < parts.size(); ++i) {
    if (!node->is_object()) {
      return ConfigError(absl::StrCat("override path ", path, " crosses a non-object"));
    }
    node = &(*node)[parts[i]];
    if (node->is_null()) *node = json::object();
  }
  if (!node->is_object()) {
    return ConfigError(absl::StrCat("override path ", path, " crosses a non-object"));
  }
  (*node)[parts.back()] = std::move(value);
  return absl::OkStatus();
}

absl::StatusOr<ColumnRole> ParseRole(const std::string& role) {
  if (role == "numeric") return ColumnRole::kNumeric;
  if (role == "categorical") return ColumnRole::kCategorical;
  if (role == "group") return ColumnRole::kGroup;
  if (role == "label") return ColumnRole::kLabel;
  if (role == "ignore") return ColumnRole::kIgnore;
  return ConfigError(absl::StrCat("unknown column role '", role, "'"));
}

absl::Status ParseDataset(const json& j, DataSource& out) {
  ObjectReader r(j, "dataset");
  FAIRPATE_RETURN_IF_ERROR(r.CheckObject());
  std::string type = "synthetic";
  FAIRPATE_RETURN_IF_ERROR(r.Get("type", type));
  if (type == "synthetic") {
    out.kind = DataSource::Kind::kSynthetic;
    FAIRPATE_RETURN_IF_ERROR(r.Get("n", out.synth.n));
    FAIRPATE_RETURN_IF_ERROR(r.Get("d", out.synth.d));
    FAIRPATE_RETURN_IF_ERROR(r.Get("m", out.synth.m));
    FAIRPATE_RETURN_IF_ERROR(r.Get("gap", out.synth.gap));
    FAIRPATE_RETURN_IF_ERROR(r.Get("noise", out.synth.noise));
    FAIRPATE_RETURN_IF_ERROR(r.Get("group_shift", out.synth.group_shift));
    FAIRPATE_RETURN_IF_ERROR(r.Get("minority_share", out.synth.minority_share));
  } else if (type == "csv") {
    out.kind = DataSource::Kind::kCsv;
    FAIRPATE_RETURN_IF_ERROR(r.Get("path", out.csv_path));
    if (r.Has("columns")) {
      const json& cols = r.At("columns");
      if (!cols.is_array()) return ConfigError("dataset.columns must be an array");
      for (const json& c : cols) {
        ObjectReader cr(c, "dataset.columns[]");
        FAIRPATE_RETURN_IF_ERROR(cr.CheckObject());
        ColumnSpec spec;
        std::string role = "numeric";
        FAIRPATE_RETURN_IF_ERROR(cr.Get("name", spec.name));
        FAIRPATE_RETURN_IF_ERROR(cr.Get("role", role));
        FAIRPATE_ASSIGN_OR_RETURN(spec.role, ParseRole(role));
        FAIRPATE_RETURN_IF_ERROR(cr.Get("categories", spec.categories));
        FAIRPATE_RETURN_IF_ERROR(cr.Finish());
        out.schema.columns.push_back(std::move(spec));
      }
    }
  } else {
    return ConfigError(absl::StrCat("unknown dataset type '", type, "'"));
  }
  return r.Finish();
}

absl::Status ParseFairness(const json& j, FairnessSpec& out) {
  ObjectReader r(j, "fairness");
  FAIRPATE_RETURN_IF_ERROR(r.CheckObject());
  std::string notion = out.Key();
  FAIRPATE_RETURN_IF_ERROR(r.Get("notion", notion));
  auto parsed = ParseNotion(notion);
  if (!parsed.ok()) return ConfigError(std::string(parsed.status().message()));
  out.notion = parsed->notion;
  out.moment_order = parsed->moment_order;
  FAIRPATE_RETURN_IF_ERROR(r.Get("alpha", out.alpha));
  FAIRPATE_RETURN_IF_ERROR(r.Get("multiplier_step", out.multiplier_step));
  FAIRPATE_RETURN_IF_ERROR(r.Get("select_window", out.select_window));
  FAIRPATE_RETURN_IF_ERROR(r.Get("bound_b", out.bound_b));
  std::string schedule, signal;
  FAIRPATE_RETURN_IF_ERROR(r.Get("schedule", schedule));
  if (schedule == "per_batch") {
    out.schedule = DualSchedule::kPerBatch;
  } else if (schedule == "per_epoch") {
    out.schedule = DualSchedule::kPerEpoch;
  } else if (!schedule.empty()) {
    return ConfigError("fairness.schedule must be per_batch or per_epoch");
  }
  FAIRPATE_RETURN_IF_ERROR(r.Get("signal", signal));
  if (signal == "surrogate") {
    out.signal = DualSignal::kSurrogate;
  } else if (signal == "hard") {
    out.signal = DualSignal::kHard;
  } else if (!signal.empty()) {
    return ConfigError("fairness.signal must be surrogate or hard");
  }
  return r.Finish();
}

absl::Status ParseTrain(const json& j, TrainConfig& out) {
  ObjectReader r(j, "train");
  FAIRPATE_RETURN_IF_ERROR(r.CheckObject());
  FAIRPATE_RETURN_IF_ERROR(r.Get("epochs", out.epochs));
  FAIRPATE_RETURN_IF_ERROR(r.Get("batch_size", out.batch_size));
  FAIRPATE_RETURN_IF_ERROR(r.Get("learning_rate", out.learning_rate));
  FAIRPATE_RETURN_IF_ERROR(r.Get("hidden1", out.hidden1));
  FAIRPATE_RETURN_IF_ERROR(r.Get("hidden2", out.hidden2));
  return r.Finish();
}

absl::Status ParseSplit(const json& j, SplitSpec& out) {
  ObjectReader r(j, "split");
  FAIRPATE_RETURN_IF_ERROR(r.CheckObject());
  FAIRPATE_RETURN_IF_ERROR(r.Get("train", out.train_frac));
  FAIRPATE_RETURN_IF_ERROR(r.Get("eval", out.eval_frac));
  FAIRPATE_RETURN_IF_ERROR(r.Get("test", out.test_frac));
  return r.Finish();
}

absl::Status ParseTheory(const json& j, TheorySuiteConfig& out) {
  ObjectReader r(j, "theory");
  FAIRPATE_RETURN_IF_ERROR(r.CheckObject());
  FAIRPATE_RETURN_IF_ERROR(r.Get("transfer_epsilons", out.transfer_epsilons));
  FAIRPATE_RETURN_IF_ERROR(r.Get("transfer_groups", out.transfer_groups));
  FAIRPATE_RETURN_IF_ERROR(r.Get("transfer_rows", out.transfer_rows));
  FAIRPATE_RETURN_IF_ERROR(r.Get("vote_teachers", out.vote_teachers));
  FAIRPATE_RETURN_IF_ERROR(r.Get("vote_sigma", out.vote_sigma));
  FAIRPATE_RETURN_IF_ERROR(r.Get("vote_fair_teachers", out.vote_fair_teachers));
  FAIRPATE_RETURN_IF_ERROR(r.Get("vote_rows", out.vote_rows));
  FAIRPATE_RETURN_IF_ERROR(r.Get("vote_noise_draws", out.vote_noise_draws));
  FAIRPATE_RETURN_IF_ERROR(r.Get("epochs", out.epochs));
  FAIRPATE_RETURN_IF_ERROR(r.Get("tolerance", out.tolerance));
  return r.Finish();
}

bool IsReference(std::string_view method) {
  return std::find(std::begin(kReferenceMethods), std::end(kReferenceMethods),
                   method) != std::end(kReferenceMethods);
}

bool IsPrivate(std::string_view method) {
  return std::find(std::begin(kPrivateMethods), std::end(kPrivateMethods),
                   method) != std::end(kPrivateMethods);
}

std::string FormatDouble(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return absl::StrFormat("%.17g", v);
}

absl::Status WriteLines(const std::string& path,
                        const std::vector<std::string>& lines) {
  const std::filesystem::path p(path);
  if (p.has_parent_path()) {
    std::error_code ec;
    std::filesystem::create_directories(p.parent_path(), ec);
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) return absl::UnavailableError(absl::StrCat("cannot write ", path));
  for (const std::string& line : lines) out << line << '\n';
  if (!out) return absl::DataLossError(absl::StrCat("write failed: ", path));
  return absl::OkStatus();
}

double Mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double SampleStd(const std::vector<double>& v) {
  if (v.size() < 2) return 0.0;
  const double m = Mean(v);
  double ss = 0.0;
  for (double x : v) ss += (x - m) * (x - m);
  return std::sqrt(ss / static_cast<double>(v.size() - 1));
}

}  // namespace

absl::Status ExperimentConfig::Validate() const {
  if (methods.empty()) return ConfigError("methods must be nonempty");
  std::set<std::string> unique_methods;
  for (const std::string& m : methods) {
    if (!IsPrivate(m) && !IsReference(m)) {
      return ConfigError(absl::StrCat("unknown method '", m, "'"));
    }
    if (!unique_methods.insert(m).second) {
      return ConfigError(absl::StrCat("duplicate method '", m, "'"));
    }
  }
  const bool any_private = std::any_of(methods.begin(), methods.end(),
                                       [](const std::string& m) { return IsPrivate(m); });
  if (any_private && epsilons.empty()) {
    return ConfigError("epsilon grid must be nonempty");
  }
  for (size_t i = 0; i < epsilons.size(); ++i) {
    if (!(epsilons[i] > 0.0) || !std::isfinite(epsilons[i])) {
      return ConfigError(absl::StrCat("epsilon ", epsilons[i],
                                      " must be finite and > 0"));
    }
    if (i > 0 && !(epsilons[i] > epsilons[i - 1])) {
      return ConfigError("epsilon grid must be strictly increasing");
    }
  }
  if (seeds.empty()) return ConfigError("seeds must be nonempty");
  if (std::set<uint64_t>(seeds.begin(), seeds.end()).size() != seeds.size()) {
    return ConfigError("seeds must be distinct");
  }
  if (num_teachers < 1) return ConfigError("K must be >= 1");
  if (pool_size < 1) return ConfigError("s must be >= 1");
  if (!(lambda >= 0.0) || !std::isfinite(lambda)) {
    return ConfigError("lambda must be finite and >= 0");
  }
  if (!(delta > 0.0 && delta < 1.0)) return ConfigError("delta must lie in (0, 1)");
  if (workers < 1) return ConfigError("workers must be >= 1");
  if (output.empty()) return ConfigError("output path must be set");
  if (auto s = fairness.Validate(); !s.ok()) return ConfigError(std::string(s.message()));
  if (auto s = train.Validate(); !s.ok()) return ConfigError(std::string(s.message()));
  for (double f : {split.train_frac, split.eval_frac, split.test_frac}) {
    if (!(f > 0.0)) return ConfigError("split fractions must be > 0");
  }
  if (std::abs(split.train_frac + split.eval_frac + split.test_frac - 1.0) > 1e-9) {
    return ConfigError("split fractions must sum to 1");
  }
  if (dataset.kind == DataSource::Kind::kSynthetic) {
    if (dataset.synth.n < 10) return ConfigError("dataset.n must be >= 10");
    if (dataset.synth.d < 2) return ConfigError("dataset.d must be >= 2");
    if (dataset.synth.m < 2) return ConfigError("dataset.m must be >= 2");
  } else {
    if (dataset.csv_path.empty()) return ConfigError("dataset.path must be set");
    if (dataset.schema.columns.empty()) {
      return ConfigError("dataset.columns must be nonempty");
    }
  }
  for (double e : theory.transfer_epsilons) {
    if (!(e >= 0.0)) return ConfigError("theory epsilons must be >= 0");
  }
  for (int m : theory.transfer_groups) {
    if (m < 2) return ConfigError("theory group counts must be >= 2");
  }
  if (theory.vote_teachers < 1) return ConfigError("theory.vote_teachers must be >= 1");
  if (!(theory.vote_sigma >= 0.0)) return ConfigError("theory.vote_sigma must be >= 0");
  if (theory.vote_noise_draws < 1) {
    return ConfigError("theory.vote_noise_draws must be >= 1");
  }
  if (theory.epochs < 1) return ConfigError("theory.epochs must be >= 1");
  if (!(theory.tolerance >= 0.0)) return ConfigError("theory.tolerance must be >= 0");
  return absl::OkStatus();
}

absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    std::string_view json_text, std::span<const std::string> overrides) {
  json root = json::parse(json_text, nullptr, /*allow_exceptions=*/false);
  if (root.is_discarded()) return ConfigError("malformed JSON");
  if (!root.is_object()) return ConfigError("top level must be an object");
  for (const std::string& o : overrides) {
    FAIRPATE_RETURN_IF_ERROR(ApplyOverride(root, o));
  }
  ExperimentConfig c;
  ObjectReader r(root, "");
  if (r.Has("dataset")) FAIRPATE_RETURN_IF_ERROR(ParseDataset(r.At("dataset"), c.dataset));
  if (r.Has("split")) FAIRPATE_RETURN_IF_ERROR(ParseSplit(r.At("split"), c.split));
  if (r.Has("fairness")) {
    FAIRPATE_RETURN_IF_ERROR(ParseFairness(r.At("fairness"), c.fairness));
  }
  if (r.Has("train")) FAIRPATE_RETURN_IF_ERROR(ParseTrain(r.At("train"), c.train));
  if (r.Has("theory")) FAIRPATE_RETURN_IF_ERROR(ParseTheory(r.At("theory"), c.theory));
  FAIRPATE_RETURN_IF_ERROR(r.Get("methods", c.methods));
  FAIRPATE_RETURN_IF_ERROR(r.Get("epsilons", c.epsilons));
  FAIRPATE_RETURN_IF_ERROR(r.Get("K", c.num_teachers));
  FAIRPATE_RETURN_IF_ERROR(r.Get("s", c.pool_size));
  FAIRPATE_RETURN_IF_ERROR(r.Get("lambda", c.lambda));
  FAIRPATE_RETURN_IF_ERROR(r.Get("delta", c.delta));
  FAIRPATE_RETURN_IF_ERROR(r.Get("seeds", c.seeds));
  FAIRPATE_RETURN_IF_ERROR(r.Get("output", c.output));
  FAIRPATE_RETURN_IF_ERROR(r.Get("workers", c.workers));
  FAIRPATE_RETURN_IF_ERROR(r.Get("label_protection", c.label_protection));
  FAIRPATE_RETURN_IF_ERROR(r.Finish());
  FAIRPATE_RETURN_IF_ERROR(c.Validate());
  return c;
}

absl::StatusOr<ExperimentConfig> LoadExperimentConfig(
    const std::string& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) return ConfigError(absl::StrCat("cannot read ", path));
  std::stringstream buf;
  buf << in.rdbuf();
  return ParseExperimentConfig(buf.str(), overrides);
}

absl::StatusOr<PreparedData> PrepareData(const ExperimentConfig& config,
                                         uint64_t seed) {
  Dataset raw;
  if (config.dataset.kind == DataSource::Kind::kSynthetic) {
    SynthParams p = config.dataset.synth;
    p.seed = DeriveSeed(seed, streams::kSynth);
    FAIRPATE_ASSIGN_OR_RETURN(raw, SynthBiased(p));
  } else {
    FAIRPATE_ASSIGN_OR_RETURN(raw,
                              LoadCsv(config.dataset.csv_path, config.dataset.schema));
  }
  SplitSpec split = config.split;
  split.seed = DeriveSeed(seed, streams::kSplit);
  FAIRPATE_ASSIGN_OR_RETURN(SplitResult parts, Split(raw, split));
  FAIRPATE_ASSIGN_OR_RETURN(auto train, Standardize(parts.train));
  FAIRPATE_ASSIGN_OR_RETURN(auto eval, Standardize(parts.eval, &train.second));
  FAIRPATE_ASSIGN_OR_RETURN(auto test, Standardize(parts.test, &train.second));
  if (eval.first.size() < config.pool_size) {
    return absl::FailedPreconditionError(
        absl::StrCat("eval split has ", eval.first.size(),
                     " rows, fewer than s = ", config.pool_size));
  }
  FAIRPATE_ASSIGN_OR_RETURN(
      StudentPool pool, MakeStudentPool(eval.first, config.pool_size,
                                        DeriveSeed(seed, streams::kPool)));
  if (config.label_protection) pool = pool.WithHiddenLabels();
  return PreparedData{std::move(train.first), std::move(test.first),
                      std::move(pool)};
}

PipelineConfig MakePipelineConfig(const ExperimentConfig& config,
                                  uint64_t seed,
                                  std::optional<double> epsilon) {
  PipelineConfig pc;
  pc.num_teachers = config.num_teachers;
  pc.pool_size = config.pool_size;
  pc.lambda = config.lambda;
  pc.fairness = config.fairness;
  pc.target_epsilon = epsilon;
  if (!epsilon.has_value()) pc.sigma = 0.0;
  pc.delta = config.delta;
  pc.train = config.train;
  pc.seed = seed;
  pc.label_protection = config.label_protection;
  return pc;
}

absl::StatusOr<RunReport> RunCell(const ExperimentConfig& config,
                                  const PreparedData& data,
                                  std::string_view method, double epsilon,
                                  uint64_t seed, int threads) {
  const bool reference = IsReference(method);
  PipelineConfig pc = MakePipelineConfig(
      config, seed, reference ? std::nullopt : std::optional<double>(epsilon));
  pc.threads = threads;
  if (method == "sf_s") return RunSfS(data.train, data.pool, data.test, pc);
  if (method == "sf_t") return RunSfT(data.train, data.pool, data.test, pc);
  if (method == "baseline_m") return RunBaselineM(data.train, data.test, pc);
  if (method == "nonprivate_fair") return RunNonPrivateFair(data.pool, data.test, pc);
  if (method == "nonprivate_erm") return RunNonPrivateErm(data.pool, data.test, pc);
  return absl::InvalidArgumentError(absl::StrCat("unknown method ", std::string(method)));
}

std::string FormatReportRow(const RunReport& r) {
  return absl::StrCat(r.method, ",", FormatDouble(r.epsilon), ",",
                      FormatDouble(r.accuracy), ",", FormatDouble(r.xi), ",",
                      r.wasserstein ? FormatDouble(*r.wasserstein) : "", ",",
                      r.seed, ",", absl::StrFormat("%.3f", r.wall_ms));
}

absl::StatusOr<std::vector<RunReport>> RunSweep(const ExperimentConfig& config) {
  FAIRPATE_RETURN_IF_ERROR(config.Validate());

  struct Cell {
    size_t seed_index;
    std::string method;
    double epsilon;
  };
  std::vector<Cell> cells;
  for (size_t si = 0; si < config.seeds.size(); ++si) {
    for (std::string_view ref : kReferenceMethods) {
      cells.push_back({si, std::string(ref), 0.0});
    }
    for (const std::string& m : config.methods) {
      if (!IsPrivate(m)) continue;
      for (double e : config.epsilons) cells.push_back({si, m, e});
    }
  }

  // Data per seed, then cells; failures are recorded per slot so the report
  // keeps its deterministic order.
  std::vector<std::optional<PreparedData>> data(config.seeds.size());
  std::vector<absl::Status> data_status(config.seeds.size());
  (void)ParallelFor(config.seeds.size(), config.workers, [&](size_t i) {
    auto d = PrepareData(config, config.seeds[i]);
    if (d.ok()) {
      data[i].emplace(*std::move(d));
    } else {
      data_status[i] = d.status();
    }
    return absl::OkStatus();
  });
  std::vector<absl::StatusOr<RunReport>> results(
      cells.size(), absl::UnknownError("not run"));
  (void)ParallelFor(cells.size(), config.workers, [&](size_t i) {
    const Cell& c = cells[i];
    if (!data_status[c.seed_index].ok()) {
      results[i] = data_status[c.seed_index];
    } else {
      results[i] = RunCell(config, *data[c.seed_index], c.method, c.epsilon,
                           config.seeds[c.seed_index]);
    }
    return absl::OkStatus();
  });

  std::vector<std::string> lines = {std::string(kReportHeader)};
  std::vector<RunReport> reports;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (!results[i].ok()) {
      const absl::Status err = results[i].status();
      lines.push_back(absl::StrCat(std::string(kPartialMarker), ",,,,,",
                                   config.seeds[cells[i].seed_index], ","));
      FAIRPATE_RETURN_IF_ERROR(WriteLines(config.output, lines));
      return absl::Status(err.code(),
                          absl::StrCat(cells[i].method, " (seed ",
                                       config.seeds[cells[i].seed_index],
                                       "): ", err.message()));
    }
    lines.push_back(FormatReportRow(*results[i]));
    reports.push_back(*std::move(results[i]));
  }
  FAIRPATE_RETURN_IF_ERROR(WriteLines(config.output, lines));
  return reports;
}

absl::StatusOr<std::vector<std::string>> RunTheory(
    const ExperimentConfig& config) {
  FAIRPATE_RETURN_IF_ERROR(config.Validate());
  const TheorySuiteConfig& t = config.theory;
  struct Trial {
    bool transfer;
    double epsilon;
    int groups;
    uint64_t seed;
  };
  std::vector<Trial> trials;
  for (double e : t.transfer_epsilons) {
    for (int m : t.transfer_groups) {
      for (uint64_t s : config.seeds) trials.push_back({true, e, m, s});
    }
  }
  for (uint64_t s : config.seeds) trials.push_back({false, 0.0, 0, s});

  TrainConfig train = config.train;
  train.epochs = t.epochs;
  std::vector<absl::StatusOr<BoundReport>> results(
      trials.size(), absl::UnknownError("not run"));
  (void)ParallelFor(trials.size(), config.workers, [&](size_t i) {
    const Trial& tr = trials[i];
    if (tr.transfer) {
      TransferTrialConfig tc;
      tc.data = config.dataset.synth;
      tc.data.n = t.transfer_rows;
      tc.data.m = tr.groups;
      tc.epsilon = tr.epsilon;
      tc.fairness = config.fairness;
      tc.train = train;
      tc.tolerance = t.tolerance;
      results[i] = RunTransferTrial(tc, tr.seed);
    } else {
      VoteTrialConfig vc;
      vc.data = config.dataset.synth;
      vc.data.n = t.vote_rows;
      vc.num_teachers = t.vote_teachers;
      vc.fair_teachers = t.vote_fair_teachers;
      vc.sigma = t.vote_sigma;
      vc.noise_draws = t.vote_noise_draws;
      vc.fairness = config.fairness;
      vc.train = train;
      vc.tolerance = t.tolerance;
      results[i] = RunVoteTrial(vc, tr.seed);
    }
    return absl::OkStatus();
  });

  std::vector<std::string> lines;
  std::map<std::string, std::pair<int, int>> tally;  // kind -> (trials, holds)
  for (size_t i = 0; i < trials.size(); ++i) {
    if (!results[i].ok()) return results[i].status();
    const BoundReport& r = *results[i];
    json line = json::parse(r.ToJson());
    if (trials[i].transfer) {
      line["epsilon"] = trials[i].epsilon;
      line["groups"] = trials[i].groups;
    }
    lines.push_back(line.dump());
    auto& [n, h] = tally[r.kind];
    ++n;
    h += r.holds ? 1 : 0;
  }
  for (const auto& [kind, counts] : tally) {
    nlohmann::ordered_json s;
    s["kind"] = "summary";
    s["suite"] = kind;
    s["trials"] = counts.first;
    s["holds"] = counts.second;
    s["holds_rate"] = static_cast<double>(counts.second) / counts.first;
    lines.push_back(s.dump());
  }
  return lines;
}

absl::StatusOr<std::vector<SummaryRow>> SummarizeText(std::string_view csv) {
  std::vector<std::string> lines =
      absl::StrSplit(absl::string_view(csv.data(), csv.size()), '\n',
                     absl::SkipEmpty());
  if (lines.empty()) return absl::InvalidArgumentError("empty report");
  auto strip = [](std::string s) {
    if (!s.empty() && s.back() == '\r') s.pop_back();
    return s;
  };
  if (strip(lines[0]) != kReportHeader) {
    return absl::InvalidArgumentError("report header does not match");
  }
  struct Acc {
    std::vector<double> acc, xi, w;
  };
  std::vector<std::pair<std::string, std::string>> order;
  std::map<std::pair<std::string, std::string>, Acc> groups;
  for (size_t li = 1; li < lines.size(); ++li) {
    std::vector<std::string> f = absl::StrSplit(strip(lines[li]), ',');
    if (f.size() != 7) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", li + 1, ": expected 7 fields, got ", f.size()));
    }
    if (f[0] == kPartialMarker) {
      return absl::FailedPreconditionError(
          absl::StrCat("line ", li + 1, ": report is partial"));
    }
    double eps, acc, xi;
    if (f[0].empty() || !absl::SimpleAtod(f[1], &eps) ||
        !absl::SimpleAtod(f[2], &acc) || !absl::SimpleAtod(f[3], &xi)) {
      return absl::InvalidArgumentError(
          absl::StrCat("line ", li + 1, ": malformed numeric field"));
    }
    const auto key = std::make_pair(f[0], f[1]);
    auto [it, inserted] = groups.try_emplace(key);
    if (inserted) order.push_back(key);
    it->second.acc.push_back(acc);
    it->second.xi.push_back(xi);
    if (!f[4].empty()) {
      double w;
      if (!absl::SimpleAtod(f[4], &w)) {
        return absl::InvalidArgumentError(
            absl::StrCat("line ", li + 1, ": malformed wasserstein"));
      }
      it->second.w.push_back(w);
    }
  }
  std::vector<SummaryRow> rows;
  for (const auto& key : order) {
    const Acc& a = groups[key];
    SummaryRow r;
    r.method = key.first;
    r.epsilon = key.second;
    r.count = a.acc.size();
    r.accuracy_mean = Mean(a.acc);
    r.accuracy_std = SampleStd(a.acc);
    r.xi_mean = Mean(a.xi);
    r.xi_std = SampleStd(a.xi);
    if (!a.w.empty()) {
      r.wasserstein_mean = Mean(a.w);
      r.wasserstein_std = SampleStd(a.w);
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

absl::StatusOr<std::vector<SummaryRow>> Summarize(const std::string& csv_path) {
  std::ifstream in(csv_path);
  if (!in) return absl::NotFoundError(absl::StrCat("cannot read ", csv_path));
  std::stringstream buf;
  buf << in.rdbuf();
  return SummarizeText(buf.str());
}

absl::Status WriteSummaryCsv(std::span<const SummaryRow> rows,
                             const std::string& path) {
  std::vector<std::string> lines = {
      "method,epsilon,n,accuracy_mean,accuracy_std,xi_mean,xi_std,"
      "wasserstein_mean,wasserstein_std"};
  for (const SummaryRow& r : rows) {
    lines.push_back(absl::StrCat(
        r.method, ",", r.epsilon, ",", r.count, ",", FormatDouble(r.accuracy_mean),
        ",", FormatDouble(r.accuracy_std), ",", FormatDouble(r.xi_mean), ",",
        FormatDouble(r.xi_std), ",",
        r.wasserstein_mean ? FormatDouble(*r.wasserstein_mean) : "", ",",
        r.wasserstein_std ? FormatDouble(*r.wasserstein_std) : ""));
  }
  return WriteLines(path, lines);
}

std::string FormatSummaryTable(std::span<const SummaryRow> rows) {
  std::string out = absl::StrFormat("%-16s %8s %4s %17s %17s %17s\n", "method",
                                    "epsilon", "n", "accuracy", "xi",
                                    "wasserstein");
  for (const SummaryRow& r : rows) {
    const std::string w =
        r.wasserstein_mean
            ? absl::StrFormat("%.4f +- %.4f", *r.wasserstein_mean, *r.wasserstein_std)
            : "-";
    absl::StrAppendFormat(&out, "%-16s %8s %4d %17s %17s %17s\n", r.method,
                          r.epsilon, r.count,
                          absl::StrFormat("%.4f +- %.4f", r.accuracy_mean, r.accuracy_std),
                          absl::StrFormat("%.4f +- %.4f", r.xi_mean, r.xi_std), w);
  }
  return out;
}

}  // namespace fairpate
