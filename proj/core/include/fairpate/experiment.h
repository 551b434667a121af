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

// Experiment configuration, epsilon sweeps written as CSV, the theory suite
// and report aggregation.

#ifndef FAIRPATE_EXPERIMENT_H_
#define FAIRPATE_EXPERIMENT_H_

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "absl/status/status.h"
#include "absl/status/statusor.h"
#include "fairpate/dataset.h"
#include "fairpate/fairness.h"
#include "fairpate/mlp.h"
#include "fairpate/pate.h"

namespace fairpate {

inline constexpr std::string_view kReportHeader =
    "method,epsilon,accuracy,xi,wasserstein,seed,wall_ms";
inline constexpr std::string_view kPartialMarker = "PARTIAL";

// Private methods swept over epsilon; references run once per seed.
inline constexpr std::string_view kPrivateMethods[] = {"sf_s", "sf_t",
                                                       "baseline_m"};
inline constexpr std::string_view kReferenceMethods[] = {"nonprivate_fair",
                                                         "nonprivate_erm"};

struct DataSource {
  enum class Kind { kSynthetic, kCsv };
  Kind kind = Kind::kSynthetic;
  SynthParams synth;  // seed is derived per experiment seed
  std::string csv_path;
  CsvSchema schema;
};

struct TheorySuiteConfig {
  // Transfer check through randomized response.
  std::vector<double> transfer_epsilons = {1.0986122886681098, 1.0, 2.0};
  std::vector<int> transfer_groups = {2, 3};
  size_t transfer_rows = 4000;
  // Vote check.
  int vote_teachers = 5;
  double vote_sigma = 1.0;
  bool vote_fair_teachers = false;
  size_t vote_rows = 4000;
  int vote_noise_draws = 5;
  int epochs = 40;
  double tolerance = 0.02;
};

struct ExperimentConfig {
  DataSource dataset;
  SplitSpec split;
  std::vector<std::string> methods = {"sf_s", "sf_t"};
  std::vector<double> epsilons = {1.0};
  FairnessSpec fairness;
  int num_teachers = 50;
  size_t pool_size = 200;
  double lambda = 1e-3;
  double delta = 1e-4;
  std::vector<uint64_t> seeds = {0};
  TrainConfig train;
  std::string output = "report.csv";
  int workers = 1;
  bool label_protection = false;
  TheorySuiteConfig theory;

  // Rejects every invariant violation before any compute.
  absl::Status Validate() const;
};

// Parses a JSON config. Each override is "dotted.path=value"; the value is
// read as JSON when it parses, otherwise as a string. Unknown keys are
// errors. Returns InvalidArgument for every config problem.
absl::StatusOr<ExperimentConfig> ParseExperimentConfig(
    std::string_view json_text, std::span<const std::string> overrides = {});
absl::StatusOr<ExperimentConfig> LoadExperimentConfig(
    const std::string& path, std::span<const std::string> overrides = {});

// One seed's prepared data: standardized splits and the student pool.
struct PreparedData {
  Dataset train;
  Dataset test;
  StudentPool pool;
};
absl::StatusOr<PreparedData> PrepareData(const ExperimentConfig& config,
                                         uint64_t seed);

// Per-method pipeline configuration for one cell.
PipelineConfig MakePipelineConfig(const ExperimentConfig& config,
                                  uint64_t seed,
                                  std::optional<double> epsilon);

// Runs one (method, epsilon, seed) cell; epsilon is ignored for references.
absl::StatusOr<RunReport> RunCell(const ExperimentConfig& config,
                                  const PreparedData& data,
                                  std::string_view method, double epsilon,
                                  uint64_t seed, int threads = 1);

std::string FormatReportRow(const RunReport& report);

// Rows per seed: references first, then private methods by epsilon.
// Writes config.output. On failure the rows that precede the failing cell
// are written followed by a PARTIAL marker row, and the error is returned.
absl::StatusOr<std::vector<RunReport>> RunSweep(const ExperimentConfig& config);

// JSON lines: one per trial, then one summary line per suite.
absl::StatusOr<std::vector<std::string>> RunTheory(
    const ExperimentConfig& config);

struct SummaryRow {
  std::string method;
  std::string epsilon;  // as written in the report
  size_t count = 0;
  double accuracy_mean = 0.0, accuracy_std = 0.0;
  double xi_mean = 0.0, xi_std = 0.0;
  std::optional<double> wasserstein_mean, wasserstein_std;
};

// Groups report rows by (method, epsilon) in order of first appearance.
// Std is the sample standard deviation, 0 for a single row.
absl::StatusOr<std::vector<SummaryRow>> Summarize(const std::string& csv_path);
absl::StatusOr<std::vector<SummaryRow>> SummarizeText(std::string_view csv);
absl::Status WriteSummaryCsv(std::span<const SummaryRow> rows,
                             const std::string& path);
std::string FormatSummaryTable(std::span<const SummaryRow> rows);

}  // namespace fairpate

#endif  // FAIRPATE_EXPERIMENT_H_
