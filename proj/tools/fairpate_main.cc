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

// fairpate: sweep | theory | summarize | synth.
//
// Exit codes: 0 ok, 2 config error, 3 runtime error.

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "absl/strings/str_cat.h"
#include "absl/strings/str_join.h"
#include "fairpate/dataset.h"
#include "fairpate/experiment.h"
#include "json.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitRuntime = 3;

// Explicit flags are turned into the same "path=value" overrides as --set,
// applied after the --set list so that they win.
struct CommonFlags {
  std::vector<std::string> set;
  std::string output;
  int workers = 0;
  std::vector<uint64_t> seeds;
  std::vector<double> epsilons;
  std::vector<std::string> methods;
  int teachers = 0;
  int pool = 0;
  std::string notion;
  int epochs = 0;

  std::vector<std::string> Overrides() const {
    std::vector<std::string> out = set;
    auto list = [](const auto& v) {
      return absl::StrCat("[", absl::StrJoin(v, ","), "]");
    };
    if (!output.empty()) out.push_back(absl::StrCat("output=\"", output, "\""));
    if (workers > 0) out.push_back(absl::StrCat("workers=", workers));
    if (!seeds.empty()) out.push_back(absl::StrCat("seeds=", list(seeds)));
    if (!epsilons.empty()) out.push_back(absl::StrCat("epsilons=", list(epsilons)));
    if (!methods.empty()) {
      std::vector<std::string> quoted;
      for (const auto& m : methods) quoted.push_back(absl::StrCat("\"", m, "\""));
      out.push_back(absl::StrCat("methods=", list(quoted)));
    }
    if (teachers > 0) out.push_back(absl::StrCat("K=", teachers));
    if (pool > 0) out.push_back(absl::StrCat("s=", pool));
    if (!notion.empty()) out.push_back(absl::StrCat("fairness.notion=\"", notion, "\""));
    if (epochs > 0) out.push_back(absl::StrCat("train.epochs=", epochs));
    return out;
  }
};

void AddCommonFlags(CLI::App* app, CommonFlags& f) {
  app->add_option("--set", f.set, "Override a config field: path=value")
      ->take_all();
  app->add_option("-o,--output", f.output, "Output path");
  app->add_option("--workers", f.workers, "Concurrent cells");
  app->add_option("--seeds", f.seeds, "Seed list");
  app->add_option("--epsilons", f.epsilons, "Epsilon grid");
  app->add_option("--methods", f.methods, "Methods");
  app->add_option("-K,--teachers", f.teachers, "Number of teachers");
  app->add_option("-s,--pool", f.pool, "Student pool size");
  app->add_option("--notion", f.notion, "Fairness notion: dp, eo, ap, gdp:H");
  app->add_option("--epochs", f.epochs, "Training epochs");
}

int Fail(int code, const absl::Status& status) {
  std::cerr << "fairpate: " << status.message() << "\n";
  return code;
}

int RunSweepCommand(const std::string& path, const CommonFlags& flags) {
  auto config = fairpate::LoadExperimentConfig(path, flags.Overrides());
  if (!config.ok()) return Fail(kExitConfig, config.status());
  auto reports = fairpate::RunSweep(*config);
  if (!reports.ok()) return Fail(kExitRuntime, reports.status());
  std::cout << "wrote " << reports->size() << " rows to " << config->output
            << "\n";
  return kExitOk;
}

int RunTheoryCommand(const std::string& path, const CommonFlags& flags) {
  auto config = fairpate::LoadExperimentConfig(path, flags.Overrides());
  if (!config.ok()) return Fail(kExitConfig, config.status());
  auto lines = fairpate::RunTheory(*config);
  if (!lines.ok()) return Fail(kExitRuntime, lines.status());
  std::ofstream out;
  const bool to_file = !flags.output.empty();
  if (to_file) {
    out.open(flags.output);
    if (!out) {
      return Fail(kExitRuntime, absl::UnavailableError(
                                    absl::StrCat("cannot write ", flags.output)));
    }
  }
  for (const std::string& line : *lines) {
    (to_file ? static_cast<std::ostream&>(out) : std::cout) << line << "\n";
  }
  return kExitOk;
}

int RunSummarizeCommand(const std::string& csv, const std::string& out) {
  auto rows = fairpate::Summarize(csv);
  if (!rows.ok()) return Fail(kExitRuntime, rows.status());
  const std::string target = out.empty() ? csv + ".summary.csv" : out;
  if (auto s = fairpate::WriteSummaryCsv(*rows, target); !s.ok()) {
    return Fail(kExitRuntime, s);
  }
  std::cout << fairpate::FormatSummaryTable(*rows);
  return kExitOk;
}

int RunSynthCommand(const std::string& params_path,
                    const std::vector<std::string>& set,
                    const std::string& out) {
  nlohmann::json j = nlohmann::json::object();
  if (!params_path.empty()) {
    std::ifstream in(params_path);
    if (!in) {
      return Fail(kExitConfig, absl::InvalidArgumentError(
                                   absl::StrCat("cannot read ", params_path)));
    }
    j = nlohmann::json::parse(in, nullptr, /*allow_exceptions=*/false);
    if (j.is_discarded() || !j.is_object()) {
      return Fail(kExitConfig,
                  absl::InvalidArgumentError("synth params must be a JSON object"));
    }
  }
  for (const std::string& kv : set) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      return Fail(kExitConfig,
                  absl::InvalidArgumentError(absl::StrCat("bad --set ", kv)));
    }
    auto v = nlohmann::json::parse(kv.substr(eq + 1), nullptr, false);
    if (v.is_discarded()) {
      return Fail(kExitConfig, absl::InvalidArgumentError(
                                   absl::StrCat("bad value in ", kv)));
    }
    j[kv.substr(0, eq)] = v;
  }
  fairpate::SynthParams p;
  try {
    for (auto it = j.begin(); it != j.end(); ++it) {
      const std::string& k = it.key();
      if (k == "n") p.n = it->get<size_t>();
      else if (k == "d") p.d = it->get<int>();
      else if (k == "m") p.m = it->get<int>();
      else if (k == "gap") p.gap = it->get<double>();
      else if (k == "noise") p.noise = it->get<double>();
      else if (k == "seed") p.seed = it->get<uint64_t>();
      else if (k == "group_shift") p.group_shift = it->get<double>();
      else if (k == "minority_share") p.minority_share = it->get<double>();
      else {
        return Fail(kExitConfig, absl::InvalidArgumentError(
                                     absl::StrCat("unknown synth param ", k)));
      }
    }
  } catch (const nlohmann::json::exception&) {
    return Fail(kExitConfig, absl::InvalidArgumentError("synth param has the wrong type"));
  }
  auto data = fairpate::SynthBiased(p);
  if (!data.ok()) return Fail(kExitConfig, data.status());
  if (auto s = fairpate::WriteCsv(*data, out); !s.ok()) {
    return Fail(kExitRuntime, s);
  }
  std::cout << "wrote " << data->size() << " rows to " << out << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fair and private learning through teacher ensembles"};
  app.require_subcommand(1);

  std::string config_path;
  CommonFlags sweep_flags, theory_flags;
  auto* sweep = app.add_subcommand("sweep", "Run an epsilon sweep, write CSV");
  sweep->add_option("config", config_path, "JSON config")->required();
  AddCommonFlags(sweep, sweep_flags);

  auto* theory = app.add_subcommand("theory", "Run the bound checks, JSON lines");
  theory->add_option("config", config_path, "JSON config")->required();
  AddCommonFlags(theory, theory_flags);

  std::string csv_path, summary_out;
  auto* summarize = app.add_subcommand("summarize", "Aggregate a sweep CSV");
  summarize->add_option("csv", csv_path, "Report CSV")->required();
  summarize->add_option("-o,--output", summary_out,
                        "Summary CSV (default <csv>.summary.csv)");

  std::string synth_params, synth_out = "synth.csv";
  std::vector<std::string> synth_set;
  auto* synth = app.add_subcommand("synth", "Write a synthetic biased CSV");
  synth->add_option("params", synth_params, "JSON params (optional)");
  synth->add_option("--set", synth_set, "Override a param: key=value")->take_all();
  synth->add_option("-o,--output", synth_out, "Output CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  if (*sweep) return RunSweepCommand(config_path, sweep_flags);
  if (*theory) return RunTheoryCommand(config_path, theory_flags);
  if (*summarize) return RunSummarizeCommand(csv_path, summary_out);
  if (*synth) return RunSynthCommand(synth_params, synth_set, synth_out);
  return kExitConfig;
}
