// Copyright 2026 The AdaSplit Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// End-to-end runs shared by the command-line tool and the acceptance suite:
// data preparation, a train + test run, variant sweeps, and the synthetic
// disentanglement check.

#include <filesystem>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "adasplit/config.hpp"
#include "adasplit/eval.hpp"
#include "adasplit/synth.hpp"
#include "adasplit/trainer.hpp"

namespace adasplit {

struct PreparedData {
  data::SequenceDataset dataset;
  data::Split split;
  std::optional<synth::GroundTruth> truth;  // synthetic data only
};

PreparedData prepare_data(const DatasetSpec& spec);

// ADASPLIT_OUTPUT_ROOT when set, else the configured output directory.
std::filesystem::path output_root(const ExperimentConfig& config);
// Creates <root>/<UTC timestamp>-<command>[-n] and returns it.
std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command);

struct RunOutcome {
  TrainResult train;
  Evaluation test;
};

// Trains from the configured seed and evaluates the best checkpoint on the
// test split. With a run directory, writes config.resolved.json, train.log,
// timing.log, checkpoint.txt and metrics.json there.
RunOutcome run_experiment(const ExperimentConfig& config, const PreparedData& data,
                          const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                          Model* trained = nullptr);

nlohmann::json report_json(const MetricReport& report);

struct Variant {
  std::string name;
  ExperimentConfig config;
};

// Suites: encoder, updater, curriculum, length.
std::vector<Variant> ablation_variants(const std::string& suite, const ExperimentConfig& base);
// Parameters: epsilon, lr, batch_size, lambda_o, beta, b1.
std::vector<Variant> grid_variants(const std::string& param, const ExperimentConfig& base);

struct VariantRow {
  std::string name;
  std::size_t seeds = 0;
  MetricReport test;        // mean over seeds
  MetricReport popularity;  // mean over seeds
  double best_valid_ndcg10 = 0.0;
};

std::vector<VariantRow> run_variants(const std::vector<Variant>& variants, const PreparedData& data,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::optional<std::filesystem::path>& dir = std::nullopt,
                                     std::ostream* progress = nullptr);

void write_rows(const std::vector<VariantRow>& rows, std::ostream& out);

struct SynthCheckThresholds {
  double min_nmi = 0.5;
  double min_h = 2.0;
  double max_h = 4.0;
};

struct SynthCheckResult {
  synth::DisentanglementReport configured;  // the configured penalty schedule
  synth::DisentanglementReport no_penalty;  // schedule = none
  bool nmi_ok = false;
  bool h_ok = false;
  bool ordering_ok = false;
  bool passed() const { return nmi_ok && h_ok && ordering_ok; }
};

// Generates the configured synthetic data, trains with the configured
// schedule and with no penalty, and checks the thresholds.
SynthCheckResult run_synth_check(const ExperimentConfig& config,
                                 const SynthCheckThresholds& thresholds = {},
                                 std::ostream* progress = nullptr);

}  // namespace adasplit
