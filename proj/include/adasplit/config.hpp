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

// Experiment configuration: a JSON document with one object per component.
// Unknown keys are rejected; `resolved_json` writes back every field so a run
// can be reproduced from its snapshot alone.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"

#include "adasplit/dataio.hpp"
#include "adasplit/synth.hpp"
#include "adasplit/trainer.hpp"

namespace adasplit {

enum class DataSource { kRaw, kCanonical, kSynthetic };

struct DatasetSpec {
  DataSource source = DataSource::kCanonical;
  std::string input;      // raw interaction file (source = raw)
  std::string canonical;  // directory holding dataset.tsv etc. (source = canonical)
  std::string stem = "dataset";
  data::InputFormat format = data::InputFormat::kAmazonRatings;
  data::LastfmField lastfm_field = data::LastfmField::kTrack;
  data::BuildOptions build;
  synth::SyntheticConfig synthetic;  // source = synthetic
};

struct ExperimentConfig {
  DatasetSpec dataset;
  TrainConfig train;
  EvalOptions eval;
  std::string output_dir = "runs";

  void validate() const;
};

ExperimentConfig config_from_json(const nlohmann::json& doc);
nlohmann::json resolved_json(const ExperimentConfig& config);

// Reads a file (comments allowed) and applies "section.key=value" overrides,
// where value is parsed as JSON when possible and as a string otherwise.
ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides = {});
void apply_override(nlohmann::json& doc, const std::string& assignment);

}  // namespace adasplit
