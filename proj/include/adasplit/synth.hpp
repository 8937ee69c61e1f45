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

// Synthetic multi-interest sequences with planted interest labels, and the
// partition agreement score used to check how well the allocator recovers
// them.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "adasplit/dataio.hpp"
#include "adasplit/model.hpp"
#include "adasplit/reward.hpp"

namespace adasplit::synth {

struct SyntheticConfig {
  std::size_t num_interests = 3;
  std::size_t items_per_interest = 30;
  std::size_t users = 200;
  std::size_t seq_len = 20;   // full sequence, validation and test targets included
  double switch_prob = 0.2;   // chance the next item leaves the current interest
  std::uint64_t seed = 7;

  void validate() const;
  std::size_t num_items() const { return num_interests * items_per_interest; }
};

// labels[user][position], 0-based interest ids.
struct GroundTruth {
  std::vector<std::vector<std::size_t>> labels;
};

struct SyntheticData {
  data::SequenceDataset dataset;
  GroundTruth truth;
};

// Item i belongs to interest i / items_per_interest. Each user keeps a random
// subset of 2..K interests (1 when K == 1) and walks a Markov chain over it.
SyntheticData generate(const SyntheticConfig& config);

// Sidecar format: "# adasplit-labels 1 users=N", then "user<TAB>l1,l2,..."
// with 1-based labels.
void write_labels(const GroundTruth& truth, const std::filesystem::path& path);
GroundTruth read_labels(const std::filesystem::path& path);

// Normalized mutual information, normalized by the arithmetic mean of the two
// entropies. Two constant labelings score 1; exactly one constant scores 0.
double partition_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b);

struct DisentanglementReport {
  double mean_nmi = 0.0;
  double mean_final_h = 0.0;
  std::size_t users = 0;
  std::vector<double> per_user_nmi;
};

// Rolls out each user's test input (training prefix plus validation item) with
// argmax actions and compares the sub-sequence assignment with the labels.
DisentanglementReport measure_disentanglement(const Model& model, const RewardConfig& reward,
                                              const data::Split& split, const GroundTruth& truth);

}  // namespace adasplit::synth
