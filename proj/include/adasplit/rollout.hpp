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

// Episode rollouts: encode a history, walk it with the allocator, and record
// the per-step rewards the policy gradient needs.

#include <cstddef>
#include <span>
#include <vector>

#include "adasplit/allocator.hpp"
#include "adasplit/encoder.hpp"
#include "adasplit/model.hpp"
#include "adasplit/reward.hpp"

namespace adasplit {

struct TrajectoryStep {
  std::size_t action = 0;
  std::size_t h_before = 0;  // sub-sequence count when the action was chosen
  ad::Var log_prob;          // 1 x 1
  std::vector<double> probs;
  double r_loss = 0.0;
  double r_ort = 0.0;
  double r_creat = 0.0;
  double reward = 0.0;  // r_loss + lambda_o * r_ort + r_creat
};

struct Trajectory {
  std::vector<TrajectoryStep> steps;
  std::vector<double> returns;

  std::size_t size() const { return steps.size(); }
  std::size_t creates() const;
  void compute_returns(const RewardConfig& config);
};

struct Rollout {
  EncodedSequence encoded;
  EpisodeState state;
  Trajectory trajectory;
};

// Encodes `history` and allocates every item in order. Returns are filled in.
Rollout rollout_episode(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                        std::span<const std::size_t> history, std::size_t user,
                        ActionPicker& picker);

// Allocates the target's raw embedding, appends that step to the trajectory
// (rewarded against the target) and recomputes the returns.
TargetAllocation append_target(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                               Rollout& rollout, std::size_t target, ActionPicker& picker);

}  // namespace adasplit
