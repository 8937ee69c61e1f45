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

// Joint training: the recommendation loss on the target's sub-sequence plus
// the allocator's policy-gradient loss.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "adasplit/checkpoint.hpp"
#include "adasplit/dataio.hpp"
#include "adasplit/eval.hpp"
#include "adasplit/model.hpp"
#include "adasplit/optim.hpp"
#include "adasplit/reward.hpp"
#include "adasplit/rollout.hpp"

namespace adasplit {

struct TrainConfig {
  double beta = 0.1;
  double lr = 1e-3;
  std::size_t batch_size = 64;
  std::size_t epochs = 30;
  std::optional<std::size_t> neg_sample_size;  // nullopt: softmax over the full catalog
  std::uint64_t seed = 42;
  double clip_norm = 5.0;
  std::size_t patience = 10;  // epochs without validation NDCG@10 gain
  bool use_rl_loss = true;    // false trains on L_seq alone
  bool validate_each_epoch = true;
  EncoderConfig encoder;
  AllocatorConfig allocator;
  RewardConfig reward;

  void validate() const;
};

struct LossBreakdown {
  double l_seq = 0.0;
  double l_rl = 0.0;
  double total = 0.0;
  double mean_episode_length = 0.0;
  double mean_final_h = 0.0;
  double create_rate = 0.0;
  std::size_t episodes = 0;
};

// -sum_t return[t] * log pi(a_t); returns are constants.
ad::Var rl_loss(const Trajectory& trajectory);

// -log softmax(p_a . v)[target] over the catalog, or over the target plus
// `neg_sample_size` distinct uniformly drawn non-target items.
ad::Var seq_loss(ad::Tape& tape, const Model& model, ad::Var rep, std::size_t target,
                 std::optional<std::size_t> neg_sample_size, std::mt19937_64& rng);

class Trainer {
 public:
  Trainer(Model& model, const TrainConfig& config);

  // One optimizer step on the mean loss of the batch.
  LossBreakdown joint_step(std::span<const data::Sample> batch);

  Model& model() { return model_; }
  const TrainConfig& config() const { return config_; }
  std::mt19937_64& shuffle_rng() { return shuffle_rng_; }

 private:
  Model& model_;
  TrainConfig config_;
  ad::Adam adam_;
  std::mt19937_64 action_rng_;
  std::mt19937_64 negative_rng_;
  std::mt19937_64 shuffle_rng_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  LossBreakdown loss;
  MetricReport valid;
  double seconds = 0.0;
};

struct TrainResult {
  std::vector<EpochRecord> epochs;
  std::size_t best_epoch = 0;  // 0: the initial parameters
  MetricReport best_valid;
  bool stopped_early = false;
};

// Formats an epoch as one line of key=value pairs (wall time excluded).
std::string format_epoch(const EpochRecord& record);

struct TrainHooks {
  std::ostream* log = nullptr;     // deterministic per-epoch records
  std::ostream* timing = nullptr;  // wall time per epoch
  std::function<void(const EpochRecord&)> on_epoch;
};

// Trains `model` in place; on return it holds the best-validation parameters.
TrainResult train(Model& model, const data::Split& split, const TrainConfig& config,
                  const TrainHooks& hooks = {});

}  // namespace adasplit
