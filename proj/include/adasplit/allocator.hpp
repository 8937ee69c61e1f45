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

// The behavior allocator: an MDP that walks a user's history and assigns each
// item to an existing sub-sequence or opens a new one.
//
// Actions are 0-based. With h sub-sequences, actions 0..h-1 extend an
// existing one and action h creates a new one (unavailable once h == h_max).

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "adasplit/autodiff.hpp"
#include "adasplit/model.hpp"
#include "adasplit/reward.hpp"

namespace adasplit {

struct AllocatorContext {
  const AllocatorParams& params;
  const AllocatorConfig& config;
  const RewardConfig& reward;
};

// Representation of one sub-sequence. `cell` is only used by the lstm updater;
// `count` (number of member items) only by average-pooling.
struct SubseqRep {
  ad::Var p;
  ad::Var cell;
  std::size_t count = 0;
};

struct EpisodeState {
  std::vector<std::vector<std::size_t>> groups;  // history positions per sub-sequence
  std::vector<SubseqRep> reps;
  ad::Var user;    // e_u, 1 x d
  ad::Var global;  // last global state s, 1 x d
  std::size_t step = 0;
  std::size_t creates = 0;
  double lambda = 0.0;

  std::size_t h() const { return groups.size(); }
  // h x d matrix of current representations.
  ad::Var stacked() const;
  // Row-major copy of the representation values.
  std::vector<double> rep_values() const;
};

struct ActionDistribution {
  ad::Var log_probs;           // 1 x (number of available actions)
  std::vector<double> probs;   // same length
  std::vector<double> scores;  // policy scores, one per sub-sequence
  double epsilon = 0.0;
  bool create_allowed = true;

  std::size_t num_actions() const { return probs.size(); }
  // Scores followed by epsilon when create is allowed.
  std::vector<double> logits() const {
    std::vector<double> out = scores;
    if (create_allowed) out.push_back(epsilon);
    return out;
  }
  std::size_t create_action() const { return scores.size(); }
  double create_probability() const { return create_allowed ? probs.back() : 0.0; }
};

enum class ActionMode { kSample, kArgmax, kReplay };

// Chooses actions by sampling, argmax, or replaying a recorded sequence.
class ActionPicker {
 public:
  static ActionPicker sample(std::mt19937_64& rng);
  static ActionPicker argmax();
  static ActionPicker replay(std::vector<std::size_t> actions);

  ActionMode mode() const { return mode_; }
  std::size_t pick(const ActionDistribution& dist);

 private:
  ActionPicker(ActionMode mode, std::mt19937_64* rng, std::vector<std::size_t> actions)
      : mode_(mode), rng_(rng), actions_(std::move(actions)) {}

  ActionMode mode_;
  std::mt19937_64* rng_;
  std::vector<std::size_t> actions_;
  std::size_t next_ = 0;
};

// Draws from a categorical distribution using one 53-bit uniform.
std::size_t sample_categorical(std::span<const double> probs, std::mt19937_64& rng);
// Lowest index among the maxima.
std::size_t argmax_index(std::span<const double> values);

EpisodeState init_episode(ad::Var user, const RewardConfig& reward);

// s = concat(softmax(x P^T) P, x) W0, batched over the rows of x.
ad::Var global_state(ad::Tape& tape, const StateParams& params, ad::Var reps, ad::Var items);

// Rows concat(s W_s, p_i W_p) for every row p_i of reps; s is 1 x d.
ad::Var per_subseq_states(ad::Tape& tape, const StateParams& params, ad::Var global,
                          ad::Var reps);

// Sigmoid-capped three-layer network; states n x 2d -> scores 1 x n.
ad::Var policy_scores(ad::Tape& tape, const PolicyParams& params, ad::Var states);

// Softmax over the scores with epsilon appended as the create logit.
ActionDistribution action_distribution(ad::Tape& tape, ad::Var scores, double epsilon,
                                       bool allow_create);

SubseqRep init_rep(ad::Tape& tape, const UpdaterParams& params, ad::Var user);

// Folds item vectors x (rows) into the representation; broadcasts a 1-row rep
// against many items.
SubseqRep update_subseq_rep(ad::Tape& tape, const UpdaterParams& params, const SubseqRep& rep,
                            ad::Var item);

// Scores the actions for item x (1 x d) in the current state. Records s.
ActionDistribution decide(ad::Tape& tape, const AllocatorContext& ctx, EpisodeState& state,
                          ad::Var item);

void apply_action(ad::Tape& tape, const AllocatorContext& ctx, EpisodeState& state,
                  std::size_t action, ad::Var item, std::size_t position);

struct TargetAllocation {
  std::size_t action = 0;
  ad::Var rep;       // representation scored against the target, 1 x d
  ad::Var log_prob;  // 1 x 1
  ActionDistribution dist;
  bool created = false;
};

// Allocates a target/candidate item without altering the state.
TargetAllocation allocate_target(ad::Tape& tape, const AllocatorContext& ctx,
                                 EpisodeState& state, ad::Var item, ActionPicker& picker);

}  // namespace adasplit
