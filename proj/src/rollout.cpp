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

#include "adasplit/rollout.hpp"

#include <stdexcept>

namespace adasplit {

std::size_t Trajectory::creates() const {
  std::size_t n = 0;
  for (const auto& s : steps) n += s.action == s.h_before ? 1 : 0;
  return n;
}

void Trajectory::compute_returns(const RewardConfig& config) {
  std::vector<double> rewards;
  rewards.reserve(steps.size());
  for (const auto& s : steps) rewards.push_back(s.reward);
  returns = discounted_returns(rewards, config.lambda_d);
}

namespace {

std::vector<double> row_values(ad::Var v) { return {v.value().begin(), v.value().end()}; }

void score_step(TrajectoryStep& step, std::span<const double> reps, std::size_t dim,
                std::span<const double> item, double lambda, const RewardConfig& config) {
  step.r_loss = allocation_reward(reps, dim, item, step.action);
  step.r_ort = orthogonality_reward(reps, dim);
  step.r_creat = creation_penalty(step.action, step.h_before, lambda);
  step.reward = combined_reward(step.r_loss, step.r_ort, step.r_creat, config);
}

}  // namespace

Rollout rollout_episode(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                        std::span<const std::size_t> history, std::size_t user,
                        ActionPicker& picker) {
  if (history.empty()) throw std::invalid_argument("rollout_episode: empty history");
  Rollout out;
  out.encoded = encode(tape, model.encoder(), model.encoder_config(), history, user);
  out.state = init_episode(out.encoded.user, reward);
  const AllocatorContext ctx{model.allocator(), model.allocator_config(), reward};
  const std::size_t d = model.dim();
  out.trajectory.steps.reserve(history.size() + 1);
  for (std::size_t t = 0; t < history.size(); ++t) {
    const std::size_t rows[] = {t};
    ad::Var item = ad::gather_rows(out.encoded.items, rows);
    ActionDistribution dist = decide(tape, ctx, out.state, item);
    TrajectoryStep step;
    step.action = picker.pick(dist);
    if (step.action >= dist.num_actions()) {
      throw std::out_of_range("rollout_episode: picked action out of range");
    }
    step.h_before = out.state.h();
    step.log_prob = ad::pick(dist.log_probs, 0, step.action);
    step.probs = std::move(dist.probs);
    const double lambda = out.state.lambda;
    apply_action(tape, ctx, out.state, step.action, item, t);
    score_step(step, out.state.rep_values(), d, item.value(), lambda, reward);
    out.trajectory.steps.push_back(std::move(step));
  }
  out.trajectory.compute_returns(reward);
  return out;
}

TargetAllocation append_target(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                               Rollout& rollout, std::size_t target, ActionPicker& picker) {
  const AllocatorContext ctx{model.allocator(), model.allocator_config(), reward};
  const std::size_t rows[] = {target};
  ad::Var item = tape.gather_rows(*model.encoder().item_embedding, rows);
  TargetAllocation alloc = allocate_target(tape, ctx, rollout.state, item, picker);

  TrajectoryStep step;
  step.action = alloc.action;
  step.h_before = rollout.state.h();
  step.log_prob = alloc.log_prob;
  step.probs = alloc.dist.probs;
  std::vector<double> reps = rollout.state.rep_values();
  if (alloc.created) {
    const auto fresh = row_values(alloc.rep);
    reps.insert(reps.end(), fresh.begin(), fresh.end());
  }
  score_step(step, reps, model.dim(), item.value(), rollout.state.lambda, reward);
  rollout.trajectory.steps.push_back(std::move(step));
  rollout.trajectory.compute_returns(reward);
  return alloc;
}

}  // namespace adasplit
