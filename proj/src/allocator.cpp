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

#include "adasplit/allocator.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace adasplit {

ad::Var EpisodeState::stacked() const {
  if (reps.size() == 1) return reps[0].p;
  std::vector<ad::Var> rows;
  rows.reserve(reps.size());
  for (const auto& r : reps) rows.push_back(r.p);
  return ad::concat(rows, 0);
}

std::vector<double> EpisodeState::rep_values() const {
  std::vector<double> out;
  for (const auto& r : reps) out.insert(out.end(), r.p.value().begin(), r.p.value().end());
  return out;
}

// ---------------------------------------------------------------------------
// Action selection

ActionPicker ActionPicker::sample(std::mt19937_64& rng) {
  return ActionPicker(ActionMode::kSample, &rng, {});
}

ActionPicker ActionPicker::argmax() { return ActionPicker(ActionMode::kArgmax, nullptr, {}); }

ActionPicker ActionPicker::replay(std::vector<std::size_t> actions) {
  return ActionPicker(ActionMode::kReplay, nullptr, std::move(actions));
}

std::size_t ActionPicker::pick(const ActionDistribution& dist) {
  switch (mode_) {
    case ActionMode::kSample: return sample_categorical(dist.probs, *rng_);
    case ActionMode::kArgmax: return argmax_index(dist.logits());
    case ActionMode::kReplay:
      if (next_ >= actions_.size()) throw std::out_of_range("replay: recorded actions exhausted");
      return actions_[next_++];
  }
  return 0;
}

std::size_t sample_categorical(std::span<const double> probs, std::mt19937_64& rng) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  double cumulative = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    cumulative += probs[i];
    if (u < cumulative) return i;
  }
  // Rounding left u above the total; fall back to the last non-zero entry.
  for (std::size_t i = probs.size(); i-- > 0;) {
    if (probs[i] > 0.0) return i;
  }
  return probs.size() - 1;
}

std::size_t argmax_index(std::span<const double> values) {
  return static_cast<std::size_t>(std::max_element(values.begin(), values.end()) - values.begin());
}

// ---------------------------------------------------------------------------
// State and policy

EpisodeState init_episode(ad::Var user, const RewardConfig& reward) {
  EpisodeState state;
  state.groups.emplace_back();
  state.reps.push_back({user, {}, 0});
  state.user = user;
  state.global = user;
  state.lambda = update_lambda(0, reward);
  return state;
}

ad::Var global_state(ad::Tape& tape, const StateParams& params, ad::Var reps, ad::Var items) {
  ad::Var weights = ad::softmax(ad::matmul(items, reps, false, true));
  ad::Var pooled = ad::matmul(weights, reps);
  return ad::matmul(ad::concat({pooled, items}, 1), tape.param(*params.w0));
}

ad::Var per_subseq_states(ad::Tape& tape, const StateParams& params, ad::Var global,
                          ad::Var reps) {
  const std::size_t h = reps.shape().rows;
  ad::Var projected = ad::matmul(global, tape.param(*params.w_s));
  if (h > 1) {
    projected = ad::matmul(tape.constant({h, 1}, std::vector<double>(h, 1.0)), projected);
  }
  return ad::concat({projected, ad::matmul(reps, tape.param(*params.w_p))}, 1);
}

ad::Var policy_scores(ad::Tape& tape, const PolicyParams& params, ad::Var states) {
  ad::Var h1 = ad::relu(ad::add(ad::matmul(states, tape.param(*params.w1)), tape.param(*params.b1)));
  ad::Var h2 = ad::add(ad::matmul(h1, tape.param(*params.w2)), tape.param(*params.b2));
  // (h2 W3)^T computed directly as W3^T h2^T.
  ad::Var logits = ad::add(ad::matmul(tape.param(*params.w3), h2, true, true), tape.param(*params.b3));
  return ad::sigmoid(logits);
}

ActionDistribution action_distribution(ad::Tape& tape, ad::Var scores, double epsilon,
                                       bool allow_create) {
  ActionDistribution dist;
  dist.epsilon = epsilon;
  dist.create_allowed = allow_create;
  dist.scores.assign(scores.value().begin(), scores.value().end());
  ad::Var logits = allow_create ? ad::concat({scores, tape.scalar(epsilon)}, 1) : scores;
  ad::Var probs = ad::softmax(logits);
  dist.probs.assign(probs.value().begin(), probs.value().end());
  dist.log_probs = ad::log_softmax(logits);
  return dist;
}

// ---------------------------------------------------------------------------
// Representation updates

SubseqRep init_rep(ad::Tape& tape, const UpdaterParams& params, ad::Var user) {
  (void)tape;
  (void)params;
  return {user, {}, 0};
}

SubseqRep update_subseq_rep(ad::Tape& tape, const UpdaterParams& params, const SubseqRep& rep,
                            ad::Var item) {
  SubseqRep out;
  out.count = rep.count + 1;
  switch (params.kind) {
    case UpdaterKind::kAttentionGru: {
      // Scalar update and reset gates.
      ad::Var z = ad::sigmoid(ad::add(ad::matmul(item, tape.param(*params.w_z)),
                                      ad::matmul(rep.p, tape.param(*params.u_z))));
      ad::Var r = ad::sigmoid(ad::add(ad::matmul(item, tape.param(*params.w_r)),
                                      ad::matmul(rep.p, tape.param(*params.u_r))));
      ad::Var candidate = ad::tanh(ad::add(ad::matmul(item, tape.param(*params.w)),
                                           ad::matmul(ad::mul(r, rep.p), tape.param(*params.u))));
      ad::Var one_minus_z = ad::add(ad::neg(z), tape.scalar(1.0));
      out.p = ad::add(ad::mul(z, rep.p), ad::mul(one_minus_z, candidate));
      break;
    }
    case UpdaterKind::kLstm: {
      auto gate = [&](int g) {
        return ad::add(ad::add(ad::matmul(item, tape.param(*params.lstm_w[g])),
                               ad::matmul(rep.p, tape.param(*params.lstm_u[g]))),
                       tape.param(*params.lstm_b[g]));
      };
      ad::Var i = ad::sigmoid(gate(0));
      ad::Var f = ad::sigmoid(gate(1));
      ad::Var o = ad::sigmoid(gate(2));
      ad::Var c_hat = ad::tanh(gate(3));
      // A rep without a cell (the episode's seed) starts from a zero cell.
      out.cell = rep.cell.valid() ? ad::add(ad::mul(f, rep.cell), ad::mul(i, c_hat))
                                  : ad::mul(i, c_hat);
      out.p = ad::mul(o, ad::tanh(out.cell));
      break;
    }
    case UpdaterKind::kAveragePooling: {
      const double n = static_cast<double>(rep.count);
      // Mean of member items; the user-embedding seed is dropped at the first member.
      out.p = rep.count == 0 ? ad::add(item, ad::scale(rep.p, 0.0))
                             : ad::add(ad::scale(rep.p, n / (n + 1.0)), ad::scale(item, 1.0 / (n + 1.0)));
      break;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Transitions

ActionDistribution decide(ad::Tape& tape, const AllocatorContext& ctx, EpisodeState& state,
                          ad::Var item) {
  ad::Var reps = state.stacked();
  state.global = global_state(tape, ctx.params.state, reps, item);
  ad::Var states = per_subseq_states(tape, ctx.params.state, state.global, reps);
  ad::Var scores = policy_scores(tape, ctx.params.policy, states);
  return action_distribution(tape, scores, ctx.config.epsilon, state.h() < ctx.config.h_max);
}

void apply_action(ad::Tape& tape, const AllocatorContext& ctx, EpisodeState& state,
                  std::size_t action, ad::Var item, std::size_t position) {
  const std::size_t h = state.h();
  const bool create_allowed = h < ctx.config.h_max;
  if (action > h || (action == h && !create_allowed)) {
    throw std::out_of_range("apply_action: action " + std::to_string(action) +
                            " invalid with h=" + std::to_string(h));
  }
  if (action < h) {
    state.groups[action].push_back(position);
    state.reps[action] = update_subseq_rep(tape, ctx.params.updater, state.reps[action], item);
  } else {
    state.groups.push_back({position});
    state.reps.push_back(update_subseq_rep(
        tape, ctx.params.updater, init_rep(tape, ctx.params.updater, state.user), item));
    ++state.creates;
    state.lambda = update_lambda(state.creates, ctx.reward);
  }
  ++state.step;
}

TargetAllocation allocate_target(ad::Tape& tape, const AllocatorContext& ctx,
                                 EpisodeState& state, ad::Var item, ActionPicker& picker) {
  TargetAllocation out;
  out.dist = decide(tape, ctx, state, item);
  out.action = picker.pick(out.dist);
  if (out.action >= out.dist.num_actions()) {
    throw std::out_of_range("allocate_target: action " + std::to_string(out.action) + " invalid");
  }
  out.log_prob = ad::pick(out.dist.log_probs, 0, out.action);
  out.created = out.action == state.h();
  out.rep = out.created ? update_subseq_rep(tape, ctx.params.updater,
                                            init_rep(tape, ctx.params.updater, state.user), item)
                              .p
                        : state.reps[out.action].p;
  return out;
}

}  // namespace adasplit
