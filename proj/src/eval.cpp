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

#include "adasplit/eval.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "adasplit/errors.hpp"
#include "adasplit/rollout.hpp"

namespace adasplit {

namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

}  // namespace

CandidateScores score_candidates(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                                 EpisodeState& state, std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates: no candidates");
  const auto& params = model.allocator();
  const std::size_t m = candidates.size();
  const std::size_t d = model.dim();
  const std::size_t h = state.h();
  const bool allow_create = h < model.allocator_config().h_max;
  const double epsilon = model.allocator_config().epsilon;
  (void)reward;

  ad::Var items = tape.gather_rows(*model.encoder().item_embedding, candidates);
  ad::Var reps = state.stacked();
  ad::Var global = global_state(tape, params.state, reps, items);
  ad::Var global_proj = ad::matmul(global, tape.param(*params.state.w_s));
  ad::Var rep_proj = ad::matmul(reps, tape.param(*params.state.w_p));

  // logits[j * width + i]: score of sub-sequence i for candidate j.
  const std::size_t width = h + (allow_create ? 1 : 0);
  std::vector<double> logits(m * width, epsilon);
  std::vector<std::size_t> repeat(m);
  for (std::size_t i = 0; i < h; ++i) {
    std::fill(repeat.begin(), repeat.end(), i);
    ad::Var states = ad::concat({global_proj, ad::gather_rows(rep_proj, repeat)}, 1);
    ad::Var scores = policy_scores(tape, params.policy, states);
    for (std::size_t j = 0; j < m; ++j) logits[j * width + i] = scores.at(0, j);
  }

  CandidateScores out;
  out.actions.resize(m);
  out.scores.resize(m);
  std::vector<std::size_t> created;
  for (std::size_t j = 0; j < m; ++j) {
    out.actions[j] = argmax_index(std::span<const double>(logits.data() + j * width, width));
    if (out.actions[j] == h) created.push_back(j);
  }
  const auto item_values = items.value();
  const auto rep_values = reps.value();
  for (std::size_t j = 0; j < m; ++j) {
    if (out.actions[j] < h) {
      out.scores[j] = dot(rep_values.data() + out.actions[j] * d, item_values.data() + j * d, d);
    }
  }
  if (!created.empty()) {
    ad::Var fresh_items = ad::gather_rows(items, created);
    SubseqRep fresh = update_subseq_rep(tape, params.updater,
                                        init_rep(tape, params.updater, state.user), fresh_items);
    const auto fresh_values = fresh.p.value();
    for (std::size_t k = 0; k < created.size(); ++k) {
      const std::size_t j = created[k];
      out.scores[j] = dot(fresh_values.data() + k * d, item_values.data() + j * d, d);
    }
  }
  return out;
}

CandidateScores score_candidates_loop(ad::Tape& tape, const Model& model,
                                      const RewardConfig& reward, EpisodeState& state,
                                      std::span<const std::size_t> candidates) {
  if (candidates.empty()) throw std::invalid_argument("score_candidates: no candidates");
  const AllocatorContext ctx{model.allocator(), model.allocator_config(), reward};
  const ad::Var saved_global = state.global;
  CandidateScores out;
  auto picker = ActionPicker::argmax();
  for (std::size_t id : candidates) {
    const std::size_t rows[] = {id};
    ad::Var item = tape.gather_rows(*model.encoder().item_embedding, rows);
    TargetAllocation alloc = allocate_target(tape, ctx, state, item, picker);
    out.actions.push_back(alloc.action);
    out.scores.push_back(dot(alloc.rep.value().data(), item.value().data(), model.dim()));
  }
  state.global = saved_global;
  return out;
}

std::size_t rank_of(std::span<const double> scores, std::size_t target,
                    const std::vector<bool>& mask) {
  if (target >= scores.size()) throw std::out_of_range("rank_of: target out of range");
  const double t = scores[target];
  if (!std::isfinite(t)) throw NumericError("non-finite score for target " + std::to_string(target));
  std::size_t rank = 1;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (i == target || (!mask.empty() && !mask[i])) continue;
    if (scores[i] > t || (scores[i] == t && i < target)) ++rank;
  }
  return rank;
}

double ndcg_at_k(std::size_t rank, std::size_t k) {
  return rank >= 1 && rank <= k ? 1.0 / std::log2(static_cast<double>(rank) + 1.0) : 0.0;
}

double mrr_at_k(std::size_t rank, std::size_t k) {
  return rank >= 1 && rank <= k ? 1.0 / static_cast<double>(rank) : 0.0;
}

MetricReport summarize(std::span<const std::size_t> ranks, double mean_final_h) {
  MetricReport r;
  r.users = ranks.size();
  r.mean_final_h = mean_final_h;
  if (ranks.empty()) return r;
  for (std::size_t rank : ranks) {
    r.ndcg5 += ndcg_at_k(rank, 5);
    r.ndcg10 += ndcg_at_k(rank, 10);
    r.mrr5 += mrr_at_k(rank, 5);
    r.mrr10 += mrr_at_k(rank, 10);
  }
  const double scale = 100.0 / static_cast<double>(ranks.size());
  r.ndcg5 *= scale;
  r.ndcg10 *= scale;
  r.mrr5 *= scale;
  r.mrr10 *= scale;
  return r;
}

std::vector<double> popularity_scores(const data::Split& split, std::size_t num_items) {
  std::vector<double> counts(num_items, 0.0);
  for (const auto& u : split.users) {
    for (std::size_t item : u.train) counts.at(item) += 1.0;
  }
  return counts;
}

Evaluation evaluate(const Model& model, const RewardConfig& reward, const data::Split& split,
                    Phase phase, const EvalOptions& options) {
  const std::size_t num_items = model.dims().num_items;
  const std::size_t max_len = model.encoder_config().max_len;
  std::vector<std::size_t> catalog(num_items);
  std::iota(catalog.begin(), catalog.end(), std::size_t{0});
  const std::vector<double> popularity = popularity_scores(split, num_items);

  Evaluation out;
  out.ranks.reserve(split.users.size());
  std::vector<std::size_t> model_ranks, pop_ranks;
  double total_h = 0.0;
  auto picker = ActionPicker::argmax();
  for (const auto& u : split.users) {
    const data::Sample sample = phase == Phase::kValid ? data::validation_sample(u, max_len)
                                                       : data::test_sample(u, max_len);
    ad::Tape tape(false);
    Rollout rollout = rollout_episode(tape, model, reward, sample.history, sample.user, picker);
    CandidateScores scored = score_candidates(tape, model, reward, rollout.state, catalog);

    std::vector<bool> mask;
    if (options.exclude_history) {
      mask.assign(num_items, true);
      for (std::size_t item : sample.history) mask[item] = false;
      mask[sample.target] = true;
    }
    UserRank r;
    r.user = sample.user;
    r.target = sample.target;
    r.rank = rank_of(scored.scores, sample.target, mask);
    r.popularity_rank = rank_of(popularity, sample.target, mask);
    r.target_subseq = scored.actions[sample.target];
    r.final_h = rollout.state.h();
    total_h += static_cast<double>(r.final_h);
    model_ranks.push_back(r.rank);
    pop_ranks.push_back(r.popularity_rank);
    out.ranks.push_back(r);
  }
  const double mean_h = split.users.empty() ? 0.0 : total_h / static_cast<double>(split.users.size());
  out.model = summarize(model_ranks, mean_h);
  out.popularity = summarize(pop_ranks);
  return out;
}

}  // namespace adasplit
