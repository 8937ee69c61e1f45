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

// Full-catalog next-item evaluation. A finished history rollout (argmax
// actions) allocates every candidate; its score is the inner product with the
// chosen sub-sequence representation.

#include <cstddef>
#include <span>
#include <vector>

#include "adasplit/allocator.hpp"
#include "adasplit/dataio.hpp"
#include "adasplit/model.hpp"
#include "adasplit/reward.hpp"

namespace adasplit {

struct CandidateScores {
  std::vector<double> scores;         // one per candidate
  std::vector<std::size_t> actions;   // argmax action per candidate
};

// Batched over all candidates.
CandidateScores score_candidates(ad::Tape& tape, const Model& model, const RewardConfig& reward,
                                 EpisodeState& state, std::span<const std::size_t> candidates);

// One allocate_target call per candidate; the reference for the batched path.
CandidateScores score_candidates_loop(ad::Tape& tape, const Model& model,
                                      const RewardConfig& reward, EpisodeState& state,
                                      std::span<const std::size_t> candidates);

// 1-based rank of scores[target]; ties go to the lower index. Entries with
// mask[i] == false are skipped (empty mask keeps everything).
std::size_t rank_of(std::span<const double> scores, std::size_t target,
                    const std::vector<bool>& mask = {});

double ndcg_at_k(std::size_t rank, std::size_t k);
double mrr_at_k(std::size_t rank, std::size_t k);

// Percentages averaged over users.
struct MetricReport {
  double ndcg5 = 0.0;
  double ndcg10 = 0.0;
  double mrr5 = 0.0;
  double mrr10 = 0.0;
  std::size_t users = 0;
  double mean_final_h = 0.0;
};

MetricReport summarize(std::span<const std::size_t> ranks, double mean_final_h = 0.0);

enum class Phase { kValid, kTest };

struct EvalOptions {
  bool exclude_history = false;  // drop input-sequence items (other than the target)
};

struct UserRank {
  std::size_t user = 0;
  std::size_t target = 0;
  std::size_t rank = 0;
  std::size_t popularity_rank = 0;
  std::size_t target_subseq = 0;  // argmax action chosen for the target
  std::size_t final_h = 0;
};

struct Evaluation {
  MetricReport model;
  MetricReport popularity;
  std::vector<UserRank> ranks;
};

// Training-set item frequencies, the popularity baseline's scores.
std::vector<double> popularity_scores(const data::Split& split, std::size_t num_items);

Evaluation evaluate(const Model& model, const RewardConfig& reward, const data::Split& split,
                    Phase phase, const EvalOptions& options = {});

}  // namespace adasplit
