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

// Allocator rewards, the curriculum penalty on "create" actions, and
// discounted returns. Everything here works on plain values: rewards are
// constants with respect to differentiation.

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

namespace adasplit {

enum class PenaltySchedule { kLinear, kExponential, kKeep, kNone };

PenaltySchedule parse_schedule(std::string_view name);
std::string_view schedule_name(PenaltySchedule schedule);

struct RewardConfig {
  double lambda_o = 0.1;  // weight of the orthogonality reward
  double lambda_d = 0.9;  // return decay, in (0, 1]
  PenaltySchedule schedule = PenaltySchedule::kExponential;
  double a1 = 0.5;              // linear slope
  double b1 = 1.1;              // exponential base
  double initial_lambda = 1.1;  // constant used by kKeep
  bool standardize_returns = false;

  void validate() const;
};

// Softmax weight of sub-sequence `action` among all h representations
// scored against `item`. `reps` is h x dim, row-major.
double allocation_reward(std::span<const double> reps, std::size_t dim,
                         std::span<const double> item, std::size_t action);

// Minus the mean absolute pairwise inner product; 0 when h == 1.
double orthogonality_reward(std::span<const double> reps, std::size_t dim);

// Actions are 0-based; action == h means "create".
double creation_penalty(std::size_t action, std::size_t h, double lambda);

// Penalty after `creates` create actions.
double update_lambda(std::size_t creates, const RewardConfig& config);

double combined_reward(double r_loss, double r_ort, double r_creat, const RewardConfig& config);

// returns[t] = rewards[t] + lambda_d * returns[t + 1].
std::vector<double> discounted_returns(std::span<const double> rewards, double lambda_d);

// Subtract mean, divide by standard deviation (left centered when std is 0).
void standardize(std::vector<double>& values);

}  // namespace adasplit
