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

#include "adasplit/reward.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#include "adasplit/errors.hpp"

namespace adasplit {

PenaltySchedule parse_schedule(std::string_view name) {
  if (name == "linear") return PenaltySchedule::kLinear;
  if (name == "exponential") return PenaltySchedule::kExponential;
  if (name == "keep") return PenaltySchedule::kKeep;
  if (name == "none") return PenaltySchedule::kNone;
  throw ConfigError("unknown penalty schedule '" + std::string(name) +
                    "' (expected linear, exponential, keep or none)");
}

std::string_view schedule_name(PenaltySchedule schedule) {
  switch (schedule) {
    case PenaltySchedule::kLinear: return "linear";
    case PenaltySchedule::kExponential: return "exponential";
    case PenaltySchedule::kKeep: return "keep";
    case PenaltySchedule::kNone: return "none";
  }
  return "unknown";
}

void RewardConfig::validate() const {
  if (!std::isfinite(lambda_o) || !std::isfinite(initial_lambda)) {
    throw ConfigError("reward weights must be finite");
  }
  if (!(lambda_d > 0.0 && lambda_d <= 1.0)) throw ConfigError("lambda_d must be in (0, 1]");
  if (!(a1 > 0.0) || !(b1 > 0.0)) throw ConfigError("a1 and b1 must be positive");
}

namespace {
double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}
}  // namespace

double allocation_reward(std::span<const double> reps, std::size_t dim,
                         std::span<const double> item, std::size_t action) {
  const std::size_t h = reps.size() / dim;
  if (action >= h) throw std::out_of_range("allocation_reward: action out of range");
  std::vector<double> logits(h);
  for (std::size_t i = 0; i < h; ++i) logits[i] = dot(reps.data() + i * dim, item.data(), dim);
  const double mx = *std::max_element(logits.begin(), logits.end());
  double total = 0.0;
  for (double l : logits) total += std::exp(l - mx);
  return std::exp(logits[action] - mx) / total;
}

double orthogonality_reward(std::span<const double> reps, std::size_t dim) {
  const std::size_t h = reps.size() / dim;
  if (h < 2) return 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < h; ++i) {
    for (std::size_t j = i + 1; j < h; ++j) {
      total += std::fabs(dot(reps.data() + i * dim, reps.data() + j * dim, dim));
    }
  }
  return -total / (static_cast<double>(h * (h - 1)) / 2.0);
}

double creation_penalty(std::size_t action, std::size_t h, double lambda) {
  return action == h ? -lambda : 0.0;
}

double update_lambda(std::size_t creates, const RewardConfig& config) {
  const double t = static_cast<double>(creates);
  switch (config.schedule) {
    case PenaltySchedule::kLinear: return config.a1 * t;
    case PenaltySchedule::kExponential: return std::pow(config.b1, t);
    case PenaltySchedule::kKeep: return config.initial_lambda;
    case PenaltySchedule::kNone: return 0.0;
  }
  return 0.0;
}

double combined_reward(double r_loss, double r_ort, double r_creat, const RewardConfig& config) {
  return r_loss + config.lambda_o * r_ort + r_creat;
}

std::vector<double> discounted_returns(std::span<const double> rewards, double lambda_d) {
  std::vector<double> out(rewards.size());
  double running = 0.0;
  for (std::size_t t = rewards.size(); t-- > 0;) {
    running = rewards[t] + lambda_d * running;
    out[t] = running;
  }
  return out;
}

void standardize(std::vector<double>& values) {
  if (values.empty()) return;
  const double n = static_cast<double>(values.size());
  const double mu = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double var = 0.0;
  for (double v : values) var += (v - mu) * (v - mu);
  const double sd = std::sqrt(var / n);
  for (double& v : values) v = sd > 0.0 ? (v - mu) / sd : v - mu;
}

}  // namespace adasplit
