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

#include "adasplit/optim.hpp"

#include <cmath>
#include <stdexcept>

#include "adasplit/errors.hpp"

namespace adasplit::ad {

Adam::Adam(std::vector<Tensor*> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  if (!(options_.lr > 0.0)) throw ConfigError("adam: learning rate must be positive");
  first_moment_.reserve(params_.size());
  second_moment_.reserve(params_.size());
  for (const Tensor* p : params_) {
    first_moment_.emplace_back(p->shape().size(), 0.0);
    second_moment_.emplace_back(p->shape().size(), 0.0);
  }
}

void Adam::step() {
  for (const Tensor* p : params_) {
    for (double g : p->grad()) {
      if (!std::isfinite(g)) {
        throw NumericError("adam: non-finite gradient in parameter '" + p->name() + "'");
      }
    }
  }
  ++step_count_;
  const double t = static_cast<double>(step_count_);
  const double correction1 = 1.0 - std::pow(options_.beta1, t);
  const double correction2 = 1.0 - std::pow(options_.beta2, t);
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Tensor* p = params_[i];
    if (!p->requires_grad()) continue;
    auto values = p->values();
    auto grad = p->grad();
    auto& m = first_moment_[i];
    auto& v = second_moment_[i];
    for (std::size_t j = 0; j < values.size(); ++j) {
      m[j] = options_.beta1 * m[j] + (1.0 - options_.beta1) * grad[j];
      v[j] = options_.beta2 * v[j] + (1.0 - options_.beta2) * grad[j] * grad[j];
      const double m_hat = m[j] / correction1;
      const double v_hat = v[j] / correction2;
      values[j] -= options_.lr * m_hat / (std::sqrt(v_hat) + options_.eps);
    }
  }
}

void Adam::zero_grad() {
  for (Tensor* p : params_) p->zero_grad();
}

double grad_norm(const std::vector<Tensor*>& params) {
  double total = 0.0;
  for (const Tensor* p : params) {
    for (double g : p->grad()) total += g * g;
  }
  return std::sqrt(total);
}

double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm) {
  const double norm = grad_norm(params);
  if (std::isfinite(norm) && norm > max_norm && norm > 0.0) {
    const double factor = max_norm / norm;
    for (Tensor* p : params) {
      for (double& g : p->grad()) g *= factor;
    }
  }
  return norm;
}

void init_uniform(Tensor& tensor, double bound, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-bound, bound);
  for (double& v : tensor.values()) v = dist(rng);
}

}  // namespace adasplit::ad
