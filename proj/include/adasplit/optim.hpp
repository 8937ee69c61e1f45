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

#include <cstdint>
#include <random>
#include <vector>

#include "adasplit/autodiff.hpp"

namespace adasplit::ad {

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

// Adam with bias correction. Moment buffers are keyed by position in the
// parameter list given at construction.
class Adam {
 public:
  Adam(std::vector<Tensor*> params, AdamOptions options);

  // Throws NumericError naming the first parameter holding a non-finite grad;
  // in that case no parameter is modified.
  void step();
  void zero_grad();

  std::int64_t step_count() const { return step_count_; }
  const AdamOptions& options() const { return options_; }

 private:
  std::vector<Tensor*> params_;
  std::vector<std::vector<double>> first_moment_;
  std::vector<std::vector<double>> second_moment_;
  AdamOptions options_;
  std::int64_t step_count_ = 0;
};

// Global L2 norm of all gradients.
double grad_norm(const std::vector<Tensor*>& params);

// Rescales gradients so their global norm is at most max_norm. Returns the
// norm before clipping.
double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm);

// Fills every value with uniform(-bound, bound) draws in registration order.
void init_uniform(Tensor& tensor, double bound, std::mt19937_64& rng);

}  // namespace adasplit::ad
