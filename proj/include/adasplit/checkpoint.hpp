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

// Text checkpoint of a ParameterStore.
//
//   adasplit-checkpoint 1
//   count <n>
//   param <name> <rows> <cols>
//   <rows*cols values, row-major, shortest round-trip decimal>
//   ... one param/values pair per tensor, in registration order
//
// Values are written with std::to_chars, so reading back is bit-exact.

#include <filesystem>
#include <string>
#include <vector>

#include "adasplit/autodiff.hpp"

namespace adasplit::ad {

inline constexpr int kCheckpointVersion = 1;

struct NamedMatrix {
  std::string name;
  Shape shape;
  std::vector<double> values;
};

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path);
std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path);

// Loads into an existing store. Names and shapes must match exactly.
void load_checkpoint(ParameterStore& store, const std::filesystem::path& path);

// In-memory snapshot / restore used for best-epoch tracking.
std::vector<NamedMatrix> snapshot(const ParameterStore& store);
void restore(ParameterStore& store, const std::vector<NamedMatrix>& snap);

}  // namespace adasplit::ad
