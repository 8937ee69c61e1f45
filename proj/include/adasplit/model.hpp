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

// Model configuration and the learnable parameter set.
//
// Canonical parameter names (checkpoint keys), d = dim, f = ceil(d/2):
//   item_embedding [V x d]           position_embedding [max_len x d]
//   user_embedding [U x d]
//   encoder.block<k>.w_q / w_k / w_v [d x d]
//   encoder.block<k>.ln1.gain / ln1.bias [1 x d]
//   encoder.block<k>.ffn.w1 [d x d]  ffn.b1 [1 x d]  ffn.w2 [d x d]  ffn.b2 [1 x d]
//   encoder.block<k>.ln2.gain / ln2.bias [1 x d]
//   state.w0 [2d x d]  state.w_s [d x d]  state.w_p [d x d]
//   policy.w1 [2d x d] policy.b1 [1 x d] policy.w2 [d x f] policy.b2 [1 x f]
//   policy.w3 [f x 1]  policy.b3 [1 x 1]
//   updater.w_z / u_z / w_r / u_r [d x 1]  updater.w / u [d x d]   (attention-gru)
//   updater.{w,u}_{i,f,o,c} [d x d]  updater.b_{i,f,o,c} [1 x d]    (lstm)
//   (average-pooling has no parameters)
// Encoder parameters are omitted in zero mode except the two embedding tables.

#include <cstddef>
#include <cstdint>
#include <string_view>
#include <vector>

#include "adasplit/autodiff.hpp"

namespace adasplit {

enum class EncoderMode { kBidirectional, kCausal, kZero };
enum class UpdaterKind { kAttentionGru, kLstm, kAveragePooling };

EncoderMode parse_encoder_mode(std::string_view name);
std::string_view encoder_mode_name(EncoderMode mode);
UpdaterKind parse_updater(std::string_view name);
std::string_view updater_name(UpdaterKind kind);

struct EncoderConfig {
  std::size_t dim = 16;
  std::size_t num_blocks = 1;
  EncoderMode mode = EncoderMode::kBidirectional;
  std::size_t max_len = 50;

  void validate() const;
};

struct AllocatorConfig {
  double epsilon = 0.5;  // logit of the "create" action
  std::size_t h_max = 8;
  UpdaterKind updater = UpdaterKind::kAttentionGru;

  void validate() const;
};

struct EncoderBlockParams {
  ad::Tensor* w_q = nullptr;
  ad::Tensor* w_k = nullptr;
  ad::Tensor* w_v = nullptr;
  ad::Tensor* ln1_gain = nullptr;
  ad::Tensor* ln1_bias = nullptr;
  ad::Tensor* ffn_w1 = nullptr;
  ad::Tensor* ffn_b1 = nullptr;
  ad::Tensor* ffn_w2 = nullptr;
  ad::Tensor* ffn_b2 = nullptr;
  ad::Tensor* ln2_gain = nullptr;
  ad::Tensor* ln2_bias = nullptr;
};

struct EncoderParams {
  ad::Tensor* item_embedding = nullptr;
  ad::Tensor* position_embedding = nullptr;
  ad::Tensor* user_embedding = nullptr;
  std::vector<EncoderBlockParams> blocks;
};

struct StateParams {
  ad::Tensor* w0 = nullptr;
  ad::Tensor* w_s = nullptr;
  ad::Tensor* w_p = nullptr;
};

struct PolicyParams {
  ad::Tensor* w1 = nullptr;
  ad::Tensor* b1 = nullptr;
  ad::Tensor* w2 = nullptr;
  ad::Tensor* b2 = nullptr;
  ad::Tensor* w3 = nullptr;
  ad::Tensor* b3 = nullptr;
};

struct UpdaterParams {
  UpdaterKind kind = UpdaterKind::kAttentionGru;
  // attention-gru
  ad::Tensor* w_z = nullptr;
  ad::Tensor* u_z = nullptr;
  ad::Tensor* w_r = nullptr;
  ad::Tensor* u_r = nullptr;
  ad::Tensor* w = nullptr;
  ad::Tensor* u = nullptr;
  // lstm, gates in order input, forget, output, candidate
  ad::Tensor* lstm_w[4] = {};
  ad::Tensor* lstm_u[4] = {};
  ad::Tensor* lstm_b[4] = {};
};

struct AllocatorParams {
  StateParams state;
  PolicyParams policy;
  UpdaterParams updater;
};

struct ModelDims {
  std::size_t num_users = 0;
  std::size_t num_items = 0;
};

class Model {
 public:
  // Weights and embeddings ~ uniform(-0.1, 0.1); biases 0; layer-norm gains 1.
  Model(ModelDims dims, EncoderConfig encoder, AllocatorConfig allocator, std::uint64_t seed);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  ad::ParameterStore& store() { return store_; }
  const ad::ParameterStore& store() const { return store_; }
  const EncoderParams& encoder() const { return encoder_; }
  const AllocatorParams& allocator() const { return allocator_; }
  const EncoderConfig& encoder_config() const { return encoder_config_; }
  const AllocatorConfig& allocator_config() const { return allocator_config_; }
  const ModelDims& dims() const { return dims_; }
  std::size_t dim() const { return encoder_config_.dim; }

 private:
  ModelDims dims_;
  EncoderConfig encoder_config_;
  AllocatorConfig allocator_config_;
  ad::ParameterStore store_;
  EncoderParams encoder_;
  AllocatorParams allocator_;
};

}  // namespace adasplit
