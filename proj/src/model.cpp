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

#include "adasplit/model.hpp"

#include <cmath>
#include <random>
#include <string>

#include "adasplit/errors.hpp"
#include "adasplit/optim.hpp"

namespace adasplit {

inline constexpr double kInitBound = 0.1;

EncoderMode parse_encoder_mode(std::string_view name) {
  if (name == "bidirectional") return EncoderMode::kBidirectional;
  if (name == "causal") return EncoderMode::kCausal;
  if (name == "zero") return EncoderMode::kZero;
  throw ConfigError("unknown encoder mode '" + std::string(name) +
                    "' (expected bidirectional, causal or zero)");
}

std::string_view encoder_mode_name(EncoderMode mode) {
  switch (mode) {
    case EncoderMode::kBidirectional: return "bidirectional";
    case EncoderMode::kCausal: return "causal";
    case EncoderMode::kZero: return "zero";
  }
  return "unknown";
}

UpdaterKind parse_updater(std::string_view name) {
  if (name == "attention-gru") return UpdaterKind::kAttentionGru;
  if (name == "lstm") return UpdaterKind::kLstm;
  if (name == "average-pooling") return UpdaterKind::kAveragePooling;
  throw ConfigError("unknown updater '" + std::string(name) +
                    "' (expected attention-gru, lstm or average-pooling)");
}

std::string_view updater_name(UpdaterKind kind) {
  switch (kind) {
    case UpdaterKind::kAttentionGru: return "attention-gru";
    case UpdaterKind::kLstm: return "lstm";
    case UpdaterKind::kAveragePooling: return "average-pooling";
  }
  return "unknown";
}

void EncoderConfig::validate() const {
  if (dim == 0) throw ConfigError("encoder dim must be positive");
  if (max_len == 0) throw ConfigError("encoder max_len must be positive");
  if (mode != EncoderMode::kZero && num_blocks == 0) {
    throw ConfigError("encoder needs at least one block unless mode is zero");
  }
}

void AllocatorConfig::validate() const {
  if (!std::isfinite(epsilon)) throw ConfigError("epsilon must be finite");
  if (h_max < 1) throw ConfigError("h_max must be at least 1");
}

Model::Model(ModelDims dims, EncoderConfig encoder, AllocatorConfig allocator, std::uint64_t seed)
    : dims_(dims), encoder_config_(encoder), allocator_config_(allocator) {
  encoder_config_.validate();
  allocator_config_.validate();
  if (dims_.num_users == 0 || dims_.num_items == 0) {
    throw ConfigError("model needs at least one user and one item");
  }
  std::mt19937_64 rng(seed);
  const std::size_t d = encoder_config_.dim;
  const std::size_t f = (d + 1) / 2;

  auto weight = [&](const std::string& name, ad::Shape shape) {
    ad::Tensor& t = store_.add(name, shape);
    ad::init_uniform(t, kInitBound, rng);
    return &t;
  };
  auto zeros = [&](const std::string& name, ad::Shape shape) { return &store_.add(name, shape); };
  auto ones = [&](const std::string& name, ad::Shape shape) {
    ad::Tensor& t = store_.add(name, shape);
    for (double& v : t.values()) v = 1.0;
    return &t;
  };

  encoder_.item_embedding = weight("item_embedding", {dims_.num_items, d});
  encoder_.position_embedding = weight("position_embedding", {encoder_config_.max_len, d});
  encoder_.user_embedding = weight("user_embedding", {dims_.num_users, d});
  if (encoder_config_.mode != EncoderMode::kZero) {
    for (std::size_t k = 0; k < encoder_config_.num_blocks; ++k) {
      const std::string p = "encoder.block" + std::to_string(k) + ".";
      EncoderBlockParams b;
      b.w_q = weight(p + "w_q", {d, d});
      b.w_k = weight(p + "w_k", {d, d});
      b.w_v = weight(p + "w_v", {d, d});
      b.ln1_gain = ones(p + "ln1.gain", {1, d});
      b.ln1_bias = zeros(p + "ln1.bias", {1, d});
      b.ffn_w1 = weight(p + "ffn.w1", {d, d});
      b.ffn_b1 = zeros(p + "ffn.b1", {1, d});
      b.ffn_w2 = weight(p + "ffn.w2", {d, d});
      b.ffn_b2 = zeros(p + "ffn.b2", {1, d});
      b.ln2_gain = ones(p + "ln2.gain", {1, d});
      b.ln2_bias = zeros(p + "ln2.bias", {1, d});
      encoder_.blocks.push_back(b);
    }
  }

  allocator_.state.w0 = weight("state.w0", {2 * d, d});
  allocator_.state.w_s = weight("state.w_s", {d, d});
  allocator_.state.w_p = weight("state.w_p", {d, d});

  allocator_.policy.w1 = weight("policy.w1", {2 * d, d});
  allocator_.policy.b1 = zeros("policy.b1", {1, d});
  allocator_.policy.w2 = weight("policy.w2", {d, f});
  allocator_.policy.b2 = zeros("policy.b2", {1, f});
  allocator_.policy.w3 = weight("policy.w3", {f, 1});
  allocator_.policy.b3 = zeros("policy.b3", {1, 1});

  UpdaterParams& up = allocator_.updater;
  up.kind = allocator_config_.updater;
  switch (up.kind) {
    case UpdaterKind::kAttentionGru:
      up.w_z = weight("updater.w_z", {d, 1});
      up.u_z = weight("updater.u_z", {d, 1});
      up.w_r = weight("updater.w_r", {d, 1});
      up.u_r = weight("updater.u_r", {d, 1});
      up.w = weight("updater.w", {d, d});
      up.u = weight("updater.u", {d, d});
      break;
    case UpdaterKind::kLstm: {
      const char* gates[4] = {"i", "f", "o", "c"};
      for (int g = 0; g < 4; ++g) {
        up.lstm_w[g] = weight(std::string("updater.w_") + gates[g], {d, d});
        up.lstm_u[g] = weight(std::string("updater.u_") + gates[g], {d, d});
        up.lstm_b[g] = zeros(std::string("updater.b_") + gates[g], {1, d});
      }
      break;
    }
    case UpdaterKind::kAveragePooling:
      break;
  }
}

}  // namespace adasplit
