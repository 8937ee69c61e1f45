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

#include "adasplit/encoder.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace adasplit {

EmbeddedSequence embed_sequence(ad::Tape& tape, const EncoderParams& params,
                                std::span<const std::size_t> items, std::size_t user) {
  const std::size_t max_len = params.position_embedding->shape().rows;
  if (items.empty()) throw std::invalid_argument("embed_sequence: empty sequence");
  if (items.size() > max_len) {
    throw std::out_of_range("embed_sequence: length " + std::to_string(items.size()) +
                            " exceeds max_len " + std::to_string(max_len));
  }
  std::vector<std::size_t> positions(items.size());
  std::iota(positions.begin(), positions.end(), std::size_t{0});
  const std::size_t user_row[1] = {user};
  EmbeddedSequence out;
  out.items = ad::add(tape.gather_rows(*params.item_embedding, items),
                      tape.gather_rows(*params.position_embedding, positions));
  out.user = tape.gather_rows(*params.user_embedding, user_row);
  return out;
}

ad::Var attention_weights(ad::Tape& tape, const EncoderBlockParams& block, ad::Var input,
                          bool causal) {
  const double d = static_cast<double>(input.shape().cols);
  ad::Var q = ad::matmul(input, tape.param(*block.w_q));
  ad::Var k = ad::matmul(input, tape.param(*block.w_k));
  return ad::softmax(ad::scale(ad::matmul(q, k, false, true), 1.0 / std::sqrt(d)), causal);
}

ad::Var attention_block(ad::Tape& tape, const EncoderBlockParams& block, ad::Var input,
                        bool causal) {
  ad::Var weights = attention_weights(tape, block, input, causal);
  ad::Var v = ad::matmul(input, tape.param(*block.w_v));
  return ad::layer_norm(ad::matmul(weights, v), tape.param(*block.ln1_gain),
                        tape.param(*block.ln1_bias));
}

ad::Var feed_forward(ad::Tape& tape, const EncoderBlockParams& block, ad::Var attended) {
  ad::Var hidden = ad::relu(
      ad::add(ad::matmul(attended, tape.param(*block.ffn_w1)), tape.param(*block.ffn_b1)));
  ad::Var out = ad::add(ad::matmul(hidden, tape.param(*block.ffn_w2)), tape.param(*block.ffn_b2));
  return ad::layer_norm(ad::add(out, attended), tape.param(*block.ln2_gain),
                        tape.param(*block.ln2_bias));
}

EncodedSequence encode(ad::Tape& tape, const EncoderParams& params, const EncoderConfig& config,
                       std::span<const std::size_t> items, std::size_t user) {
  EmbeddedSequence embedded = embed_sequence(tape, params, items, user);
  EncodedSequence out{embedded.items, embedded.items, embedded.user};
  if (config.mode == EncoderMode::kZero) return out;
  const bool causal = config.mode == EncoderMode::kCausal;
  ad::Var x = embedded.items;
  for (const auto& block : params.blocks) {
    x = feed_forward(tape, block, attention_block(tape, block, x, causal));
  }
  out.items = x;
  return out;
}

}  // namespace adasplit
