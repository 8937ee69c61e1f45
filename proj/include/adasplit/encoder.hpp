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

// Self-attention item encoder: every history position gets a vector that
// mixes in the rest of the sequence before allocation.

#include <cstddef>
#include <span>

#include "adasplit/autodiff.hpp"
#include "adasplit/model.hpp"

namespace adasplit {

struct EmbeddedSequence {
  ad::Var items;  // l x d, item + position embedding
  ad::Var user;   // 1 x d
};

struct EncodedSequence {
  ad::Var items;     // l x d, one encoded vector per position
  ad::Var embedded;  // l x d, the encoder input
  ad::Var user;      // 1 x d
};

EmbeddedSequence embed_sequence(ad::Tape& tape, const EncoderParams& params,
                                std::span<const std::size_t> items, std::size_t user);

// Row-stochastic l x l attention matrix. Causal rows ignore later positions.
ad::Var attention_weights(ad::Tape& tape, const EncoderBlockParams& block, ad::Var input,
                          bool causal);

// LayerNorm(softmax(QK^T / sqrt(d)) V), single head.
ad::Var attention_block(ad::Tape& tape, const EncoderBlockParams& block, ad::Var input,
                        bool causal);

// LayerNorm(ReLU(S W1 + b1) W2 + b2 + S).
ad::Var feed_forward(ad::Tape& tape, const EncoderBlockParams& block, ad::Var attended);

// Zero mode returns the embedded input unchanged.
EncodedSequence encode(ad::Tape& tape, const EncoderParams& params, const EncoderConfig& config,
                       std::span<const std::size_t> items, std::size_t user);

}  // namespace adasplit
