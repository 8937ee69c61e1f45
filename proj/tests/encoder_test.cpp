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

#include <cmath>
#include <random>

#include "adasplit/encoder.hpp"
#include "adasplit/optim.hpp"
#include "doctest.h"

using namespace adasplit;

namespace {

Model make_model(EncoderMode mode, std::uint64_t seed = 1, std::size_t dim = 8) {
  EncoderConfig enc{.dim = dim, .num_blocks = 1, .mode = mode, .max_len = 10};
  return Model({.num_users = 3, .num_items = 12}, enc, {}, seed);
}

std::vector<double> values(ad::Var v) { return {v.value().begin(), v.value().end()}; }

void fill(ad::Tensor& t, double value) {
  for (double& v : t.values()) v = value;
}

}  // namespace

TEST_CASE("embedding of zero tables is zero") {
  Model m = make_model(EncoderMode::kZero);
  fill(*m.encoder().item_embedding, 0.0);
  fill(*m.encoder().position_embedding, 0.0);
  ad::Tape tape(false);
  const std::size_t items[] = {1, 4, 2};
  auto e = embed_sequence(tape, m.encoder(), items, 0);
  for (double v : e.items.value()) CHECK(v == 0.0);
}

TEST_CASE("single-item embedding is item row plus position row 0") {
  Model m = make_model(EncoderMode::kZero);
  ad::Tape tape(false);
  const std::size_t items[] = {5};
  auto e = embed_sequence(tape, m.encoder(), items, 2);
  for (std::size_t c = 0; c < 8; ++c) {
    CHECK(e.items.at(0, c) == m.encoder().item_embedding->at(5, c) +
                                  m.encoder().position_embedding->at(0, c));
    CHECK(e.user.at(0, c) == m.encoder().user_embedding->at(2, c));
  }
}

TEST_CASE("the same item at two positions embeds differently") {
  Model m = make_model(EncoderMode::kZero);
  ad::Tape tape(false);
  const std::size_t items[] = {3, 3};
  auto e = embed_sequence(tape, m.encoder(), items, 0);
  bool differs = false;
  for (std::size_t c = 0; c < 8; ++c) differs = differs || e.items.at(0, c) != e.items.at(1, c);
  CHECK(differs);
}

TEST_CASE("embedding rejects out-of-range ids and over-long sequences") {
  Model m = make_model(EncoderMode::kZero);
  ad::Tape tape(false);
  const std::size_t bad_item[] = {12};
  CHECK_THROWS_AS(embed_sequence(tape, m.encoder(), bad_item, 0), std::out_of_range);
  const std::size_t ok_item[] = {1};
  CHECK_THROWS_AS(embed_sequence(tape, m.encoder(), ok_item, 3), std::out_of_range);
  std::vector<std::size_t> too_long(11, 1);
  CHECK_THROWS_AS(embed_sequence(tape, m.encoder(), too_long, 0), std::out_of_range);
}

TEST_CASE("single-position attention is LayerNorm(e W_v)") {
  Model m = make_model(EncoderMode::kBidirectional);
  const auto& block = m.encoder().blocks[0];
  ad::Tape tape(false);
  const std::size_t items[] = {7};
  auto e = embed_sequence(tape, m.encoder(), items, 0);
  auto w = attention_weights(tape, block, e.items, false);
  CHECK(w.item() == 1.0);
  auto s = attention_block(tape, block, e.items, false);
  auto expected = ad::layer_norm(ad::matmul(e.items, tape.param(*block.w_v)),
                                 tape.param(*block.ln1_gain), tape.param(*block.ln1_bias));
  CHECK(values(s) == values(expected));
}

TEST_CASE("attention rows sum to one") {
  for (auto mode : {EncoderMode::kBidirectional, EncoderMode::kCausal}) {
    Model m = make_model(mode, 4);
    ad::Tape tape(false);
    const std::size_t items[] = {1, 2, 3, 4, 5, 6};
    auto e = embed_sequence(tape, m.encoder(), items, 1);
    auto w = attention_weights(tape, m.encoder().blocks[0], e.items, mode == EncoderMode::kCausal);
    for (std::size_t r = 0; r < 6; ++r) {
      double total = 0.0;
      for (std::size_t c = 0; c < 6; ++c) total += w.at(r, c);
      CHECK(std::fabs(total - 1.0) <= 1e-6);
    }
  }
}

TEST_CASE("zero mode returns the embedding unchanged") {
  Model m = make_model(EncoderMode::kZero);
  ad::Tape tape(false);
  const std::size_t items[] = {1, 9, 4};
  auto enc = encode(tape, m.encoder(), m.encoder_config(), items, 1);
  auto emb = embed_sequence(tape, m.encoder(), items, 1);
  CHECK(values(enc.items) == values(emb.items));
  CHECK(m.store().find("encoder.block0.w_q") == nullptr);
}

TEST_CASE("zero FFN weights reduce the block to LayerNorm(S)") {
  Model m = make_model(EncoderMode::kBidirectional, 9);
  const auto& block = m.encoder().blocks[0];
  fill(*block.ffn_w1, 0.0);
  fill(*block.ffn_w2, 0.0);
  ad::Tape tape(false);
  const std::size_t items[] = {2, 3, 4, 5};
  auto e = embed_sequence(tape, m.encoder(), items, 0);
  auto s = attention_block(tape, block, e.items, false);
  auto expected = ad::layer_norm(s, tape.param(*block.ln2_gain), tape.param(*block.ln2_bias));
  auto enc = encode(tape, m.encoder(), m.encoder_config(), items, 0);
  const auto got = values(enc.items);
  const auto want = values(expected);
  for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i] == doctest::Approx(want[i]).epsilon(1e-12));
}

namespace {

// Encodes with the embedding of position `perturbed` shifted; returns rows.
std::vector<double> encode_with_shift(Model& m, std::span<const std::size_t> items,
                                      std::size_t perturbed, double delta) {
  auto& pos = *m.encoder().position_embedding;
  const double saved = pos.at(perturbed, 0);
  pos.at(perturbed, 0) += delta;
  ad::Tape tape(false);
  auto enc = encode(tape, m.encoder(), m.encoder_config(), items, 0);
  pos.at(perturbed, 0) = saved;
  return values(enc.items);
}

}  // namespace

TEST_CASE("causal mode is blind to later positions, bidirectional is not") {
  const std::size_t items[] = {1, 2, 3, 4, 5};
  const std::size_t d = 8;
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    Model causal = make_model(EncoderMode::kCausal, seed);
    for (std::size_t t = 0; t + 1 < 5; ++t) {
      auto base = encode_with_shift(causal, items, t + 1, 0.0);
      auto shifted = encode_with_shift(causal, items, t + 1, 0.5);
      for (std::size_t r = 0; r <= t; ++r) {
        for (std::size_t c = 0; c < d; ++c) CHECK(base[r * d + c] == shifted[r * d + c]);
      }
      bool later_changed = false;
      for (std::size_t c = 0; c < d; ++c) later_changed |= base[(t + 1) * d + c] != shifted[(t + 1) * d + c];
      CHECK(later_changed);
    }
    Model bi = make_model(EncoderMode::kBidirectional, seed);
    auto base = encode_with_shift(bi, items, 4, 0.0);
    auto shifted = encode_with_shift(bi, items, 4, 0.5);
    bool first_changed = false;
    for (std::size_t c = 0; c < d; ++c) first_changed |= base[c] != shifted[c];
    CHECK(first_changed);
  }
}

TEST_CASE("encoder output shape is l x d in every mode") {
  for (auto mode : {EncoderMode::kBidirectional, EncoderMode::kCausal, EncoderMode::kZero}) {
    Model m = make_model(mode);
    for (std::size_t l = 1; l <= 10; ++l) {
      std::vector<std::size_t> items(l, 3);
      ad::Tape tape(false);
      auto enc = encode(tape, m.encoder(), m.encoder_config(), items, 0);
      CHECK(enc.items.shape() == ad::Shape{l, 8});
      for (double v : enc.items.value()) CHECK(std::isfinite(v));
    }
  }
}

TEST_CASE("gradients reach every encoder parameter and both embedding tables") {
  Model m = make_model(EncoderMode::kBidirectional, 3);
  ad::Tape tape;
  const std::size_t items[] = {1, 2, 3};
  auto enc = encode(tape, m.encoder(), m.encoder_config(), items, 0);
  std::vector<double> w(enc.items.shape().size());
  for (std::size_t i = 0; i < w.size(); ++i) w[i] = std::sin(1.0 + static_cast<double>(i));
  tape.backward(ad::sum(ad::mul(enc.items, tape.constant(enc.items.shape(), w))));
  for (const auto* t : m.store().all()) {
    const bool encoder_side = t->name().rfind("encoder.", 0) == 0 ||
                              t->name() == "item_embedding" || t->name() == "position_embedding";
    if (!encoder_side) continue;
    double norm = 0.0;
    for (double g : t->grad()) norm += g * g;
    INFO(t->name());
    CHECK(norm > 0.0);
  }
}
