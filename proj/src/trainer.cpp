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

#include "adasplit/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <unordered_set>

#include "adasplit/errors.hpp"

namespace adasplit {

void TrainConfig::validate() const {
  if (!(beta >= 0.0) || !std::isfinite(beta)) throw ConfigError("beta must be finite and >= 0");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (neg_sample_size && *neg_sample_size == 0) throw ConfigError("neg_sample_size must be >= 1");
  if (!(clip_norm > 0.0)) throw ConfigError("clip_norm must be positive");
  encoder.validate();
  allocator.validate();
  reward.validate();
}

ad::Var rl_loss(const Trajectory& trajectory) {
  if (trajectory.steps.empty()) throw std::invalid_argument("rl_loss: empty trajectory");
  if (trajectory.returns.size() != trajectory.steps.size()) {
    throw std::invalid_argument("rl_loss: returns not computed");
  }
  std::vector<ad::Var> log_probs;
  log_probs.reserve(trajectory.size());
  for (const auto& s : trajectory.steps) log_probs.push_back(s.log_prob);
  ad::Var row = ad::concat(log_probs, 1);
  ad::Tape& tape = *row.tape();
  ad::Var weights = tape.constant({1, trajectory.size()}, trajectory.returns);
  return ad::neg(ad::sum(ad::mul(row, weights)));
}

ad::Var seq_loss(ad::Tape& tape, const Model& model, ad::Var rep, std::size_t target,
                 std::optional<std::size_t> neg_sample_size, std::mt19937_64& rng) {
  const std::size_t num_items = model.dims().num_items;
  if (target >= num_items) {
    throw std::out_of_range("seq_loss: target " + std::to_string(target) + " outside catalog of " +
                            std::to_string(num_items));
  }
  ad::Tensor& table = *model.encoder().item_embedding;
  if (!neg_sample_size || *neg_sample_size + 1 >= num_items) {
    ad::Var logits = ad::matmul(rep, tape.param(table), false, true);
    return ad::neg(ad::pick(ad::log_softmax(logits), 0, target));
  }
  std::vector<std::size_t> ids{target};
  std::unordered_set<std::size_t> seen{target};
  std::uniform_int_distribution<std::size_t> draw(0, num_items - 1);
  while (ids.size() < *neg_sample_size + 1) {
    const std::size_t id = draw(rng);
    if (seen.insert(id).second) ids.push_back(id);
  }
  ad::Var logits = ad::matmul(rep, tape.gather_rows(table, ids), false, true);
  return ad::neg(ad::pick(ad::log_softmax(logits), 0, 0));
}

Trainer::Trainer(Model& model, const TrainConfig& config)
    : model_(model),
      config_(config),
      adam_(model.store().all(), {.lr = config.lr}),
      action_rng_(config.seed ^ 0x5eed0001ULL),
      negative_rng_(config.seed ^ 0x5eed0002ULL),
      shuffle_rng_(config.seed ^ 0x5eed0003ULL) {
  config_.validate();
}

LossBreakdown Trainer::joint_step(std::span<const data::Sample> batch) {
  if (batch.empty()) throw std::invalid_argument("joint_step: empty batch");
  const RewardConfig& reward = config_.reward;
  adam_.zero_grad();

  // Roll out every episode first so returns can be standardized batch-wide.
  struct Episode {
    std::unique_ptr<ad::Tape> tape;
    Rollout rollout;
    ad::Var rep;
    std::size_t final_h = 0;
  };
  std::vector<Episode> episodes;
  episodes.reserve(batch.size());
  auto picker = ActionPicker::sample(action_rng_);
  for (const auto& sample : batch) {
    Episode ep;
    ep.tape = std::make_unique<ad::Tape>();
    ep.rollout = rollout_episode(*ep.tape, model_, reward, sample.history, sample.user, picker);
    ep.final_h = ep.rollout.state.h();
    ep.rep = append_target(*ep.tape, model_, reward, ep.rollout, sample.target, picker).rep;
    episodes.push_back(std::move(ep));
  }
  if (reward.standardize_returns) {
    std::vector<double> all;
    for (const auto& ep : episodes) {
      all.insert(all.end(), ep.rollout.trajectory.returns.begin(), ep.rollout.trajectory.returns.end());
    }
    standardize(all);
    std::size_t k = 0;
    for (auto& ep : episodes) {
      for (double& r : ep.rollout.trajectory.returns) r = all[k++];
    }
  }

  LossBreakdown out;
  out.episodes = batch.size();
  const double inv = 1.0 / static_cast<double>(batch.size());
  std::size_t steps = 0, creates = 0;
  for (std::size_t i = 0; i < episodes.size(); ++i) {
    Episode& ep = episodes[i];
    ad::Tape& tape = *ep.tape;
    ad::Var l_seq = seq_loss(tape, model_, ep.rep, batch[i].target, config_.neg_sample_size,
                             negative_rng_);
    ad::Var l_rl = rl_loss(ep.rollout.trajectory);
    ad::Var total = config_.use_rl_loss ? ad::add(l_seq, ad::scale(l_rl, config_.beta)) : l_seq;
    tape.backward(ad::scale(total, inv));
    out.l_seq += l_seq.item() * inv;
    out.l_rl += l_rl.item() * inv;
    out.mean_episode_length += static_cast<double>(ep.rollout.trajectory.size()) * inv;
    out.mean_final_h += static_cast<double>(ep.final_h) * inv;
    steps += ep.rollout.trajectory.size();
    creates += ep.rollout.trajectory.creates();
  }
  out.total = out.l_seq + config_.beta * out.l_rl;
  out.create_rate = static_cast<double>(creates) / static_cast<double>(steps);
  if (!std::isfinite(out.l_seq) || !std::isfinite(out.l_rl)) {
    std::ostringstream msg;
    msg << "non-finite loss: l_seq=" << out.l_seq << " l_rl=" << out.l_rl
        << " total=" << out.total;
    throw NumericError(msg.str());
  }
  ad::clip_grad_norm(model_.store().all(), config_.clip_norm);
  adam_.step();
  return out;
}

namespace {

std::string num(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

std::string format_epoch(const EpochRecord& r) {
  std::string s = "epoch=" + std::to_string(r.epoch);
  s += " l_seq=" + num(r.loss.l_seq);
  s += " l_rl=" + num(r.loss.l_rl);
  s += " total=" + num(r.loss.total);
  s += " val_ndcg5=" + num(r.valid.ndcg5);
  s += " val_ndcg10=" + num(r.valid.ndcg10);
  s += " val_mrr5=" + num(r.valid.mrr5);
  s += " val_mrr10=" + num(r.valid.mrr10);
  s += " mean_h=" + num(r.loss.mean_final_h);
  s += " create_rate=" + num(r.loss.create_rate);
  s += " episode_len=" + num(r.loss.mean_episode_length);
  return s;
}

TrainResult train(Model& model, const data::Split& split, const TrainConfig& config,
                  const TrainHooks& hooks) {
  Trainer trainer(model, config);
  TrainResult result;
  if (config.epochs == 0) return result;

  std::vector<data::Sample> samples = data::training_samples(split, config.encoder.max_len);
  if (samples.empty()) throw DataError("no training samples: every training prefix is too short");
  std::vector<std::size_t> order(samples.size());
  std::vector<data::Sample> batch;
  std::vector<ad::NamedMatrix> best = ad::snapshot(model.store());
  double best_score = -1.0;
  std::size_t since_best = 0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), trainer.shuffle_rng());

    EpochRecord record;
    record.epoch = epoch;
    std::size_t seen = 0;
    double steps_weighted = 0.0;
    for (std::size_t begin = 0; begin < order.size(); begin += config.batch_size) {
      const std::size_t end = std::min(order.size(), begin + config.batch_size);
      batch.clear();
      for (std::size_t i = begin; i < end; ++i) batch.push_back(samples[order[i]]);
      LossBreakdown step = trainer.joint_step(batch);
      const double w = static_cast<double>(batch.size());
      record.loss.l_seq += step.l_seq * w;
      record.loss.l_rl += step.l_rl * w;
      record.loss.mean_episode_length += step.mean_episode_length * w;
      record.loss.mean_final_h += step.mean_final_h * w;
      record.loss.create_rate += step.create_rate * step.mean_episode_length * w;
      steps_weighted += step.mean_episode_length * w;
      seen += batch.size();
    }
    const double n = static_cast<double>(seen);
    record.loss.episodes = seen;
    record.loss.l_seq /= n;
    record.loss.l_rl /= n;
    record.loss.total = record.loss.l_seq + config.beta * record.loss.l_rl;
    record.loss.mean_episode_length /= n;
    record.loss.mean_final_h /= n;
    record.loss.create_rate /= steps_weighted;

    if (config.validate_each_epoch) {
      record.valid = evaluate(model, config.reward, split, Phase::kValid).model;
    }
    record.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    if (hooks.log) *hooks.log << format_epoch(record) << '\n' << std::flush;
    if (hooks.timing) {
      *hooks.timing << "epoch=" << epoch << " seconds=" << record.seconds << '\n' << std::flush;
    }
    if (hooks.on_epoch) hooks.on_epoch(record);
    result.epochs.push_back(record);

    if (!config.validate_each_epoch || record.valid.ndcg10 > best_score) {
      best_score = record.valid.ndcg10;
      best = ad::snapshot(model.store());
      result.best_epoch = epoch;
      result.best_valid = record.valid;
      since_best = 0;
    } else if (++since_best >= config.patience) {
      result.stopped_early = true;
      break;
    }
  }
  ad::restore(model.store(), best);
  return result;
}

}  // namespace adasplit
