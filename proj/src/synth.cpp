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

#include "adasplit/synth.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <string>

#include "adasplit/errors.hpp"
#include "adasplit/rollout.hpp"

namespace adasplit::synth {

void SyntheticConfig::validate() const {
  if (num_interests == 0) throw ConfigError("synthetic: num_interests must be >= 1");
  if (items_per_interest == 0) throw ConfigError("synthetic: items_per_interest must be >= 1");
  if (users < 2) throw ConfigError("synthetic: need at least 2 users");
  if (seq_len < 3) throw ConfigError("synthetic: seq_len must be >= 3");
  if (!(switch_prob >= 0.0 && switch_prob <= 1.0)) {
    throw ConfigError("synthetic: switch_prob must be in [0, 1]");
  }
}

SyntheticData generate(const SyntheticConfig& config) {
  config.validate();
  std::mt19937_64 rng(config.seed);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::size_t k = config.num_interests;

  SyntheticData out;
  auto& ds = out.dataset;
  for (std::size_t i = 0; i < config.num_items(); ++i) ds.item_ids.push_back("i" + std::to_string(i));
  std::vector<std::size_t> interests(k);
  for (std::size_t u = 0; u < config.users; ++u) {
    ds.user_ids.push_back("u" + std::to_string(u));
    std::iota(interests.begin(), interests.end(), std::size_t{0});
    std::shuffle(interests.begin(), interests.end(), rng);
    const std::size_t lo = std::min<std::size_t>(2, k);
    const std::size_t kept = std::uniform_int_distribution<std::size_t>(lo, k)(rng);
    std::vector<std::size_t> mine(interests.begin(), interests.begin() + kept);

    std::vector<std::size_t> seq, labels;
    std::vector<std::int64_t> times;
    std::size_t current = std::uniform_int_distribution<std::size_t>(0, kept - 1)(rng);
    std::uniform_int_distribution<std::size_t> pick_item(0, config.items_per_interest - 1);
    for (std::size_t t = 0; t < config.seq_len; ++t) {
      if (t > 0 && kept > 1 && unit(rng) < config.switch_prob) {
        // Move to one of the other kept interests.
        std::size_t next = std::uniform_int_distribution<std::size_t>(0, kept - 2)(rng);
        current = next >= current ? next + 1 : next;
      }
      const std::size_t interest = mine[current];
      labels.push_back(interest);
      seq.push_back(interest * config.items_per_interest + pick_item(rng));
      times.push_back(static_cast<std::int64_t>(t));
    }
    ds.sequences.push_back(std::move(seq));
    ds.timestamps.push_back(std::move(times));
    out.truth.labels.push_back(std::move(labels));
  }
  ds.stats = data::compute_stats(ds.sequences, ds.item_ids.size());
  return out;
}

void write_labels(const GroundTruth& truth, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  out << "# adasplit-labels 1 users=" << truth.labels.size() << '\n';
  for (std::size_t u = 0; u < truth.labels.size(); ++u) {
    out << u << '\t';
    for (std::size_t i = 0; i < truth.labels[u].size(); ++i) {
      out << (i ? "," : "") << truth.labels[u][i] + 1;
    }
    out << '\n';
  }
  if (!out) throw DataError("failed writing " + path.string());
}

GroundTruth read_labels(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read " + path.string());
  GroundTruth truth;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line[0] == '#') continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": missing tab");
    }
    std::vector<std::size_t> labels;
    std::stringstream fields(line.substr(tab + 1));
    std::string field;
    while (std::getline(fields, field, ',')) {
      const long v = std::stol(field);
      if (v < 1) throw DataError(path.string() + ":" + std::to_string(line_no) + ": label < 1");
      labels.push_back(static_cast<std::size_t>(v - 1));
    }
    truth.labels.push_back(std::move(labels));
  }
  return truth;
}

namespace {

double entropy(const std::map<std::size_t, double>& counts, double n) {
  double h = 0.0;
  for (const auto& [_, c] : counts) h -= c / n * std::log(c / n);
  return h;
}

}  // namespace

double partition_agreement(std::span<const std::size_t> a, std::span<const std::size_t> b) {
  if (a.size() != b.size()) throw std::invalid_argument("partition_agreement: length mismatch");
  if (a.empty()) throw std::invalid_argument("partition_agreement: empty input");
  const double n = static_cast<double>(a.size());
  std::map<std::size_t, double> ca, cb;
  std::map<std::pair<std::size_t, std::size_t>, double> joint;
  for (std::size_t i = 0; i < a.size(); ++i) {
    ca[a[i]] += 1.0;
    cb[b[i]] += 1.0;
    joint[{a[i], b[i]}] += 1.0;
  }
  const double ha = entropy(ca, n), hb = entropy(cb, n);
  if (ca.size() == 1 && cb.size() == 1) return 1.0;
  if (ca.size() == 1 || cb.size() == 1) return 0.0;
  double mi = 0.0;
  for (const auto& [key, c] : joint) {
    mi += c / n * std::log(c * n / (ca[key.first] * cb[key.second]));
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

DisentanglementReport measure_disentanglement(const Model& model, const RewardConfig& reward,
                                              const data::Split& split, const GroundTruth& truth) {
  DisentanglementReport report;
  const std::size_t max_len = model.encoder_config().max_len;
  auto picker = ActionPicker::argmax();
  double total_nmi = 0.0, total_h = 0.0;
  for (const auto& u : split.users) {
    if (u.user >= truth.labels.size()) throw DataError("labels missing for user " + std::to_string(u.user));
    const data::Sample sample = data::test_sample(u, max_len);
    // The history covers positions [full - l, full) of the labelled sequence.
    const std::size_t full = u.train.size() + 1;
    const auto& labels = truth.labels[u.user];
    if (labels.size() < full) throw DataError("labels too short for user " + std::to_string(u.user));
    const std::size_t offset = full - sample.history.size();

    ad::Tape tape(false);
    Rollout rollout = rollout_episode(tape, model, reward, sample.history, sample.user, picker);
    std::vector<std::size_t> assigned(sample.history.size());
    for (std::size_t g = 0; g < rollout.state.groups.size(); ++g) {
      for (std::size_t pos : rollout.state.groups[g]) assigned[pos] = g;
    }
    const double nmi = partition_agreement(
        assigned, std::span<const std::size_t>(labels.data() + offset, sample.history.size()));
    report.per_user_nmi.push_back(nmi);
    total_nmi += nmi;
    total_h += static_cast<double>(rollout.state.h());
  }
  report.users = split.users.size();
  if (report.users > 0) {
    report.mean_nmi = total_nmi / static_cast<double>(report.users);
    report.mean_final_h = total_h / static_cast<double>(report.users);
  }
  return report;
}

}  // namespace adasplit::synth
