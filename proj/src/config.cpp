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

#include "adasplit/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include "adasplit/errors.hpp"

namespace adasplit {

using nlohmann::json;

namespace {

// Walks one JSON object, remembering which keys were read so leftovers can be
// reported as unknown.
class Section {
 public:
  Section(const json& doc, std::string path) : doc_(doc), path_(std::move(path)) {
    if (!doc_.is_object()) throw ConfigError(where() + " must be an object");
  }

  template <typename T>
  void read(const char* key, T& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    try {
      out = doc_.at(key).get<T>();
    } catch (const json::exception& e) {
      throw ConfigError(qualified(key) + ": " + e.what());
    }
  }

  template <typename T>
  void read_optional(const char* key, std::optional<T>& out) {
    seen_.insert(key);
    if (!doc_.contains(key)) return;
    if (doc_.at(key).is_null()) {
      out.reset();
      return;
    }
    T value{};
    read(key, value);
    out = value;
  }

  std::optional<Section> child(const char* key) {
    seen_.insert(key);
    if (!doc_.contains(key)) return std::nullopt;
    return Section(doc_.at(key), qualified(key));
  }

  void finish() const {
    for (const auto& [key, _] : doc_.items()) {
      if (!seen_.count(key)) throw ConfigError("unknown key '" + qualified(key) + "'");
    }
  }

 private:
  std::string where() const { return path_.empty() ? std::string("config") : path_; }
  std::string qualified(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  const json& doc_;
  std::string path_;
  std::set<std::string> seen_;
};

template <typename Enum, typename Parse>
void read_enum(Section& s, const char* key, Enum& out, Parse parse) {
  std::optional<std::string> name;
  s.read_optional(key, name);
  if (name) out = parse(*name);
}

DataSource parse_source(const std::string& name) {
  if (name == "raw") return DataSource::kRaw;
  if (name == "canonical") return DataSource::kCanonical;
  if (name == "synthetic") return DataSource::kSynthetic;
  throw ConfigError("unknown dataset source '" + name + "' (expected raw, canonical or synthetic)");
}

const char* source_name(DataSource s) {
  switch (s) {
    case DataSource::kRaw: return "raw";
    case DataSource::kCanonical: return "canonical";
    case DataSource::kSynthetic: return "synthetic";
  }
  return "unknown";
}

data::LastfmField parse_field(const std::string& name) {
  if (name == "track") return data::LastfmField::kTrack;
  if (name == "artist") return data::LastfmField::kArtist;
  throw ConfigError("unknown lastfm_field '" + name + "' (expected track or artist)");
}

}  // namespace

void ExperimentConfig::validate() const {
  train.validate();
  switch (dataset.source) {
    case DataSource::kRaw:
      if (dataset.input.empty()) throw ConfigError("dataset.input is required for source raw");
      break;
    case DataSource::kCanonical:
      if (dataset.canonical.empty()) {
        throw ConfigError("dataset.canonical is required for source canonical");
      }
      break;
    case DataSource::kSynthetic:
      dataset.synthetic.validate();
      break;
  }
  if (dataset.build.max_len && *dataset.build.max_len == 0) {
    throw ConfigError("dataset.max_len must be positive");
  }
}

ExperimentConfig config_from_json(const json& doc) {
  ExperimentConfig c;
  Section root(doc, "");
  if (auto s = root.child("dataset")) {
    read_enum(*s, "source", c.dataset.source, parse_source);
    s->read("input", c.dataset.input);
    s->read("canonical", c.dataset.canonical);
    s->read("stem", c.dataset.stem);
    read_enum(*s, "format", c.dataset.format, [](const std::string& n) { return data::parse_format(n); });
    read_enum(*s, "lastfm_field", c.dataset.lastfm_field, parse_field);
    s->read("min_count", c.dataset.build.min_count);
    s->read_optional("max_len", c.dataset.build.max_len);
    s->read("collapse_repeats", c.dataset.build.collapse_repeats);
    if (auto y = s->child("synthetic")) {
      auto& sc = c.dataset.synthetic;
      y->read("num_interests", sc.num_interests);
      y->read("items_per_interest", sc.items_per_interest);
      y->read("users", sc.users);
      y->read("seq_len", sc.seq_len);
      y->read("switch_prob", sc.switch_prob);
      y->read("seed", sc.seed);
      y->finish();
    }
    s->finish();
  }
  auto& t = c.train;
  if (auto s = root.child("train")) {
    s->read("beta", t.beta);
    s->read("lr", t.lr);
    s->read("batch_size", t.batch_size);
    s->read("epochs", t.epochs);
    s->read_optional("neg_sample_size", t.neg_sample_size);
    s->read("clip_norm", t.clip_norm);
    s->read("patience", t.patience);
    s->read("use_rl_loss", t.use_rl_loss);
    s->finish();
  }
  if (auto s = root.child("reward")) {
    s->read("lambda_o", t.reward.lambda_o);
    s->read("lambda_d", t.reward.lambda_d);
    read_enum(*s, "schedule", t.reward.schedule, [](const std::string& n) { return parse_schedule(n); });
    s->read("a1", t.reward.a1);
    s->read("b1", t.reward.b1);
    s->read("initial_lambda", t.reward.initial_lambda);
    s->read("standardize_returns", t.reward.standardize_returns);
    s->finish();
  }
  if (auto s = root.child("encoder")) {
    s->read("dim", t.encoder.dim);
    s->read("num_blocks", t.encoder.num_blocks);
    read_enum(*s, "mode", t.encoder.mode, [](const std::string& n) { return parse_encoder_mode(n); });
    s->read("max_len", t.encoder.max_len);
    s->finish();
  }
  if (auto s = root.child("allocator")) {
    s->read("epsilon", t.allocator.epsilon);
    s->read("h_max", t.allocator.h_max);
    read_enum(*s, "updater", t.allocator.updater, [](const std::string& n) { return parse_updater(n); });
    s->finish();
  }
  if (auto s = root.child("eval")) {
    s->read("exclude_history", c.eval.exclude_history);
    s->finish();
  }
  root.read("output_dir", c.output_dir);
  root.read("seed", t.seed);
  root.finish();
  c.validate();
  return c;
}

json resolved_json(const ExperimentConfig& c) {
  const auto& t = c.train;
  const auto& sc = c.dataset.synthetic;
  json doc;
  doc["dataset"] = {
      {"source", source_name(c.dataset.source)},
      {"input", c.dataset.input},
      {"canonical", c.dataset.canonical},
      {"stem", c.dataset.stem},
      {"format", std::string(data::format_name(c.dataset.format))},
      {"lastfm_field", c.dataset.lastfm_field == data::LastfmField::kTrack ? "track" : "artist"},
      {"min_count", c.dataset.build.min_count},
      {"max_len", c.dataset.build.max_len ? json(*c.dataset.build.max_len) : json(nullptr)},
      {"collapse_repeats", c.dataset.build.collapse_repeats},
      {"synthetic",
       {{"num_interests", sc.num_interests},
        {"items_per_interest", sc.items_per_interest},
        {"users", sc.users},
        {"seq_len", sc.seq_len},
        {"switch_prob", sc.switch_prob},
        {"seed", sc.seed}}},
  };
  doc["train"] = {
      {"beta", t.beta},
      {"lr", t.lr},
      {"batch_size", t.batch_size},
      {"epochs", t.epochs},
      {"neg_sample_size", t.neg_sample_size ? json(*t.neg_sample_size) : json(nullptr)},
      {"clip_norm", t.clip_norm},
      {"patience", t.patience},
      {"use_rl_loss", t.use_rl_loss},
  };
  doc["reward"] = {
      {"lambda_o", t.reward.lambda_o},
      {"lambda_d", t.reward.lambda_d},
      {"schedule", std::string(schedule_name(t.reward.schedule))},
      {"a1", t.reward.a1},
      {"b1", t.reward.b1},
      {"initial_lambda", t.reward.initial_lambda},
      {"standardize_returns", t.reward.standardize_returns},
  };
  doc["encoder"] = {
      {"dim", t.encoder.dim},
      {"num_blocks", t.encoder.num_blocks},
      {"mode", std::string(encoder_mode_name(t.encoder.mode))},
      {"max_len", t.encoder.max_len},
  };
  doc["allocator"] = {
      {"epsilon", t.allocator.epsilon},
      {"h_max", t.allocator.h_max},
      {"updater", std::string(updater_name(t.allocator.updater))},
  };
  doc["eval"] = {{"exclude_history", c.eval.exclude_history}};
  doc["output_dir"] = c.output_dir;
  doc["seed"] = t.seed;
  return doc;
}

void apply_override(json& doc, const std::string& assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not of the form key=value");
  }
  const std::string path = assignment.substr(0, eq);
  const std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &doc;
  std::stringstream parts(path);
  std::string part;
  std::vector<std::string> keys;
  while (std::getline(parts, part, '.')) keys.push_back(part);
  for (std::size_t i = 0; i + 1 < keys.size(); ++i) {
    if (!node->contains(keys[i])) (*node)[keys[i]] = json::object();
    node = &(*node)[keys[i]];
    if (!node->is_object()) throw ConfigError("override '" + path + "': '" + keys[i] + "' is not a section");
  }
  (*node)[keys.back()] = std::move(value);
}

ExperimentConfig load_config(const std::filesystem::path& path,
                             const std::vector<std::string>& overrides) {
  json doc = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot read config " + path.string());
    try {
      doc = json::parse(in, nullptr, true, /*ignore_comments=*/true);
    } catch (const json::parse_error& e) {
      throw ConfigError(path.string() + ": " + e.what());
    }
  }
  for (const auto& o : overrides) apply_override(doc, o);
  return config_from_json(doc);
}

}  // namespace adasplit
