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

#include "adasplit/experiment.hpp"

#include <chrono>
#include <cstdlib>
#include <ctime>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "adasplit/checkpoint.hpp"
#include "adasplit/errors.hpp"

namespace adasplit {

using nlohmann::json;

PreparedData prepare_data(const DatasetSpec& spec) {
  PreparedData out;
  switch (spec.source) {
    case DataSource::kRaw: {
      data::LoadOptions load{.format = spec.format, .lastfm_field = spec.lastfm_field};
      data::LoadResult loaded = data::load_interactions(spec.input, load);
      out.dataset = data::build_dataset(loaded.records, spec.build);
      out.split = data::leave_one_out_split(out.dataset);
      break;
    }
    case DataSource::kCanonical: {
      const auto paths = data::CanonicalPaths::in_directory(spec.canonical, spec.stem);
      out.dataset = data::read_canonical(paths);
      out.split = data::read_split(paths.split);
      break;
    }
    case DataSource::kSynthetic: {
      synth::SyntheticData gen = synth::generate(spec.synthetic);
      out.dataset = std::move(gen.dataset);
      out.truth = std::move(gen.truth);
      out.split = data::leave_one_out_split(out.dataset);
      break;
    }
  }
  if (out.split.users.empty()) throw DataError("no user has the 3 interactions a split needs");
  return out;
}

std::filesystem::path output_root(const ExperimentConfig& config) {
  if (const char* env = std::getenv("ADASPLIT_OUTPUT_ROOT"); env && *env) return env;
  return config.output_dir;
}

std::filesystem::path make_run_dir(const std::filesystem::path& root, const std::string& command) {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  std::ostringstream stamp;
  stamp << std::put_time(&tm, "%Y%m%d-%H%M%S") << '-' << command;
  std::filesystem::path dir = root / stamp.str();
  for (int n = 2; std::filesystem::exists(dir); ++n) {
    dir = root / (stamp.str() + "-" + std::to_string(n));
  }
  std::filesystem::create_directories(dir);
  return dir;
}

json report_json(const MetricReport& r) {
  return {{"ndcg@5", r.ndcg5},   {"mrr@5", r.mrr5},   {"ndcg@10", r.ndcg10},
          {"mrr@10", r.mrr10},   {"users", r.users},  {"mean_final_h", r.mean_final_h}};
}

namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  out << text;
  if (!out) throw DataError("failed writing " + path.string());
}

ModelDims dims_of(const PreparedData& data) {
  return {.num_users = data.dataset.num_users(), .num_items = data.dataset.num_items()};
}

}  // namespace

RunOutcome run_experiment(const ExperimentConfig& config, const PreparedData& data,
                          const std::optional<std::filesystem::path>& run_dir, Model* trained) {
  config.validate();
  const TrainConfig& tc = config.train;
  Model model(dims_of(data), tc.encoder, tc.allocator, tc.seed);
  std::ofstream log, timing;
  TrainHooks hooks;
  if (run_dir) {
    write_text(*run_dir / "config.resolved.json", resolved_json(config).dump(2) + "\n");
    log.open(*run_dir / "train.log", std::ios::binary);
    timing.open(*run_dir / "timing.log");
    hooks.log = &log;
    hooks.timing = &timing;
  }
  RunOutcome out;
  out.train = train(model, data.split, tc, hooks);
  out.test = evaluate(model, tc.reward, data.split, Phase::kTest, config.eval);
  if (run_dir) {
    ad::save_checkpoint(model.store(), *run_dir / "checkpoint.txt");
    json metrics = {{"best_epoch", out.train.best_epoch},
                    {"stopped_early", out.train.stopped_early},
                    {"valid", report_json(out.train.best_valid)},
                    {"test", report_json(out.test.model)},
                    {"popularity_test", report_json(out.test.popularity)}};
    write_text(*run_dir / "metrics.json", metrics.dump(2) + "\n");
  }
  if (trained) *trained = std::move(model);
  return out;
}

std::vector<Variant> ablation_variants(const std::string& suite, const ExperimentConfig& base) {
  std::vector<Variant> out;
  auto add = [&](std::string name, auto&& edit) {
    Variant v{std::move(name), base};
    edit(v.config);
    out.push_back(std::move(v));
  };
  if (suite == "encoder") {
    for (auto mode : {EncoderMode::kBidirectional, EncoderMode::kCausal, EncoderMode::kZero}) {
      add(std::string(encoder_mode_name(mode)), [&](ExperimentConfig& c) { c.train.encoder.mode = mode; });
    }
  } else if (suite == "updater") {
    for (auto kind : {UpdaterKind::kAttentionGru, UpdaterKind::kLstm, UpdaterKind::kAveragePooling}) {
      add(std::string(updater_name(kind)), [&](ExperimentConfig& c) { c.train.allocator.updater = kind; });
    }
  } else if (suite == "curriculum") {
    for (auto s : {PenaltySchedule::kExponential, PenaltySchedule::kLinear, PenaltySchedule::kKeep,
                   PenaltySchedule::kNone}) {
      add(std::string(schedule_name(s)), [&](ExperimentConfig& c) { c.train.reward.schedule = s; });
    }
  } else if (suite == "length") {
    for (std::size_t l : {5, 10, 20, 30, 40}) {
      add("max_len=" + std::to_string(l), [&](ExperimentConfig& c) { c.train.encoder.max_len = l; });
    }
  } else {
    throw ConfigError("unknown ablation suite '" + suite +
                      "' (expected encoder, updater, curriculum or length)");
  }
  return out;
}

std::vector<Variant> grid_variants(const std::string& param, const ExperimentConfig& base) {
  std::vector<Variant> out;
  auto add = [&](double value, auto&& edit) {
    std::ostringstream name;
    name << param << '=' << value;
    Variant v{name.str(), base};
    edit(v.config, value);
    out.push_back(std::move(v));
  };
  if (param == "epsilon") {
    for (double e : {0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8}) {
      add(e, [](ExperimentConfig& c, double v) { c.train.allocator.epsilon = v; });
    }
  } else if (param == "lr") {
    for (double e : {0.01, 0.001, 0.0001}) add(e, [](ExperimentConfig& c, double v) { c.train.lr = v; });
  } else if (param == "batch_size") {
    for (double e : {32, 64, 128, 256}) {
      add(e, [](ExperimentConfig& c, double v) { c.train.batch_size = static_cast<std::size_t>(v); });
    }
  } else if (param == "lambda_o") {
    for (double e : {1.0, 0.1, 0.01, 0.001}) {
      add(e, [](ExperimentConfig& c, double v) { c.train.reward.lambda_o = v; });
    }
  } else if (param == "beta") {
    for (double e : {1.0, 0.1, 0.01, 0.001}) add(e, [](ExperimentConfig& c, double v) { c.train.beta = v; });
  } else if (param == "b1") {
    for (double e : {0.9, 1.0, 1.1, 1.2, 1.3}) {
      add(e, [](ExperimentConfig& c, double v) {
        c.train.reward.b1 = v;
        c.train.reward.initial_lambda = v;
      });
    }
  } else {
    throw ConfigError("unknown grid parameter '" + param +
                      "' (expected epsilon, lr, batch_size, lambda_o, beta or b1)");
  }
  return out;
}

namespace {

void accumulate(MetricReport& into, const MetricReport& r, double w) {
  into.ndcg5 += r.ndcg5 * w;
  into.ndcg10 += r.ndcg10 * w;
  into.mrr5 += r.mrr5 * w;
  into.mrr10 += r.mrr10 * w;
  into.mean_final_h += r.mean_final_h * w;
  into.users = r.users;
}

std::string safe_name(std::string s) {
  for (char& c : s) {
    if (c == '=' || c == '/' || c == ' ') c = '_';
  }
  return s;
}

}  // namespace

std::vector<VariantRow> run_variants(const std::vector<Variant>& variants, const PreparedData& data,
                                     const std::vector<std::uint64_t>& seeds,
                                     const std::optional<std::filesystem::path>& dir,
                                     std::ostream* progress) {
  if (seeds.empty()) throw ConfigError("at least one seed is required");
  std::vector<VariantRow> rows;
  const double w = 1.0 / static_cast<double>(seeds.size());
  for (const auto& v : variants) {
    VariantRow row;
    row.name = v.name;
    row.seeds = seeds.size();
    for (std::uint64_t seed : seeds) {
      ExperimentConfig c = v.config;
      c.train.seed = seed;
      std::optional<std::filesystem::path> run_dir;
      if (dir) {
        run_dir = *dir / (safe_name(v.name) + "-seed" + std::to_string(seed));
        std::filesystem::create_directories(*run_dir);
      }
      RunOutcome r = run_experiment(c, data, run_dir);
      accumulate(row.test, r.test.model, w);
      accumulate(row.popularity, r.test.popularity, w);
      row.best_valid_ndcg10 += r.train.best_valid.ndcg10 * w;
      if (progress) {
        *progress << v.name << " seed=" << seed << " test_ndcg5=" << r.test.model.ndcg5
                  << " test_mrr5=" << r.test.model.mrr5 << '\n' << std::flush;
      }
    }
    rows.push_back(row);
  }
  return rows;
}

void write_rows(const std::vector<VariantRow>& rows, std::ostream& out) {
  out << "variant\tseeds\tndcg@5\tmrr@5\tndcg@10\tmrr@10\tmean_h\tpop_ndcg@5\tpop_mrr@5\tvalid_ndcg@10\n";
  out << std::fixed << std::setprecision(4);
  for (const auto& r : rows) {
    out << r.name << '\t' << r.seeds << '\t' << r.test.ndcg5 << '\t' << r.test.mrr5 << '\t'
        << r.test.ndcg10 << '\t' << r.test.mrr10 << '\t' << r.test.mean_final_h << '\t'
        << r.popularity.ndcg5 << '\t' << r.popularity.mrr5 << '\t' << r.best_valid_ndcg10 << '\n';
  }
}

SynthCheckResult run_synth_check(const ExperimentConfig& config,
                                 const SynthCheckThresholds& thresholds, std::ostream* progress) {
  ExperimentConfig base = config;
  base.dataset.source = DataSource::kSynthetic;
  const PreparedData data = prepare_data(base.dataset);

  auto measure = [&](const ExperimentConfig& c, const char* label) {
    Model model(dims_of(data), c.train.encoder, c.train.allocator, c.train.seed);
    TrainHooks hooks;
    hooks.log = progress;
    train(model, data.split, c.train, hooks);
    auto report = synth::measure_disentanglement(model, c.train.reward, data.split, *data.truth);
    if (progress) {
      *progress << label << ": mean_nmi=" << report.mean_nmi
                << " mean_final_h=" << report.mean_final_h << '\n' << std::flush;
    }
    return report;
  };

  SynthCheckResult out;
  out.configured = measure(base, schedule_name(base.train.reward.schedule).data());
  ExperimentConfig none = base;
  none.train.reward.schedule = PenaltySchedule::kNone;
  out.no_penalty = measure(none, "none");
  out.nmi_ok = out.configured.mean_nmi >= thresholds.min_nmi;
  out.h_ok = out.configured.mean_final_h >= thresholds.min_h &&
             out.configured.mean_final_h <= thresholds.max_h;
  out.ordering_ok = out.no_penalty.mean_final_h > out.configured.mean_final_h;
  return out;
}

}  // namespace adasplit
