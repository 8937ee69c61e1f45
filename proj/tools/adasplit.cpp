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

// adasplit: command-line entry points for preprocessing, training,
// evaluation, ablations, grids and the synthetic disentanglement check.

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "adasplit/checkpoint.hpp"
#include "adasplit/config.hpp"
#include "adasplit/errors.hpp"
#include "adasplit/experiment.hpp"
#include "adasplit/rollout.hpp"

namespace {

using namespace adasplit;
using nlohmann::json;

constexpr int kExitOk = 0;
constexpr int kExitOther = 1;
constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCheckFailed = 5;

// Options shared by every command that runs a model.
struct CommonOptions {
  std::string config;
  std::vector<std::string> overrides;
  std::string data;
  std::string out;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;

  void attach(CLI::App* cmd) {
    cmd->add_option("-c,--config", config, "JSON experiment config");
    cmd->add_option("--set", overrides, "Override a config entry, e.g. train.lr=0.01");
    cmd->add_option("--data", data, "Directory with canonical dataset files");
    cmd->add_option("--out", out, "Output root (overrides ADASPLIT_OUTPUT_ROOT)");
    cmd->add_option("--epochs", epochs, "Training epochs");
    cmd->add_option("--seed", seed, "Random seed");
  }

  ExperimentConfig resolve() const {
    std::vector<std::string> all = overrides;
    if (!data.empty()) {
      all.push_back("dataset.source=canonical");
      all.push_back("dataset.canonical=" + json(data).dump());
    }
    if (epochs) all.push_back("train.epochs=" + std::to_string(*epochs));
    if (seed) all.push_back("seed=" + std::to_string(*seed));
    return load_config(config, all);
  }

  std::filesystem::path root(const ExperimentConfig& c) const {
    return out.empty() ? output_root(c) : std::filesystem::path(out);
  }
};

std::vector<std::uint64_t> parse_seeds(const std::string& text, std::uint64_t fallback) {
  std::vector<std::uint64_t> seeds;
  std::stringstream in(text);
  std::string part;
  while (std::getline(in, part, ',')) {
    if (part.empty()) continue;
    try {
      seeds.push_back(std::stoull(part));
    } catch (const std::exception&) {
      throw ConfigError("invalid seed '" + part + "'");
    }
  }
  if (seeds.empty()) seeds.push_back(fallback);
  return seeds;
}

void print_stats(const data::DatasetStats& s, std::size_t dropped) {
  std::cout << "users=" << s.users << " items=" << s.items << " interactions=" << s.interactions
            << " density=" << s.density_percent << "% dropped_users=" << dropped << '\n';
}

int cmd_preprocess(const std::string& input, const std::string& format, const std::string& out,
                   const std::string& stem, std::size_t min_count, std::optional<std::size_t> max_len,
                   bool collapse, const std::string& field) {
  data::LoadOptions load;
  load.format = data::parse_format(format);
  if (field == "artist") {
    load.lastfm_field = data::LastfmField::kArtist;
  } else if (field != "track") {
    throw ConfigError("unknown --lastfm-field '" + field + "'");
  }
  data::LoadResult loaded = data::load_interactions(input, load);
  for (const auto& w : loaded.warnings) std::cerr << "warning: " << w << '\n';
  data::BuildOptions build{.min_count = min_count, .max_len = max_len, .collapse_repeats = collapse};
  data::SequenceDataset ds = data::build_dataset(loaded.records, build);
  data::Split split = data::leave_one_out_split(ds);
  std::filesystem::create_directories(out);
  data::write_canonical(ds, split, data::CanonicalPaths::in_directory(out, stem));
  print_stats(ds.stats, split.dropped_users);
  return kExitOk;
}

int cmd_train(const CommonOptions& opts) {
  ExperimentConfig c = opts.resolve();
  PreparedData data = prepare_data(c.dataset);
  const auto dir = make_run_dir(opts.root(c), "train");
  std::cerr << "run directory: " << dir.string() << '\n';
  RunOutcome r = run_experiment(c, data, dir);
  json out = {{"run_dir", dir.string()},
              {"best_epoch", r.train.best_epoch},
              {"test", report_json(r.test.model)},
              {"popularity_test", report_json(r.test.popularity)}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

void write_trace(const Model& model, const ExperimentConfig& c, const PreparedData& data,
                 Phase phase, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw DataError("cannot write " + path.string());
  auto picker = ActionPicker::argmax();
  for (const auto& u : data.split.users) {
    const auto sample = phase == Phase::kValid ? data::validation_sample(u, c.train.encoder.max_len)
                                               : data::test_sample(u, c.train.encoder.max_len);
    ad::Tape tape(false);
    Rollout r = rollout_episode(tape, model, c.train.reward, sample.history, sample.user, picker);
    for (std::size_t t = 0; t < r.trajectory.size(); ++t) {
      const auto& s = r.trajectory.steps[t];
      out << json{{"user", sample.user}, {"step", t}, {"item", sample.history[t]},
                  {"action", s.action}, {"h", s.h_before}, {"probs", s.probs}}
                 .dump()
          << '\n';
    }
  }
}

int cmd_evaluate(const CommonOptions& opts, const std::string& checkpoint, const std::string& phase_name,
                 const std::string& dump_ranks, const std::string& trace) {
  ExperimentConfig c = opts.resolve();
  if (phase_name != "valid" && phase_name != "test") {
    throw ConfigError("--phase must be valid or test");
  }
  const Phase phase = phase_name == "valid" ? Phase::kValid : Phase::kTest;
  if (!std::filesystem::exists(checkpoint)) throw DataError("checkpoint not found: " + checkpoint);
  PreparedData data = prepare_data(c.dataset);
  Model model({.num_users = data.dataset.num_users(), .num_items = data.dataset.num_items()},
              c.train.encoder, c.train.allocator, c.train.seed);
  ad::load_checkpoint(model.store(), checkpoint);
  Evaluation e = evaluate(model, c.train.reward, data.split, phase, c.eval);
  if (!dump_ranks.empty()) {
    std::ofstream out(dump_ranks);
    if (!out) throw DataError("cannot write " + dump_ranks);
    out << "user\ttarget\trank\tpopularity_rank\ttarget_subseq\tfinal_h\n";
    for (const auto& r : e.ranks) {
      out << r.user << '\t' << r.target << '\t' << r.rank << '\t' << r.popularity_rank << '\t'
          << r.target_subseq << '\t' << r.final_h << '\n';
    }
  }
  if (!trace.empty()) write_trace(model, c, data, phase, trace);
  json out = {{"phase", phase_name},
              {"model", report_json(e.model)},
              {"popularity", report_json(e.popularity)}};
  std::cout << out.dump(2) << '\n';
  return kExitOk;
}

int run_sweep(const CommonOptions& opts, const std::string& command,
              const std::vector<Variant>& variants, const std::string& seeds_text,
              const ExperimentConfig& c) {
  PreparedData data = prepare_data(c.dataset);
  const auto dir = make_run_dir(opts.root(c), command);
  std::cerr << "run directory: " << dir.string() << '\n';
  {
    std::ofstream snap(dir / "config.resolved.json");
    snap << resolved_json(c).dump(2) << '\n';
  }
  auto rows = run_variants(variants, data, parse_seeds(seeds_text, c.train.seed), dir, &std::cerr);
  std::ofstream table(dir / "comparison.tsv");
  write_rows(rows, table);
  write_rows(rows, std::cout);
  return kExitOk;
}

int cmd_synth_check(const CommonOptions& opts) {
  ExperimentConfig c = opts.resolve();
  c.dataset.source = DataSource::kSynthetic;
  SynthCheckResult r = run_synth_check(c, {}, &std::cerr);
  auto line = [](bool ok, const std::string& what) {
    std::cout << (ok ? "PASS " : "FAIL ") << what << '\n';
  };
  std::ostringstream a, b, d;
  a << "mean NMI " << r.configured.mean_nmi << " >= 0.5";
  b << "mean final h " << r.configured.mean_final_h << " in [2, 4]";
  d << "no-penalty mean h " << r.no_penalty.mean_final_h << " > " << r.configured.mean_final_h;
  line(r.nmi_ok, a.str());
  line(r.h_ok, b.str());
  line(r.ordering_ok, d.str());
  return r.passed() ? kExitOk : kExitCheckFailed;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive sub-sequence splitting for sequential recommendation"};
  app.require_subcommand(1);

  auto* pre = app.add_subcommand("preprocess", "Convert an interaction log to canonical files");
  std::string input, format = "amazon-ratings", out_dir, stem = "dataset", field = "track";
  std::size_t min_count = 5;
  std::optional<std::size_t> max_len;
  bool collapse = false;
  pre->add_option("--input", input, "Interaction file")->required();
  pre->add_option("--format", format, "csv-uit, amazon-ratings or lastfm-log");
  pre->add_option("--out", out_dir, "Output directory")->required();
  pre->add_option("--stem", stem, "File name stem");
  pre->add_option("--min-count", min_count, "Minimum interactions per user and item");
  pre->add_option("--max-len", max_len, "Keep only the most recent N items per user");
  pre->add_flag("--collapse-repeats", collapse, "Collapse consecutive repeats");
  pre->add_option("--lastfm-field", field, "track or artist");

  CommonOptions train_opts;
  auto* train_cmd = app.add_subcommand("train", "Train and evaluate on the test split");
  train_opts.attach(train_cmd);

  CommonOptions eval_opts;
  std::string checkpoint, phase = "test", dump_ranks, trace;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint");
  eval_opts.attach(eval_cmd);
  eval_cmd->add_option("--checkpoint", checkpoint, "Checkpoint file")->required();
  eval_cmd->add_option("--phase", phase, "valid or test");
  eval_cmd->add_option("--dump-ranks", dump_ranks, "Write per-user ranks (TSV)");
  eval_cmd->add_option("--trace", trace, "Write per-step allocation records (JSON lines)");

  CommonOptions ablate_opts;
  std::string suite, ablate_seeds;
  auto* ablate_cmd = app.add_subcommand("ablate", "Run an ablation suite");
  ablate_opts.attach(ablate_cmd);
  ablate_cmd->add_option("--suite", suite, "encoder, updater, curriculum or length")->required();
  ablate_cmd->add_option("--seeds", ablate_seeds, "Comma-separated seeds");

  CommonOptions grid_opts;
  std::string param, grid_seeds;
  auto* grid_cmd = app.add_subcommand("grid", "Sweep one hyper-parameter over its range");
  grid_opts.attach(grid_cmd);
  grid_cmd->add_option("--param", param, "epsilon, lr, batch_size, lambda_o, beta or b1")->required();
  grid_cmd->add_option("--seeds", grid_seeds, "Comma-separated seeds");

  CommonOptions synth_opts;
  auto* synth_cmd = app.add_subcommand("synth-check", "Synthetic disentanglement check");
  synth_opts.attach(synth_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitConfig;
  }

  try {
    if (*pre) return cmd_preprocess(input, format, out_dir, stem, min_count, max_len, collapse, field);
    if (*train_cmd) return cmd_train(train_opts);
    if (*eval_cmd) return cmd_evaluate(eval_opts, checkpoint, phase, dump_ranks, trace);
    if (*ablate_cmd) {
      ExperimentConfig c = ablate_opts.resolve();
      return run_sweep(ablate_opts, "ablate-" + suite, ablation_variants(suite, c), ablate_seeds, c);
    }
    if (*grid_cmd) {
      ExperimentConfig c = grid_opts.resolve();
      return run_sweep(grid_opts, "grid-" + param, grid_variants(param, c), grid_seeds, c);
    }
    if (*synth_cmd) return cmd_synth_check(synth_opts);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << '\n';
    return kExitData;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << '\n';
    return kExitNumeric;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitOther;
  }
  return kExitOther;
}
