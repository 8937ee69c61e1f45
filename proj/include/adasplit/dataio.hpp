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

// Interaction-log ingestion, filtering, leave-one-out splitting and the
// canonical on-disk dataset format.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace adasplit::data {

enum class InputFormat { kCsvUit, kAmazonRatings, kLastfmLog };
enum class LastfmField { kArtist, kTrack };

InputFormat parse_format(std::string_view name);
std::string_view format_name(InputFormat format);

struct InteractionRecord {
  std::string user_id;
  std::string item_id;
  std::int64_t timestamp = 0;
};

struct LoadOptions {
  InputFormat format = InputFormat::kCsvUit;
  LastfmField lastfm_field = LastfmField::kTrack;
  // Loading fails when more than this fraction of lines is malformed.
  double max_malformed_fraction = 0.01;
};

struct LoadResult {
  std::vector<InteractionRecord> records;
  std::size_t malformed = 0;
  std::vector<std::size_t> malformed_lines;  // 1-based, first 50 kept
  std::vector<std::string> warnings;
};

LoadResult load_interactions(const std::filesystem::path& path, const LoadOptions& options);

// Seconds since the Unix epoch for "YYYY-MM-DDTHH:MM:SS[Z]" or a plain integer.
std::optional<std::int64_t> parse_timestamp(std::string_view text);

struct DatasetStats {
  std::size_t users = 0;
  std::size_t items = 0;
  std::size_t interactions = 0;
  double density_percent = 0.0;  // interactions / (users * items) * 100

  bool operator==(const DatasetStats&) const = default;
};

struct SequenceDataset {
  std::vector<std::string> user_ids;  // dense user index -> raw id
  std::vector<std::string> item_ids;  // dense item index -> raw id
  std::vector<std::vector<std::size_t>> sequences;  // chronological per user
  std::vector<std::vector<std::int64_t>> timestamps;
  DatasetStats stats;

  std::size_t num_users() const { return user_ids.size(); }
  std::size_t num_items() const { return item_ids.size(); }
};

struct BuildOptions {
  std::size_t min_count = 5;
  // Keep only the most recent max_len items per user; nullopt keeps all.
  std::optional<std::size_t> max_len;
  // Collapse consecutive repeats of the same item (repeated plays).
  bool collapse_repeats = false;
};

SequenceDataset build_dataset(const std::vector<InteractionRecord>& records,
                              const BuildOptions& options);

DatasetStats compute_stats(const std::vector<std::vector<std::size_t>>& sequences,
                           std::size_t num_items);

struct UserSplit {
  std::size_t user = 0;
  std::vector<std::size_t> train;  // everything before the last two items
  std::size_t valid_target = 0;
  std::size_t test_target = 0;
};

struct Split {
  std::vector<UserSplit> users;
  std::size_t dropped_users = 0;  // sequences shorter than 3
};

Split leave_one_out_split(const SequenceDataset& dataset);

// One next-item prediction example.
struct Sample {
  std::size_t user = 0;
  std::vector<std::size_t> history;
  std::size_t target = 0;
};

// Keeps the most recent max_len entries; max_len == 0 keeps everything.
std::vector<std::size_t> recent(std::vector<std::size_t> items, std::size_t max_len);

// Prefix (a,b,c) expands to (a)->b, (a,b)->c.
std::vector<Sample> training_samples(const Split& split, std::size_t max_len);
Sample validation_sample(const UserSplit& user, std::size_t max_len);
// Input is the training prefix plus the validation item.
Sample test_sample(const UserSplit& user, std::size_t max_len);

// Canonical files: <stem>.tsv (dense triples), <stem>.idmap.tsv (raw ids),
// <stem>.split.tsv (split manifest).
struct CanonicalPaths {
  std::filesystem::path dataset;
  std::filesystem::path idmap;
  std::filesystem::path split;

  static CanonicalPaths in_directory(const std::filesystem::path& dir,
                                     std::string_view stem = "dataset");
};

void write_canonical(const SequenceDataset& dataset, const Split& split,
                     const CanonicalPaths& paths);
SequenceDataset read_canonical(const CanonicalPaths& paths);
Split read_split(const std::filesystem::path& path);

}  // namespace adasplit::data
