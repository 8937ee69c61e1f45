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

#include "adasplit/dataio.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <numeric>
#include <sstream>
#include <unordered_map>

#include "adasplit/errors.hpp"

namespace adasplit::data {

namespace {

std::vector<std::string_view> split_fields(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    if (pos == std::string_view::npos) {
      out.push_back(line.substr(start));
      break;
    }
    out.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\r' || s.front() == '"')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\r' || s.back() == '"')) s.remove_suffix(1);
  return s;
}

template <typename T>
std::optional<T> parse_int(std::string_view s) {
  T v{};
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

// Days since 1970-01-01 in the proleptic Gregorian calendar.
std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const auto yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

std::optional<InteractionRecord> parse_line(std::string_view line, const LoadOptions& options,
                                            std::size_t line_no) {
  InteractionRecord rec;
  switch (options.format) {
    case InputFormat::kCsvUit:
    case InputFormat::kAmazonRatings: {
      const auto fields = split_fields(line, ',');
      const std::size_t expected = options.format == InputFormat::kCsvUit ? 3 : 4;
      if (fields.size() != expected) return std::nullopt;
      rec.user_id = std::string(trim(fields[0]));
      rec.item_id = std::string(trim(fields[1]));
      auto ts = parse_timestamp(trim(fields[expected - 1]));
      if (!ts) return std::nullopt;
      rec.timestamp = *ts;
      break;
    }
    case InputFormat::kLastfmLog: {
      // user \t timestamp \t artist-id \t artist-name \t track-id \t track-name
      const auto fields = split_fields(line, '\t');
      if (fields.size() != 6) return std::nullopt;
      rec.user_id = std::string(trim(fields[0]));
      auto ts = parse_timestamp(trim(fields[1]));
      if (!ts) return std::nullopt;
      rec.timestamp = *ts;
      const auto artist = trim(fields[3]);
      const auto track = trim(fields[5]);
      if (artist.empty()) return std::nullopt;
      if (options.lastfm_field == LastfmField::kArtist) {
        rec.item_id = std::string(artist);
      } else {
        if (track.empty()) return std::nullopt;
        rec.item_id = std::string(artist) + " - " + std::string(track);
      }
      break;
    }
  }
  (void)line_no;
  if (rec.user_id.empty() || rec.item_id.empty()) return std::nullopt;
  return rec;
}

}  // namespace

InputFormat parse_format(std::string_view name) {
  if (name == "csv-uit") return InputFormat::kCsvUit;
  if (name == "amazon-ratings") return InputFormat::kAmazonRatings;
  if (name == "lastfm-log") return InputFormat::kLastfmLog;
  throw ConfigError("unknown input format '" + std::string(name) +
                    "' (expected csv-uit, amazon-ratings or lastfm-log)");
}

std::string_view format_name(InputFormat format) {
  switch (format) {
    case InputFormat::kCsvUit: return "csv-uit";
    case InputFormat::kAmazonRatings: return "amazon-ratings";
    case InputFormat::kLastfmLog: return "lastfm-log";
  }
  return "unknown";
}

std::optional<std::int64_t> parse_timestamp(std::string_view text) {
  if (text.empty()) return std::nullopt;
  if (auto v = parse_int<std::int64_t>(text)) return v;
  // Fractional epoch seconds appear in some dumps; truncate.
  if (const auto dot = text.find('.'); dot != std::string_view::npos &&
                                       text.find('-') == std::string_view::npos) {
    if (auto v = parse_int<std::int64_t>(text.substr(0, dot))) {
      if (parse_int<std::int64_t>(text.substr(dot + 1)) || dot + 1 == text.size()) return v;
    }
    return std::nullopt;
  }
  if (text.back() == 'Z') text.remove_suffix(1);
  if (text.size() != 19 || text[4] != '-' || text[7] != '-' ||
      (text[10] != 'T' && text[10] != ' ') || text[13] != ':' || text[16] != ':') {
    return std::nullopt;
  }
  auto y = parse_int<int>(text.substr(0, 4));
  auto mo = parse_int<unsigned>(text.substr(5, 2));
  auto d = parse_int<unsigned>(text.substr(8, 2));
  auto h = parse_int<int>(text.substr(11, 2));
  auto mi = parse_int<int>(text.substr(14, 2));
  auto s = parse_int<int>(text.substr(17, 2));
  if (!y || !mo || !d || !h || !mi || !s) return std::nullopt;
  if (*mo < 1 || *mo > 12 || *d < 1 || *d > 31 || *h > 23 || *mi > 59 || *s > 60) {
    return std::nullopt;
  }
  return days_from_civil(*y, *mo, *d) * 86400 + *h * 3600 + *mi * 60 + *s;
}

LoadResult load_interactions(const std::filesystem::path& path, const LoadOptions& options) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  LoadResult result;
  std::string line;
  std::size_t line_no = 0;
  std::size_t content_lines = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = line;
    if (!view.empty() && view.back() == '\r') view.remove_suffix(1);
    if (view.empty()) continue;
    ++content_lines;
    auto rec = parse_line(view, options, line_no);
    if (rec) {
      result.records.push_back(std::move(*rec));
    } else {
      ++result.malformed;
      if (result.malformed_lines.size() < 50) result.malformed_lines.push_back(line_no);
    }
  }
  if (content_lines == 0) {
    result.warnings.push_back("'" + path.string() + "' contains no interactions");
    return result;
  }
  // A single leading header line is tolerated.
  if (result.malformed > 0 && result.malformed_lines.front() == 1) {
    --result.malformed;
    result.malformed_lines.erase(result.malformed_lines.begin());
    result.warnings.push_back("skipped header line 1");
  }
  const double fraction =
      static_cast<double>(result.malformed) / static_cast<double>(content_lines);
  if (fraction > options.max_malformed_fraction) {
    std::ostringstream msg;
    msg << path.string() << ": " << result.malformed << " of " << content_lines
        << " lines malformed (limit " << options.max_malformed_fraction * 100.0
        << "%); lines:";
    for (std::size_t l : result.malformed_lines) msg << ' ' << l;
    throw DataError(msg.str());
  }
  if (result.malformed > 0) {
    result.warnings.push_back(std::to_string(result.malformed) + " malformed lines skipped");
  }
  return result;
}

DatasetStats compute_stats(const std::vector<std::vector<std::size_t>>& sequences,
                           std::size_t num_items) {
  DatasetStats stats;
  stats.users = sequences.size();
  stats.items = num_items;
  for (const auto& s : sequences) stats.interactions += s.size();
  if (stats.users > 0 && stats.items > 0) {
    stats.density_percent = 100.0 * static_cast<double>(stats.interactions) /
                            (static_cast<double>(stats.users) * static_cast<double>(stats.items));
  }
  return stats;
}

SequenceDataset build_dataset(const std::vector<InteractionRecord>& records,
                              const BuildOptions& options) {
  if (options.min_count < 1) throw ConfigError("min_count must be >= 1");
  if (options.max_len && *options.max_len < 3) throw ConfigError("max_len must be >= 3");

  // Group per user in first-seen order; stable sort keeps file order on ties.
  std::unordered_map<std::string, std::size_t> user_slot;
  std::vector<std::string> raw_users;
  std::vector<std::vector<const InteractionRecord*>> per_user;
  for (const auto& r : records) {
    auto [it, inserted] = user_slot.emplace(r.user_id, raw_users.size());
    if (inserted) {
      raw_users.push_back(r.user_id);
      per_user.emplace_back();
    }
    per_user[it->second].push_back(&r);
  }
  for (auto& events : per_user) {
    std::stable_sort(events.begin(), events.end(),
                     [](const auto* a, const auto* b) { return a->timestamp < b->timestamp; });
    if (options.collapse_repeats) {
      auto last = std::unique(events.begin(), events.end(), [](const auto* a, const auto* b) {
        return a->item_id == b->item_id;
      });
      events.erase(last, events.end());
    }
  }

  // Items first, then users, single pass.
  std::unordered_map<std::string, std::size_t> item_count;
  for (const auto& events : per_user) {
    for (const auto* e : events) ++item_count[e->item_id];
  }
  for (auto& events : per_user) {
    std::erase_if(events, [&](const auto* e) { return item_count[e->item_id] < options.min_count; });
  }

  SequenceDataset ds;
  std::unordered_map<std::string, std::size_t> item_index;
  for (std::size_t u = 0; u < per_user.size(); ++u) {
    auto& events = per_user[u];
    if (events.size() < options.min_count || events.empty()) continue;
    if (options.max_len && events.size() > *options.max_len) {
      events.erase(events.begin(),
                   events.begin() + static_cast<std::ptrdiff_t>(events.size() - *options.max_len));
    }
    ds.user_ids.push_back(raw_users[u]);
    auto& seq = ds.sequences.emplace_back();
    auto& ts = ds.timestamps.emplace_back();
    for (const auto* e : events) {
      auto [it, inserted] = item_index.emplace(e->item_id, ds.item_ids.size());
      if (inserted) ds.item_ids.push_back(e->item_id);
      seq.push_back(it->second);
      ts.push_back(e->timestamp);
    }
  }
  if (ds.user_ids.size() < 2) {
    throw DataError("only " + std::to_string(ds.user_ids.size()) +
                    " users survive filtering with min_count=" + std::to_string(options.min_count));
  }
  ds.stats = compute_stats(ds.sequences, ds.item_ids.size());
  return ds;
}

Split leave_one_out_split(const SequenceDataset& dataset) {
  Split split;
  for (std::size_t u = 0; u < dataset.sequences.size(); ++u) {
    const auto& seq = dataset.sequences[u];
    if (seq.size() < 3) {
      ++split.dropped_users;
      continue;
    }
    UserSplit us;
    us.user = u;
    us.train.assign(seq.begin(), seq.end() - 2);
    us.valid_target = seq[seq.size() - 2];
    us.test_target = seq.back();
    split.users.push_back(std::move(us));
  }
  return split;
}

std::vector<std::size_t> recent(std::vector<std::size_t> items, std::size_t max_len) {
  if (max_len > 0 && items.size() > max_len) {
    items.erase(items.begin(), items.begin() + static_cast<std::ptrdiff_t>(items.size() - max_len));
  }
  return items;
}

std::vector<Sample> training_samples(const Split& split, std::size_t max_len) {
  std::vector<Sample> out;
  for (const auto& us : split.users) {
    for (std::size_t t = 1; t < us.train.size(); ++t) {
      Sample s;
      s.user = us.user;
      s.history = recent({us.train.begin(), us.train.begin() + static_cast<std::ptrdiff_t>(t)}, max_len);
      s.target = us.train[t];
      out.push_back(std::move(s));
    }
  }
  return out;
}

Sample validation_sample(const UserSplit& user, std::size_t max_len) {
  return {user.user, recent(user.train, max_len), user.valid_target};
}

Sample test_sample(const UserSplit& user, std::size_t max_len) {
  std::vector<std::size_t> input = user.train;
  input.push_back(user.valid_target);
  return {user.user, recent(std::move(input), max_len), user.test_target};
}

// ---------------------------------------------------------------------------
// Canonical files

CanonicalPaths CanonicalPaths::in_directory(const std::filesystem::path& dir,
                                            std::string_view stem) {
  const std::string s(stem);
  return {dir / (s + ".tsv"), dir / (s + ".idmap.tsv"), dir / (s + ".split.tsv")};
}

namespace {

std::ofstream open_out(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write '" + path.string() + "'");
  return out;
}

std::ifstream open_in(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot read '" + path.string() + "'");
  return in;
}

std::size_t field_index(std::string_view text, const std::string& where) {
  auto v = parse_int<std::size_t>(text);
  if (!v) throw DataError(where + ": bad index '" + std::string(text) + "'");
  return *v;
}

}  // namespace

void write_canonical(const SequenceDataset& dataset, const Split& split,
                     const CanonicalPaths& paths) {
  {
    auto out = open_out(paths.dataset);
    out << "# adasplit-dataset 1 users=" << dataset.stats.users << " items=" << dataset.stats.items
        << " interactions=" << dataset.stats.interactions << '\n';
    out << "user\titem\ttimestamp\n";
    for (std::size_t u = 0; u < dataset.sequences.size(); ++u) {
      for (std::size_t t = 0; t < dataset.sequences[u].size(); ++t) {
        out << u << '\t' << dataset.sequences[u][t] << '\t' << dataset.timestamps[u][t] << '\n';
      }
    }
  }
  {
    auto out = open_out(paths.idmap);
    out << "kind\tdense\traw\n";
    for (std::size_t u = 0; u < dataset.user_ids.size(); ++u) {
      out << "user\t" << u << '\t' << dataset.user_ids[u] << '\n';
    }
    for (std::size_t i = 0; i < dataset.item_ids.size(); ++i) {
      out << "item\t" << i << '\t' << dataset.item_ids[i] << '\n';
    }
  }
  {
    auto out = open_out(paths.split);
    out << "# adasplit-split 1 users=" << split.users.size() << " dropped=" << split.dropped_users
        << '\n';
    out << "user\ttrain\tvalid\ttest\n";
    for (const auto& us : split.users) {
      out << us.user << '\t';
      for (std::size_t i = 0; i < us.train.size(); ++i) out << (i ? "," : "") << us.train[i];
      out << '\t' << us.valid_target << '\t' << us.test_target << '\n';
    }
  }
}

SequenceDataset read_canonical(const CanonicalPaths& paths) {
  SequenceDataset ds;
  {
    auto in = open_in(paths.idmap);
    std::string line;
    std::getline(in, line);
    if (line != "kind\tdense\traw") throw DataError(paths.idmap.string() + ": bad header");
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = split_fields(line, '\t');
      const std::string where = paths.idmap.string() + ":" + std::to_string(line_no);
      if (fields.size() != 3) throw DataError(where + ": expected 3 fields");
      const std::size_t dense = field_index(fields[1], where);
      auto& table = fields[0] == "user" ? ds.user_ids : ds.item_ids;
      if (fields[0] != "user" && fields[0] != "item") throw DataError(where + ": bad kind");
      if (dense != table.size()) throw DataError(where + ": dense ids must be contiguous");
      table.emplace_back(fields[2]);
    }
  }
  ds.sequences.resize(ds.user_ids.size());
  ds.timestamps.resize(ds.user_ids.size());
  {
    auto in = open_in(paths.dataset);
    std::string line;
    std::getline(in, line);
    if (line.rfind("# adasplit-dataset 1", 0) != 0) {
      throw DataError(paths.dataset.string() + ": bad magic");
    }
    std::getline(in, line);
    std::size_t line_no = 2;
    while (std::getline(in, line)) {
      ++line_no;
      if (line.empty()) continue;
      const auto fields = split_fields(line, '\t');
      const std::string where = paths.dataset.string() + ":" + std::to_string(line_no);
      if (fields.size() != 3) throw DataError(where + ": expected 3 fields");
      const std::size_t u = field_index(fields[0], where);
      const std::size_t i = field_index(fields[1], where);
      auto ts = parse_int<std::int64_t>(fields[2]);
      if (u >= ds.user_ids.size() || i >= ds.item_ids.size() || !ts) {
        throw DataError(where + ": id out of range or bad timestamp");
      }
      ds.sequences[u].push_back(i);
      ds.timestamps[u].push_back(*ts);
    }
  }
  ds.stats = compute_stats(ds.sequences, ds.item_ids.size());
  return ds;
}

Split read_split(const std::filesystem::path& path) {
  auto in = open_in(path);
  Split split;
  std::string line;
  std::getline(in, line);
  const auto pos = line.find("dropped=");
  if (line.rfind("# adasplit-split 1", 0) != 0 || pos == std::string::npos) {
    throw DataError(path.string() + ": bad magic");
  }
  split.dropped_users = field_index(std::string_view(line).substr(pos + 8), path.string());
  std::getline(in, line);
  std::size_t line_no = 2;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const std::string where = path.string() + ":" + std::to_string(line_no);
    const auto fields = split_fields(line, '\t');
    if (fields.size() != 4) throw DataError(where + ": expected 4 fields");
    UserSplit us;
    us.user = field_index(fields[0], where);
    if (!fields[1].empty()) {
      for (auto tok : split_fields(fields[1], ',')) us.train.push_back(field_index(tok, where));
    }
    us.valid_target = field_index(fields[2], where);
    us.test_target = field_index(fields[3], where);
    split.users.push_back(std::move(us));
  }
  return split;
}

}  // namespace adasplit::data
