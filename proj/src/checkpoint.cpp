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

#include "adasplit/checkpoint.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

#include "adasplit/errors.hpp"

namespace adasplit::ad {

namespace {

void write_double(std::ostream& out, double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  if (ec != std::errc()) throw NumericError("checkpoint: cannot format value");
  out.write(buf, end - buf);
}

double parse_double(const std::string& token, const std::string& where) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(token.data(), token.data() + token.size(), v);
  if (ec != std::errc() || ptr != token.data() + token.size()) {
    throw DataError("checkpoint: bad value '" + token + "' in " + where);
  }
  return v;
}

}  // namespace

void save_checkpoint(const ParameterStore& store, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("checkpoint: cannot open '" + path.string() + "' for writing");
  out << "adasplit-checkpoint " << kCheckpointVersion << '\n';
  out << "count " << store.size() << '\n';
  for (const Tensor* t : store.all()) {
    out << "param " << t->name() << ' ' << t->shape().rows << ' ' << t->shape().cols << '\n';
    bool first = true;
    for (double v : t->values()) {
      if (!first) out << ' ';
      write_double(out, v);
      first = false;
    }
    out << '\n';
  }
  if (!out) throw DataError("checkpoint: write failed for '" + path.string() + "'");
}

std::vector<NamedMatrix> read_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("checkpoint: cannot open '" + path.string() + "'");
  std::string magic;
  int version = 0;
  in >> magic >> version;
  if (magic != "adasplit-checkpoint") throw DataError("checkpoint: bad magic in '" + path.string() + "'");
  if (version != kCheckpointVersion) {
    throw DataError("checkpoint: unsupported version " + std::to_string(version));
  }
  std::string key;
  std::size_t count = 0;
  in >> key >> count;
  if (key != "count") throw DataError("checkpoint: missing count");
  std::vector<NamedMatrix> out;
  out.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    NamedMatrix m;
    in >> key >> m.name >> m.shape.rows >> m.shape.cols;
    if (!in || key != "param") throw DataError("checkpoint: malformed entry " + std::to_string(i));
    m.values.reserve(m.shape.size());
    std::string token;
    for (std::size_t j = 0; j < m.shape.size(); ++j) {
      if (!(in >> token)) throw DataError("checkpoint: truncated values for " + m.name);
      m.values.push_back(parse_double(token, m.name));
    }
    out.push_back(std::move(m));
  }
  return out;
}

void restore(ParameterStore& store, const std::vector<NamedMatrix>& snap) {
  if (snap.size() != store.size()) {
    throw DataError("checkpoint: expected " + std::to_string(store.size()) +
                    " parameters, found " + std::to_string(snap.size()));
  }
  for (const NamedMatrix& m : snap) {
    Tensor* t = store.find(m.name);
    if (t == nullptr) throw DataError("checkpoint: unknown parameter '" + m.name + "'");
    if (t->shape() != m.shape) {
      throw DataError("checkpoint: shape mismatch for '" + m.name + "': " +
                      m.shape.str() + " vs " + t->shape().str());
    }
    std::copy(m.values.begin(), m.values.end(), t->values().begin());
  }
}

void load_checkpoint(ParameterStore& store, const std::filesystem::path& path) {
  restore(store, read_checkpoint(path));
}

std::vector<NamedMatrix> snapshot(const ParameterStore& store) {
  std::vector<NamedMatrix> out;
  for (const Tensor* t : store.all()) {
    out.push_back({t->name(), t->shape(), {t->values().begin(), t->values().end()}});
  }
  return out;
}

}  // namespace adasplit::ad
