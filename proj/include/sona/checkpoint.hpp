// Copyright 2026 The sonalab Authors.
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

#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "sona/tensor.hpp"

namespace sona {

using ParamRefs = std::vector<std::pair<std::string, Tensor*>>;

/// Parameter snapshot with selection metadata. Values round-trip through
/// JSON bit-exactly (doubles are serialized losslessly).
struct Checkpoint {
  int iteration = 0;
  std::map<std::string, Tensor> params;
  std::vector<double> effective_weights;  // empty for methods without the triplet
  double w2 = 0.0;
};

inline Checkpoint snapshot_params(const ParamRefs& refs, int iteration,
                                  std::vector<double> effective_weights, double w2) {
  Checkpoint c;
  c.iteration = iteration;
  c.effective_weights = std::move(effective_weights);
  c.w2 = w2;
  for (const auto& [name, p] : refs) {
    Tensor copy(p->rows, p->cols, p->values);
    c.params.emplace(name, std::move(copy));
  }
  return c;
}

/// Writes checkpoint values back into live parameters; names and shapes must
/// match exactly.
inline void restore_params(const Checkpoint& c, const ParamRefs& refs) {
  for (const auto& [name, p] : refs) {
    const auto it = c.params.find(name);
    if (it == c.params.end())
      throw ContractError("restore_params: checkpoint is missing parameter " + name);
    if (it->second.rows != p->rows || it->second.cols != p->cols)
      throw ShapeError("restore_params: " + name + " has shape " + it->second.shape_str() +
                       ", expected " + p->shape_str());
    p->values = it->second.values;
  }
}

inline nlohmann::json checkpoint_to_json(const Checkpoint& c, const std::string& config_hash) {
  nlohmann::json params = nlohmann::json::object();
  for (const auto& [name, t] : c.params) {
    params[name] = {{"rows", t.rows}, {"cols", t.cols}, {"values", t.values}};
  }
  return nlohmann::json{{"iteration", c.iteration},
                        {"config_hash", config_hash},
                        {"effective_weights", c.effective_weights},
                        {"w2", c.w2},
                        {"params", std::move(params)}};
}

inline Checkpoint checkpoint_from_json(const nlohmann::json& j, std::string* config_hash = nullptr) {
  Checkpoint c;
  c.iteration = j.at("iteration").get<int>();
  c.effective_weights = j.at("effective_weights").get<std::vector<double>>();
  c.w2 = j.at("w2").get<double>();
  if (config_hash != nullptr) *config_hash = j.at("config_hash").get<std::string>();
  for (const auto& [name, pj] : j.at("params").items()) {
    Tensor t(pj.at("rows").get<int>(), pj.at("cols").get<int>(),
             pj.at("values").get<std::vector<double>>());
    c.params.emplace(name, std::move(t));
  }
  return c;
}

/// Atomic file write: temp file in the same directory, then rename.
inline void write_file_atomic(const std::filesystem::path& path, const std::string& contents) {
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot open " + tmp.string() + " for writing");
    out << contents;
    if (!out.good()) throw Error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

inline nlohmann::json load_json_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path.string());
  return nlohmann::json::parse(in);
}

/// FNV-1a over the canonical (key-sorted) dump; identifies the resolved run
/// configuration in checkpoints and reports.
inline std::string config_hash(const nlohmann::json& j) {
  const std::string s = j.dump();
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace sona
