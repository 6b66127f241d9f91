/*
 * Copyright (c) 2026, The fodswin authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#include "model/config.hpp"

#include <map>
#include <sstream>

#include "core/error.hpp"

namespace fodswin::swin {

void ModelConfig::validate() const {
  const int stages = num_stages();
  if (stages < 1 || stages > 4) throw ConfigError("model needs 1 to 4 stages");
  if (num_heads.size() != depths.size()) throw ConfigError("depths and num_heads must have equal length");
  if (channels < 1) throw ConfigError("channel count must be positive");
  if (embed_dim < 1) throw ConfigError("embed_dim must be positive");
  if (mlp_ratio < 1) throw ConfigError("mlp_ratio must be positive");
  for (int s = 0; s < stages; ++s) {
    if (depths[s] < 1) throw ConfigError("every stage needs at least one block");
    if (num_heads[s] < 1) throw ConfigError("head counts must be positive");
    if (embed_dim % num_heads[s] != 0)
      throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by " +
                        std::to_string(num_heads[s]) + " heads");
  }
  const int factor = 1 << stages;
  for (int a = 0; a < 3; ++a) {
    if (window_size[a] < 1) throw ConfigError("window size must be positive");
    if (patch_size[a] < factor || patch_size[a] % factor != 0)
      throw ConfigError("patch size " + to_string(patch_size) + " must be divisible by " +
                        std::to_string(factor) + " for " + std::to_string(stages) + " stages");
  }
  for (int s = 0; s < stages; ++s) {
    for (int a = 0; a < 3; ++a) {
      const int res = patch_size[a] >> (s + 1);
      const int w = std::min(window_size[a], res);
      if (res % w != 0)
        throw ConfigError("stage " + std::to_string(s) + " grid " + std::to_string(res) +
                          " is not divisible by window " + std::to_string(w) + " (patch " +
                          to_string(patch_size) + ", window " + to_string(window_size) + ")");
    }
  }
}

std::vector<StageGeometry> stage_geometry(const ModelConfig& cfg) {
  cfg.validate();
  std::vector<StageGeometry> out;
  for (int s = 0; s < cfg.num_stages(); ++s) {
    StageGeometry g;
    g.dim = cfg.stage_dim(s);
    g.heads = cfg.num_heads[s];
    g.window_tokens = 1;
    g.num_windows = 1;
    for (int a = 0; a < 3; ++a) {
      g.resolution[a] = cfg.patch_size[a] >> (s + 1);
      g.window[a] = std::min(cfg.window_size[a], g.resolution[a]);
      g.shift[a] = (cfg.shift && g.window[a] < g.resolution[a]) ? g.window[a] / 2 : 0;
      g.window_tokens *= g.window[a];
      g.num_windows *= g.resolution[a] / g.window[a];
    }
    g.tokens = g.window_tokens * g.num_windows;
    out.push_back(g);
  }
  return out;
}

ModelConfig desk_config() { return ModelConfig{}; }

namespace {

std::string join(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      out.push_back(std::stoi(item));
    } catch (const std::exception&) {
      throw FormatError("bad integer list '" + s + "'");
    }
  }
  return out;
}

Dims3 to_dims(const std::vector<int>& v) {
  if (v.size() != 3) throw FormatError("expected three comma-separated integers");
  return {v[0], v[1], v[2]};
}

}  // namespace

std::string to_text(const ModelConfig& cfg) {
  std::ostringstream os;
  os << "patch_size=" << join({cfg.patch_size.begin(), cfg.patch_size.end()}) << "\n"
     << "channels=" << cfg.channels << "\n"
     << "embed_dim=" << cfg.embed_dim << "\n"
     << "window_size=" << join({cfg.window_size.begin(), cfg.window_size.end()}) << "\n"
     << "depths=" << join(cfg.depths) << "\n"
     << "num_heads=" << join(cfg.num_heads) << "\n"
     << "shift=" << (cfg.shift ? 1 : 0) << "\n"
     << "mlp_ratio=" << cfg.mlp_ratio << "\n"
     << "residual=" << (cfg.residual ? 1 : 0) << "\n";
  return os.str();
}

ModelConfig model_config_from_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::stringstream ss(text);
  std::string line;
  while (std::getline(ss, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[line.substr(0, eq)] = line.substr(eq + 1);
  }
  auto get = [&](const char* key) -> const std::string& {
    const auto it = kv.find(key);
    if (it == kv.end()) throw FormatError(std::string("model config is missing key '") + key + "'");
    return it->second;
  };
  ModelConfig cfg;
  cfg.patch_size = to_dims(split_ints(get("patch_size")));
  cfg.channels = split_ints(get("channels")).at(0);
  cfg.embed_dim = split_ints(get("embed_dim")).at(0);
  cfg.window_size = to_dims(split_ints(get("window_size")));
  cfg.depths = split_ints(get("depths"));
  cfg.num_heads = split_ints(get("num_heads"));
  cfg.shift = get("shift") == "1";
  cfg.mlp_ratio = split_ints(get("mlp_ratio")).at(0);
  cfg.residual = get("residual") == "1";
  cfg.validate();
  return cfg;
}

}  // namespace fodswin::swin
