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

#pragma once

#include <string>
#include <vector>

#include "core/volume.hpp"

namespace fodswin::swin {

/// Hyperparameters of the windowed-attention encoder-decoder. Stage s works at
/// patch_size / 2^(s+1) tokens per axis with embed_dim * 2^s channels.
struct ModelConfig {
  Dims3 patch_size{16, 16, 16};
  int channels = 45;  // input and output coefficient channels
  int embed_dim = 24;
  Dims3 window_size{4, 4, 4};
  std::vector<int> depths{2, 2};
  std::vector<int> num_heads{3, 6};
  bool shift = true;
  int mlp_ratio = 4;
  /// Predict a correction added to the (normalized) input instead of the
  /// target itself.
  bool residual = false;

  /// Throws ConfigError describing the first violated constraint.
  void validate() const;
  int num_stages() const { return static_cast<int>(depths.size()); }
  int stage_dim(int s) const { return embed_dim << s; }

  bool operator==(const ModelConfig&) const = default;
};

/// Geometry of one encoder stage after clamping the window to the stage grid.
struct StageGeometry {
  Dims3 resolution{};
  int dim = 0;
  int heads = 0;
  Dims3 window{};
  Dims3 shift{};  // used by odd blocks; zero when shifting is disabled or pointless
  int window_tokens = 0;
  int num_windows = 0;
  int tokens = 0;

  bool has_shift() const { return shift[0] || shift[1] || shift[2]; }
};

std::vector<StageGeometry> stage_geometry(const ModelConfig& cfg);

/// Desk-scale default (16^3 patches, embed 24, window 4^3, depths [2,2], heads [3,6]).
ModelConfig desk_config();

/// Serializes to/parses from "key=value" lines (used in checkpoints).
std::string to_text(const ModelConfig& cfg);
ModelConfig model_config_from_text(const std::string& text);

}  // namespace fodswin::swin
