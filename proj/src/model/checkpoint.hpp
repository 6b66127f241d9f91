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

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "model/config.hpp"

namespace fodswin::swin {

/// Per-channel affine maps applied around the network:
/// x_net = (x - in_shift) / in_scale and y = y_net * out_scale + out_shift.
struct Normalization {
  std::vector<double> in_shift;
  std::vector<double> in_scale;
  std::vector<double> out_shift;
  std::vector<double> out_scale;

  static Normalization identity(int channels);
  void validate(int channels) const;
  bool operator==(const Normalization&) const = default;
};

/// Container layout (all integers and floats little-endian):
///
///   "FODSWIN\0"            8-byte magic
///   u32 version            kCheckpointVersion
///   u32 n, n bytes         config block, "key=value" lines (model config
///                          followed by "meta.<key>" entries)
///   u64 seed, u32 epoch
///   u32 tensor count, then per tensor:
///     u32 name length, name bytes, u32 rank, rank x u32 dims, f64 values
///
/// Model parameters are stored under their layout names, normalization under
/// "norm.in_shift", "norm.in_scale", "norm.out_shift" and "norm.out_scale".
struct Checkpoint {
  ModelConfig model;
  Normalization norm;
  std::vector<double> params;  // flat, ordered by model_layout(model)
  std::map<std::string, std::string> metadata;
  std::uint64_t seed = 0;
  std::uint32_t epoch = 0;
};

constexpr std::uint32_t kCheckpointVersion = 1;

/// Writes to a temporary sibling file and renames it over path.
void save_checkpoint(const Checkpoint& ckpt, const std::filesystem::path& path);

/// Throws FormatError for bad magic, unknown version, missing or misshapen
/// tensors; IOError when the file cannot be read or is truncated.
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// Residual model with a zero head and identity normalization: its forward
/// pass copies the input exactly.
Checkpoint identity_checkpoint(const ModelConfig& cfg, std::uint64_t seed = 0);

}  // namespace fodswin::swin
