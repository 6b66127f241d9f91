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

#include <array>
#include <cstddef>
#include <memory>
#include <vector>

#include "core/patching.hpp"
#include "core/volume.hpp"
#include "model/checkpoint.hpp"

namespace fodswin::infer {

enum class Blend { Uniform, Cosine };

/// Separable blend weights over a patch, token order x fastest. Uniform is all
/// ones; Cosine is the product of 0.5 - 0.5 cos(2 pi (i + 0.5) / p) per axis,
/// which is strictly positive.
std::vector<double> blend_window(const Dims3& patch, Blend blend);

struct TilePlan {
  Dims3 dims{};
  Dims3 patch{};
  Dims3 stride{};
  std::array<std::vector<int>, 3> origins;  // per axis
  std::vector<patching::PatchSpec> specs;   // x-origin fastest
  std::vector<double> blend;
};

/// Origins 0, s, 2s, ... while they fit, with the last one clamped to dim - patch.
std::vector<int> axis_origins(int dim, int patch, int stride);

/// stride = floor(patch * (1 - overlap)), at least 1. Throws ArgumentError if
/// patch > dims or overlap is outside [0, 1).
TilePlan tile_volume(const Dims3& dims, const Dims3& patch, double overlap, Blend blend = Blend::Uniform);

/// Largest |sum_t w_t(v) / W(v) - 1| over voxels, where W(v) is the total
/// blend weight at v. Throws NumericalError if some voxel has zero weight.
double partition_of_unity_error(const TilePlan& plan);

/// Weighted sum of tile predictions in double precision.
class SlidingWindowAccumulator {
 public:
  SlidingWindowAccumulator(const Dims3& dims, int channels);

  void add(const patching::PatchSpec& spec, const patching::PatchTensor<float>& patch,
           const std::vector<double>& weights);
  double weight(std::size_t voxel) const { return weight_[voxel]; }
  /// Weighted means written to a volume with header; voxels without weight
  /// raise NumericalError.
  Volume finalize(const VolumeHeader& header) const;

 private:
  Dims3 dims_;
  int channels_;
  std::vector<double> sum_;  // channel-major like Volume
  std::vector<double> weight_;
};

/// Wraps a checkpoint's model and normalization for raw-unit patches.
class Predictor {
 public:
  explicit Predictor(const swin::Checkpoint& ckpt);
  ~Predictor();
  Predictor(Predictor&&) noexcept;

  const swin::ModelConfig& config() const;
  patching::PatchTensor<float> predict(const patching::PatchTensor<float>& raw) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

struct InferOptions {
  double overlap = 0.25;
  Blend blend = Blend::Uniform;
  /// Voxels outside the mask keep their input values.
  const Mask* mask = nullptr;
  int threads = 1;
};

struct InferResult {
  Volume output;
  std::size_t forward_passes = 0;
  std::size_t tiles = 0;
};

/// Throws ArgumentError when the input does not match the checkpoint's channel
/// count or is smaller than its patch size.
InferResult super_resolve(const swin::Checkpoint& ckpt, const Volume& input, const InferOptions& options = {});

}  // namespace fodswin::infer
