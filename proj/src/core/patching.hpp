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
#include <vector>

#include "core/volume.hpp"

namespace fodswin::patching {

struct PatchSpec {
  Dims3 origin{0, 0, 0};
  Dims3 size{1, 1, 1};

  std::size_t voxels() const { return product(size); }
  bool operator==(const PatchSpec&) const = default;
};

/// Throws ArgumentError unless spec lies inside dims.
void check_bounds(const PatchSpec& spec, const Dims3& dims);

/// Voxel-major copy of a sub-block: element (token, channel) lives at
/// token * channels + channel with token = x + sx * (y + sy * z).
template <typename T>
struct PatchTensor {
  Dims3 size{0, 0, 0};
  int channels = 0;
  std::vector<T> data;

  std::size_t tokens() const { return product(size); }
};

/// A voxel counts as tissue when WM + CGM + SGM exceeds this value.
constexpr double kTissueVoxelThreshold = 0.5;

/// Fraction of patch voxels that are tissue voxels.
double tissue_fraction(const TissueFractions& masks, const PatchSpec& spec);

/// Rejection-samples a uniformly distributed in-bounds origin whose tissue
/// fraction reaches min_frac. Throws SamplingError after max_attempts draws.
PatchSpec sample_patch(const TissueFractions& masks, const Dims3& size, double min_frac,
                       std::uint64_t rng_seed, int max_attempts = 1000);

PatchTensor<float> extract(const Volume& vol, const PatchSpec& spec);

/// Writes a patch back into the volume at spec.
void insert(Volume& vol, const PatchSpec& spec, const PatchTensor<float>& patch);

}  // namespace fodswin::patching
