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

#include "core/patching.hpp"

#include <random>

#include "core/error.hpp"

namespace fodswin::patching {

void check_bounds(const PatchSpec& spec, const Dims3& dims) {
  for (int a = 0; a < 3; ++a) {
    if (spec.size[a] < 1) throw ArgumentError("patch size must be positive");
    if (spec.origin[a] < 0 || spec.origin[a] + spec.size[a] > dims[a])
      throw ArgumentError("patch at origin " + to_string(spec.origin) + " size " + to_string(spec.size) +
                          " exceeds volume " + to_string(dims));
  }
}

double tissue_fraction(const TissueFractions& masks, const PatchSpec& spec) {
  masks.validate();
  const Dims3 dims = masks.spatial();
  check_bounds(spec, dims);
  std::size_t tissue = 0;
  for (int z = 0; z < spec.size[2]; ++z)
    for (int y = 0; y < spec.size[1]; ++y)
      for (int x = 0; x < spec.size[0]; ++x) {
        const std::size_t v = masks.wm.index(spec.origin[0] + x, spec.origin[1] + y, spec.origin[2] + z);
        if (masks.total(v) > kTissueVoxelThreshold) ++tissue;
      }
  return static_cast<double>(tissue) / static_cast<double>(spec.voxels());
}

PatchSpec sample_patch(const TissueFractions& masks, const Dims3& size, double min_frac,
                       std::uint64_t rng_seed, int max_attempts) {
  masks.validate();
  const Dims3 dims = masks.spatial();
  if (!(min_frac >= 0.0 && min_frac <= 1.0)) throw ArgumentError("min_frac must lie in [0, 1]");
  if (max_attempts < 1) throw ArgumentError("max_attempts must be positive");
  for (int a = 0; a < 3; ++a)
    if (size[a] < 1 || size[a] > dims[a])
      throw ArgumentError("patch size " + to_string(size) + " does not fit volume " + to_string(dims));

  std::mt19937_64 rng(rng_seed);
  std::array<std::uniform_int_distribution<int>, 3> pick = {
      std::uniform_int_distribution<int>(0, dims[0] - size[0]),
      std::uniform_int_distribution<int>(0, dims[1] - size[1]),
      std::uniform_int_distribution<int>(0, dims[2] - size[2])};
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    PatchSpec spec;
    spec.size = size;
    for (int a = 0; a < 3; ++a) spec.origin[a] = pick[a](rng);
    if (min_frac == 0.0 || tissue_fraction(masks, spec) >= min_frac) return spec;
  }
  throw SamplingError("no patch with tissue fraction >= " + std::to_string(min_frac) + " after " +
                      std::to_string(max_attempts) + " attempts");
}

PatchTensor<float> extract(const Volume& vol, const PatchSpec& spec) {
  check_bounds(spec, vol.spatial());
  PatchTensor<float> p;
  p.size = spec.size;
  p.channels = vol.channels();
  p.data.resize(p.tokens() * static_cast<std::size_t>(p.channels));
  std::size_t t = 0;
  for (int z = 0; z < spec.size[2]; ++z)
    for (int y = 0; y < spec.size[1]; ++y)
      for (int x = 0; x < spec.size[0]; ++x, ++t) {
        const std::size_t v = vol.index(spec.origin[0] + x, spec.origin[1] + y, spec.origin[2] + z);
        for (int c = 0; c < p.channels; ++c) p.data[t * p.channels + c] = vol.at(v, c);
      }
  return p;
}

void insert(Volume& vol, const PatchSpec& spec, const PatchTensor<float>& patch) {
  check_bounds(spec, vol.spatial());
  if (patch.size != spec.size || patch.channels != vol.channels() ||
      patch.data.size() != patch.tokens() * static_cast<std::size_t>(patch.channels))
    throw ArgumentError("patch shape does not match spec and volume channels");
  std::size_t t = 0;
  for (int z = 0; z < spec.size[2]; ++z)
    for (int y = 0; y < spec.size[1]; ++y)
      for (int x = 0; x < spec.size[0]; ++x, ++t) {
        const std::size_t v = vol.index(spec.origin[0] + x, spec.origin[1] + y, spec.origin[2] + z);
        for (int c = 0; c < patch.channels; ++c) vol.at(v, c) = patch.data[t * patch.channels + c];
      }
}

}  // namespace fodswin::patching
