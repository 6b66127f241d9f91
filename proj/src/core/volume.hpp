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
#include <cstdint>
#include <string>
#include <vector>

namespace fodswin {

using Dims3 = std::array<int, 3>;
using Affine = std::array<std::array<double, 4>, 4>;

Affine identity_affine(const std::array<double, 3>& voxel_size = {1.0, 1.0, 1.0});

/// Geometry of a 3D or 4D volume. The fourth dimension, when present, holds
/// channels (45 SH coefficients for FOD volumes).
struct VolumeHeader {
  std::vector<int> dims;  // 3 or 4 entries, x first
  std::array<double, 3> voxel_size{1.0, 1.0, 1.0};
  Affine affine = identity_affine();
  std::string intent;

  /// Throws ArgumentError when dims, voxel size or affine break the invariants.
  void validate() const;

  Dims3 spatial() const { return {dims.at(0), dims.at(1), dims.at(2)}; }
  int channels() const { return dims.size() == 4 ? dims[3] : 1; }
  std::size_t spatial_size() const;
  std::size_t element_count() const;

  bool operator==(const VolumeHeader&) const = default;
};

/// Dense float32 volume stored in NIfTI order: x fastest, channel slowest.
struct Volume {
  VolumeHeader header;
  std::vector<float> data;

  Volume() = default;
  Volume(VolumeHeader h, std::vector<float> d);
  /// Zero-filled volume; channels == 1 gives a 3D volume.
  static Volume zeros(const Dims3& dims, int channels, const Affine& affine = identity_affine());

  Dims3 spatial() const { return header.spatial(); }
  int channels() const { return header.channels(); }
  std::size_t voxels() const { return header.spatial_size(); }

  std::size_t index(int x, int y, int z) const {
    const auto& d = header.dims;
    return static_cast<std::size_t>(x) +
           static_cast<std::size_t>(d[0]) * (static_cast<std::size_t>(y) +
                                             static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(z));
  }
  float& at(std::size_t voxel, int c) { return data[voxel + voxels() * static_cast<std::size_t>(c)]; }
  float at(std::size_t voxel, int c) const { return data[voxel + voxels() * static_cast<std::size_t>(c)]; }
  float& at(int x, int y, int z, int c = 0) { return at(index(x, y, z), c); }
  float at(int x, int y, int z, int c = 0) const { return at(index(x, y, z), c); }

  /// All channels of one voxel, widened to double.
  std::vector<double> voxel_values(std::size_t voxel) const;
  void set_voxel_values(std::size_t voxel, const std::vector<double>& values);
};

/// Per-voxel WM, cortical GM and subcortical GM fractions, each 3D.
struct TissueFractions {
  Volume wm;
  Volume cgm;
  Volume sgm;

  Dims3 spatial() const { return wm.spatial(); }
  /// Throws ArgumentError unless the three maps are 3D and co-registered.
  void validate() const;
  double total(std::size_t voxel) const {
    return static_cast<double>(wm.data[voxel]) + cgm.data[voxel] + sgm.data[voxel];
  }
};

/// Boolean voxel selection over a 3D grid.
struct Mask {
  Dims3 dims{0, 0, 0};
  std::vector<std::uint8_t> values;

  static Mask filled(const Dims3& dims, bool value);
  std::size_t size() const { return values.size(); }
  std::size_t count() const;
  bool operator[](std::size_t i) const { return values[i] != 0; }
};

std::size_t product(const Dims3& d);
std::string to_string(const Dims3& d);

}  // namespace fodswin
