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

#include "core/volume.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "core/error.hpp"

namespace fodswin {

Affine identity_affine(const std::array<double, 3>& voxel_size) {
  Affine a{};
  for (int i = 0; i < 3; ++i) a[i][i] = voxel_size[i];
  a[3][3] = 1.0;
  return a;
}

void VolumeHeader::validate() const {
  if (dims.size() != 3 && dims.size() != 4)
    throw ArgumentError("volume must have 3 or 4 dimensions, got " + std::to_string(dims.size()));
  for (int d : dims)
    if (d < 1) throw ArgumentError("volume dimensions must be >= 1");
  for (double v : voxel_size)
    if (!(v > 0.0) || !std::isfinite(v)) throw ArgumentError("voxel size entries must be positive");
  if (affine[3][0] != 0.0 || affine[3][1] != 0.0 || affine[3][2] != 0.0 || affine[3][3] != 1.0)
    throw ArgumentError("affine last row must be [0,0,0,1]");
}

std::size_t VolumeHeader::spatial_size() const {
  return static_cast<std::size_t>(dims.at(0)) * dims.at(1) * dims.at(2);
}

std::size_t VolumeHeader::element_count() const {
  return spatial_size() * static_cast<std::size_t>(channels());
}

Volume::Volume(VolumeHeader h, std::vector<float> d) : header(std::move(h)), data(std::move(d)) {
  header.validate();
  if (data.size() != header.element_count())
    throw ArgumentError("volume data length " + std::to_string(data.size()) +
                        " does not match dims product " + std::to_string(header.element_count()));
}

Volume Volume::zeros(const Dims3& dims, int channels, const Affine& affine) {
  VolumeHeader h;
  h.dims = {dims[0], dims[1], dims[2]};
  if (channels != 1) h.dims.push_back(channels);
  h.affine = affine;
  for (int i = 0; i < 3; ++i) {
    const double n = std::sqrt(affine[0][i] * affine[0][i] + affine[1][i] * affine[1][i] +
                               affine[2][i] * affine[2][i]);
    h.voxel_size[i] = n > 0.0 ? n : 1.0;
  }
  std::vector<float> d(h.element_count(), 0.0f);
  return Volume(std::move(h), std::move(d));
}

std::vector<double> Volume::voxel_values(std::size_t voxel) const {
  const int c = channels();
  std::vector<double> out(static_cast<std::size_t>(c));
  for (int k = 0; k < c; ++k) out[k] = at(voxel, k);
  return out;
}

void Volume::set_voxel_values(std::size_t voxel, const std::vector<double>& values) {
  const int c = channels();
  if (values.size() != static_cast<std::size_t>(c)) throw ArgumentError("channel count mismatch");
  for (int k = 0; k < c; ++k) at(voxel, k) = static_cast<float>(values[k]);
}

void TissueFractions::validate() const {
  for (const Volume* v : {&wm, &cgm, &sgm}) {
    if (v->header.dims.size() != 3 && v->channels() != 1)
      throw ArgumentError("tissue fraction maps must be 3D");
    if (v->spatial() != wm.spatial())
      throw ArgumentError("tissue fraction maps must share dimensions");
  }
}

Mask Mask::filled(const Dims3& dims, bool value) {
  Mask m;
  m.dims = dims;
  m.values.assign(product(dims), value ? 1 : 0);
  return m;
}

std::size_t Mask::count() const {
  return static_cast<std::size_t>(std::count(values.begin(), values.end(), std::uint8_t{1}));
}

std::size_t product(const Dims3& d) {
  return static_cast<std::size_t>(d[0]) * static_cast<std::size_t>(d[1]) * static_cast<std::size_t>(d[2]);
}

std::string to_string(const Dims3& d) {
  std::ostringstream os;
  os << d[0] << "x" << d[1] << "x" << d[2];
  return os.str();
}

}  // namespace fodswin
