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

#include "core/nifti_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

#include "core/error.hpp"

namespace fodswin::nifti {

namespace {

static_assert(std::endian::native == std::endian::little,
              "NIfTI I/O assumes a little-endian host");

#pragma pack(push, 1)
struct Nifti1Header {
  std::int32_t sizeof_hdr;
  char data_type[10];
  char db_name[18];
  std::int32_t extents;
  std::int16_t session_error;
  char regular;
  char dim_info;
  std::int16_t dim[8];
  float intent_p1;
  float intent_p2;
  float intent_p3;
  std::int16_t intent_code;
  std::int16_t datatype;
  std::int16_t bitpix;
  std::int16_t slice_start;
  float pixdim[8];
  float vox_offset;
  float scl_slope;
  float scl_inter;
  std::int16_t slice_end;
  char slice_code;
  char xyzt_units;
  float cal_max;
  float cal_min;
  float slice_duration;
  float toffset;
  std::int32_t glmax;
  std::int32_t glmin;
  char descrip[80];
  char aux_file[24];
  std::int16_t qform_code;
  std::int16_t sform_code;
  float quatern_b;
  float quatern_c;
  float quatern_d;
  float qoffset_x;
  float qoffset_y;
  float qoffset_z;
  float srow_x[4];
  float srow_y[4];
  float srow_z[4];
  char intent_name[16];
  char magic[4];
};
#pragma pack(pop)

static_assert(sizeof(Nifti1Header) == kHeaderSize, "NIfTI-1 header must be 348 bytes");

constexpr char kMagicSingle[4] = {'n', '+', '1', '\0'};
constexpr char kMagicPair[4] = {'n', 'i', '1', '\0'};

// Reconstructs the voxel->world matrix from the quaternion form.
Affine qform_affine(const Nifti1Header& h) {
  const double b = h.quatern_b, c = h.quatern_c, d = h.quatern_d;
  const double a = std::sqrt(std::max(0.0, 1.0 - (b * b + c * c + d * d)));
  const double qfac = h.pixdim[0] < 0 ? -1.0 : 1.0;
  const double R[3][3] = {{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
                          {2 * (b * c + a * d), a * a + c * c - b * b - d * d, 2 * (c * d - a * b)},
                          {2 * (b * d - a * c), 2 * (c * d + a * b), a * a + d * d - c * c - b * b}};
  const double s[3] = {h.pixdim[1], h.pixdim[2], h.pixdim[3] * qfac};
  Affine m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) m[i][j] = R[i][j] * s[j];
  m[0][3] = h.qoffset_x;
  m[1][3] = h.qoffset_y;
  m[2][3] = h.qoffset_z;
  m[3][3] = 1.0;
  return m;
}

}  // namespace

Volume read(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IOError("cannot open " + path.string());
  Nifti1Header h{};
  in.read(reinterpret_cast<char*>(&h), sizeof h);
  if (in.gcount() != static_cast<std::streamsize>(sizeof h))
    throw IOError("truncated NIfTI header in " + path.string());

  const bool single = std::memcmp(h.magic, kMagicSingle, 4) == 0;
  const bool pair = std::memcmp(h.magic, kMagicPair, 4) == 0;
  if (!single && !pair) throw FormatError("bad NIfTI-1 magic in " + path.string());
  if (h.sizeof_hdr != kHeaderSize) {
    if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(h.sizeof_hdr))) == kHeaderSize)
      throw UnsupportedError("big-endian NIfTI files are not supported: " + path.string());
    throw FormatError("sizeof_hdr is not 348 in " + path.string());
  }
  if (h.datatype != kDatatypeFloat32 || h.bitpix != 32)
    throw UnsupportedError("only float32 NIfTI data is supported (datatype " +
                           std::to_string(h.datatype) + ") in " + path.string());
  if (h.dim[0] != 3 && h.dim[0] != 4)
    throw UnsupportedError("only 3D and 4D volumes are supported (dim[0]=" + std::to_string(h.dim[0]) + ")");

  VolumeHeader vh;
  for (int i = 1; i <= h.dim[0]; ++i) {
    if (h.dim[i] < 1) throw FormatError("non-positive dimension in " + path.string());
    vh.dims.push_back(h.dim[i]);
  }
  for (int i = 0; i < 3; ++i) {
    const float p = std::fabs(h.pixdim[i + 1]);
    vh.voxel_size[i] = p > 0.0f ? p : 1.0;
  }
  if (h.sform_code > 0) {
    const float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) vh.affine[i][j] = rows[i][j];
    vh.affine[3] = {0.0, 0.0, 0.0, 1.0};
  } else if (h.qform_code > 0) {
    vh.affine = qform_affine(h);
  } else {
    vh.affine = identity_affine(vh.voxel_size);
  }
  vh.intent.assign(h.descrip, strnlen(h.descrip, sizeof h.descrip));

  std::vector<float> data(vh.element_count());
  const auto bytes = static_cast<std::streamsize>(data.size() * sizeof(float));
  std::ifstream img_stream;
  std::istream* payload = &in;
  std::streamoff offset = static_cast<std::streamoff>(h.vox_offset);
  if (pair) {
    auto img = path;
    img.replace_extension(".img");
    img_stream.open(img, std::ios::binary);
    if (!img_stream) throw IOError("cannot open paired image file " + img.string());
    payload = &img_stream;
  } else if (offset < kVoxOffset) {
    throw FormatError("vox_offset below 352 in single-file NIfTI " + path.string());
  }
  payload->seekg(offset);
  payload->read(reinterpret_cast<char*>(data.data()), bytes);
  if (payload->gcount() != bytes) throw IOError("truncated NIfTI payload in " + path.string());

  const float slope = h.scl_slope;
  const float inter = h.scl_inter;
  if (slope != 0.0f && std::isfinite(slope) && !(slope == 1.0f && inter == 0.0f)) {
    for (float& v : data) v = slope * v + inter;
  }
  return Volume(std::move(vh), std::move(data));
}

void write(const Volume& volume, const std::filesystem::path& path) {
  const VolumeHeader& vh = volume.header;
  vh.validate();
  if (volume.data.size() != vh.element_count())
    throw ArgumentError("data length does not equal the product of dims");
  for (int d : vh.dims)
    if (d > 32767) throw ArgumentError("NIfTI-1 dimensions are limited to 32767");

  Nifti1Header h{};
  h.sizeof_hdr = kHeaderSize;
  h.regular = 'r';
  h.dim[0] = static_cast<std::int16_t>(vh.dims.size());
  for (std::size_t i = 0; i < 7; ++i) h.dim[i + 1] = i < vh.dims.size() ? static_cast<std::int16_t>(vh.dims[i]) : 1;
  h.datatype = kDatatypeFloat32;
  h.bitpix = 32;
  h.pixdim[0] = 1.0f;
  for (int i = 0; i < 3; ++i) h.pixdim[i + 1] = static_cast<float>(vh.voxel_size[i]);
  for (int i = 4; i < 8; ++i) h.pixdim[i] = 1.0f;
  h.vox_offset = static_cast<float>(kVoxOffset);
  h.scl_slope = 1.0f;
  h.scl_inter = 0.0f;
  h.xyzt_units = 2 | 8;  // mm, seconds
  std::strncpy(h.descrip, vh.intent.c_str(), sizeof h.descrip - 1);
  h.qform_code = 0;
  h.sform_code = 1;
  float* rows[3] = {h.srow_x, h.srow_y, h.srow_z};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 4; ++j) rows[i][j] = static_cast<float>(vh.affine[i][j]);
  std::memcpy(h.magic, kMagicSingle, 4);

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IOError("cannot open " + path.string() + " for writing");
  out.write(reinterpret_cast<const char*>(&h), sizeof h);
  const char extension[4] = {0, 0, 0, 0};
  out.write(extension, 4);
  out.write(reinterpret_cast<const char*>(volume.data.data()),
            static_cast<std::streamsize>(volume.data.size() * sizeof(float)));
  if (!out) throw IOError("failed writing " + path.string());
}

}  // namespace fodswin::nifti
