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

#include <filesystem>

#include "core/volume.hpp"

namespace fodswin::nifti {

// Single-file NIfTI-1 (.nii), float32, little-endian. Reading also accepts
// the two-file "ni1" variant by looking for the sibling .img payload.

/// Reads header and payload. Slope/intercept scaling is applied unless it is
/// the identity (slope 0 or 1 with intercept 0), in which case the payload is
/// returned bit-for-bit.
Volume read(const std::filesystem::path& path);

/// Writes a 348-byte header, 4 zero extension bytes and the payload starting
/// at offset 352. The sform carries the affine; scl_slope/scl_inter are 1/0.
void write(const Volume& volume, const std::filesystem::path& path);

constexpr int kHeaderSize = 348;
constexpr int kVoxOffset = 352;
constexpr short kDatatypeFloat32 = 16;

}  // namespace fodswin::nifti
