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

#include "core/sh.hpp"
#include "core/volume.hpp"

namespace fodswin::phantom {

/// One to three fiber populations combined with an axial kernel
/// exp(kappa * ((d . d_i)^2 - 1)).
struct FiberConfig {
  std::vector<sh::UnitDirection> directions;
  std::vector<double> weights;
  double kernel_sharpness = 50.0;

  void validate() const;
};

struct DegradeConfig {
  int truncate_lmax = 4;
  double coeff_noise_sigma = 0.01;
  double amplitude_damping = 0.8;

  void validate() const;
};

struct PhantomOptions {
  double kernel_sharpness = 50.0;
  /// Isotropic amplitude contributed by grey matter (DC only).
  double gm_amplitude = 0.02;
};

enum class Region : std::uint8_t {
  Background = 0,
  SingleFiber = 1,
  TwoCrossing = 2,
  ThreeCrossing = 3,
  CorticalGM = 4,
  SubcorticalGM = 5,
};

struct Phantom {
  Volume target;  // [X,Y,Z,45]
  TissueFractions fractions;
  std::vector<Region> regions;  // dominant compartment per voxel
};

/// Projects a fiber mixture onto the even SH basis (lmax 8) by least squares
/// over a dense product design. The design and its pseudo-inverse are
/// built once and shared.
sh::ShCoeffs make_fiber_fod(const FiberConfig& cfg);

/// Dense design used by make_fiber_fod (Gauss-Legendre x uniform-phi grid).
const sh::SphereDesign& projection_design();

/// Deterministic synthetic brain-like phantom. Throws ArgumentError if any
/// dimension is below 8.
Phantom gen_phantom(const Dims3& dims, std::uint64_t seed, const PhantomOptions& options = {});

/// Coefficient-space degradation: zero degrees above truncate_lmax, damp
/// surviving l >= 2 terms, add Gaussian noise to surviving terms inside tissue.
/// Tissue defaults to voxels whose target coefficients are not all zero.
Volume degrade(const Volume& target, const DegradeConfig& cfg, std::uint64_t seed,
               const Mask* tissue = nullptr);

/// Voxels with at least one non-zero coefficient.
Mask nonzero_mask(const Volume& fod);

}  // namespace fodswin::phantom
