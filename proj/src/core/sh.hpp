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

#include <Eigen/Core>
#include <optional>
#include <span>
#include <vector>

#include "core/volume.hpp"

namespace fodswin::sh {

constexpr int kLmax = 8;
constexpr int kNumCoeffs = 45;
constexpr double kAccEpsilon = 1e-12;

/// Number of real even-degree coefficients up to lmax: (lmax+1)(lmax+2)/2.
int num_coeffs(int lmax);

/// Inverse of num_coeffs; throws ArgumentError if n is not a valid count.
int lmax_for_count(int n);

struct ShIndex {
  int l = 0;
  int m = 0;
  bool operator==(const ShIndex&) const = default;
};

/// j = l(l+1)/2 + m. Throws ArgumentError for odd l, negative l, l > 8 or |m| > l.
int flat_index(int l, int m);
ShIndex index_to_lm(int j);

struct UnitDirection {
  double x = 0.0;
  double y = 0.0;
  double z = 1.0;

  /// Validates unit norm (tolerance 1e-9).
  static UnitDirection checked(double x, double y, double z);
  static UnitDirection normalized(double x, double y, double z);
  double dot(const UnitDirection& o) const { return x * o.x + y * o.y + z * o.z; }
};

/// Real SH coefficients ordered by flat index.
struct ShCoeffs {
  std::vector<double> c;

  ShCoeffs() : c(kNumCoeffs, 0.0) {}
  explicit ShCoeffs(int lmax) : c(static_cast<std::size_t>(num_coeffs(lmax)), 0.0) {}
  explicit ShCoeffs(std::vector<double> values) : c(std::move(values)) {}

  std::size_t size() const { return c.size(); }
  int lmax() const { return lmax_for_count(static_cast<int>(c.size())); }
  double& operator[](std::size_t j) { return c[j]; }
  double operator[](std::size_t j) const { return c[j]; }
  std::span<const double> values() const { return c; }
};

/// Row i, column j holds Y_j(dirs[i]). Associated Legendre functions without
/// the Condon-Shortley phase; m<0 uses sqrt(2)*sin(|m|phi), m>0 sqrt(2)*cos(m phi).
Eigen::MatrixXd eval_basis(std::span<const UnitDirection> dirs, int lmax = kLmax);

/// Least-squares solver for a fixed sampling scheme. Precomputes the regularized
/// pseudo-inverse, so repeated fits over the same directions are one mat-vec.
class ShFitter {
 public:
  ShFitter(std::span<const UnitDirection> dirs, int lmax = kLmax, double ridge = 0.0);

  ShCoeffs fit(std::span<const double> samples) const;
  const Eigen::MatrixXd& basis() const { return basis_; }
  int lmax() const { return lmax_; }
  std::size_t num_directions() const { return static_cast<std::size_t>(basis_.rows()); }

 private:
  int lmax_;
  Eigen::MatrixXd basis_;
  Eigen::MatrixXd solve_;  // K x N
};

/// Minimizes ||B c - s||^2 + ridge ||c||^2. Rank-deficient systems with
/// ridge == 0 raise NumericalError.
ShCoeffs fit_coeffs(std::span<const double> samples, std::span<const UnitDirection> dirs,
                    double ridge = 0.0, int lmax = kLmax);

/// Synthesizes amplitudes B c.
std::vector<double> synthesize(const ShCoeffs& c, std::span<const UnitDirection> dirs);

double amplitude(const ShCoeffs& c, const UnitDirection& dir);

/// Cosine similarity of the l >= 2 coefficient sub-vectors. Empty when either
/// side has non-DC norm below kAccEpsilon.
std::optional<double> acc_voxel(std::span<const double> u, std::span<const double> v);
inline std::optional<double> acc_voxel(const ShCoeffs& u, const ShCoeffs& v) {
  return acc_voxel(u.values(), v.values());
}

enum class AccState : std::uint8_t { NotSelected = 0, Defined = 1, Undefined = 2 };

/// Per-voxel ACC over a 3D grid. `values` is NaN wherever state != Defined.
struct AccMap {
  Dims3 dims{0, 0, 0};
  std::vector<double> values;
  std::vector<AccState> state;

  std::size_t selected() const;
  std::size_t defined() const;
  std::size_t undefined() const;
};

/// ACC between two coefficient volumes inside mask. Throws ArgumentError on
/// mismatched geometry or channel counts.
AccMap acc_volume(const Volume& a, const Volume& b, const Mask& mask);

/// Spherical sample set with quadrature weights summing to 4*pi.
struct SphereDesign {
  std::vector<UnitDirection> dirs;
  std::vector<double> weights;
};

/// Near-uniform Fibonacci lattice, equal weights.
SphereDesign fibonacci_sphere(int n);

/// Gauss-Legendre in cos(theta) times uniform phi. Integrates spherical
/// polynomials of degree < min(2*n_theta, n_phi) exactly.
SphereDesign gauss_product_sphere(int n_theta, int n_phi);

using Rotation3 = std::array<std::array<double, 3>, 3>;

/// Coefficient-space rotation: M c holds the coefficients of d -> f(R^T d)
/// where c are those of f. Block diagonal per degree and orthogonal. Throws
/// ArgumentError if r is not a proper rotation.
Eigen::MatrixXd rotation_matrix(const Rotation3& r, int lmax = kLmax);

/// Uniformly distributed rotation (normalized Gaussian quaternion).
Rotation3 random_rotation(std::uint64_t seed);

}  // namespace fodswin::sh
