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

#include "core/sh.hpp"

#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <random>
#include <limits>
#include <numbers>

#include "core/error.hpp"

namespace fodswin::sh {

int num_coeffs(int lmax) {
  if (lmax < 0 || lmax % 2 != 0 || lmax > kLmax)
    throw ArgumentError("lmax must be an even degree in [0, 8], got " + std::to_string(lmax));
  return (lmax + 1) * (lmax + 2) / 2;
}

int lmax_for_count(int n) {
  for (int l = 0; l <= kLmax; l += 2)
    if (num_coeffs(l) == n) return l;
  throw ArgumentError("no even lmax <= 8 has " + std::to_string(n) + " coefficients");
}

int flat_index(int l, int m) {
  if (l < 0 || l % 2 != 0 || l > kLmax) throw ArgumentError("SH degree must be even in [0, 8]");
  if (m < -l || m > l) throw ArgumentError("SH order must satisfy |m| <= l");
  return l * (l + 1) / 2 + m;
}

ShIndex index_to_lm(int j) {
  if (j < 0 || j >= kNumCoeffs) throw ArgumentError("flat SH index out of range");
  int l = 0;
  while ((l + 2) * (l + 3) / 2 - (l + 2) <= j) l += 2;
  return {l, j - l * (l + 1) / 2};
}

UnitDirection UnitDirection::checked(double x, double y, double z) {
  const double n2 = x * x + y * y + z * z;
  if (!std::isfinite(n2) || std::fabs(n2 - 1.0) > 1e-9)
    throw ArgumentError("direction is not unit norm");
  return {x, y, z};
}

UnitDirection UnitDirection::normalized(double x, double y, double z) {
  const double n = std::sqrt(x * x + y * y + z * z);
  if (!(n > 0.0)) throw ArgumentError("cannot normalize a zero vector");
  return {x / n, y / n, z / n};
}

namespace {

void basis_row(const UnitDirection& d, int lmax, double* out) {
  const double n2 = d.x * d.x + d.y * d.y + d.z * d.z;
  if (!std::isfinite(n2) || std::fabs(n2 - 1.0) > 1e-9)
    throw ArgumentError("basis evaluation requires unit directions");
  const double theta = std::acos(std::clamp(d.z, -1.0, 1.0));
  const double phi = std::atan2(d.y, d.x);
  for (int l = 0; l <= lmax; l += 2) {
    const int centre = l * (l + 1) / 2;
    // std::sph_legendre includes the Condon-Shortley phase; undo it.
    out[centre] = std::sph_legendre(l, 0, theta);
    for (int m = 1; m <= l; ++m) {
      const double p = (m % 2 ? -1.0 : 1.0) * std::sph_legendre(l, m, theta) * std::numbers::sqrt2;
      out[centre + m] = p * std::cos(m * phi);
      out[centre - m] = p * std::sin(m * phi);
    }
  }
}

}  // namespace

Eigen::MatrixXd eval_basis(std::span<const UnitDirection> dirs, int lmax) {
  const int k = num_coeffs(lmax);
  if (dirs.empty()) throw ArgumentError("eval_basis needs at least one direction");
  Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> b(dirs.size(), k);
  for (std::size_t i = 0; i < dirs.size(); ++i) basis_row(dirs[i], lmax, b.row(i).data());
  return b;
}

ShFitter::ShFitter(std::span<const UnitDirection> dirs, int lmax, double ridge)
    : lmax_(lmax), basis_(eval_basis(dirs, lmax)) {
  const int k = num_coeffs(lmax);
  if (!(ridge >= 0.0) || !std::isfinite(ridge)) throw ArgumentError("ridge must be non-negative");
  if (ridge == 0.0 && static_cast<int>(dirs.size()) < k)
    throw NumericalError("unregularized SH fit needs at least " + std::to_string(k) +
                         " directions, got " + std::to_string(dirs.size()));
  Eigen::BDCSVD<Eigen::MatrixXd> svd(basis_, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  if (ridge == 0.0) {
    const double cond_limit = 1e-10 * s(0);
    if (s(s.size() - 1) <= cond_limit)
      throw NumericalError("SH basis matrix is rank deficient for the given directions");
  }
  Eigen::VectorXd inv(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) inv(i) = s(i) / (s(i) * s(i) + ridge);
  solve_ = svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

ShCoeffs ShFitter::fit(std::span<const double> samples) const {
  if (samples.size() != num_directions())
    throw ArgumentError("sample count does not match direction count");
  Eigen::Map<const Eigen::VectorXd> s(samples.data(), static_cast<Eigen::Index>(samples.size()));
  Eigen::VectorXd c = solve_ * s;
  return ShCoeffs(std::vector<double>(c.data(), c.data() + c.size()));
}

ShCoeffs fit_coeffs(std::span<const double> samples, std::span<const UnitDirection> dirs,
                    double ridge, int lmax) {
  if (samples.size() != dirs.size()) throw ArgumentError("sample count does not match direction count");
  return ShFitter(dirs, lmax, ridge).fit(samples);
}

std::vector<double> synthesize(const ShCoeffs& c, std::span<const UnitDirection> dirs) {
  const Eigen::MatrixXd b = eval_basis(dirs, c.lmax());
  Eigen::Map<const Eigen::VectorXd> cv(c.c.data(), static_cast<Eigen::Index>(c.size()));
  Eigen::VectorXd s = b * cv;
  return {s.data(), s.data() + s.size()};
}

double amplitude(const ShCoeffs& c, const UnitDirection& dir) {
  const int lmax = c.lmax();
  std::vector<double> row(c.size());
  basis_row(dir, lmax, row.data());
  double sum = 0.0;
  for (std::size_t j = 0; j < row.size(); ++j) sum += c[j] * row[j];
  return sum;
}

std::optional<double> acc_voxel(std::span<const double> u, std::span<const double> v) {
  if (u.size() != v.size()) throw ArgumentError("ACC operands must have equal length");
  lmax_for_count(static_cast<int>(u.size()));
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t j = 1; j < u.size(); ++j) {
    uv += u[j] * v[j];
    uu += u[j] * u[j];
    vv += v[j] * v[j];
  }
  const double nu = std::sqrt(uu), nv = std::sqrt(vv);
  if (nu < kAccEpsilon || nv < kAccEpsilon) return std::nullopt;
  return std::clamp(uv / (nu * nv), -1.0, 1.0);
}

std::size_t AccMap::selected() const {
  return static_cast<std::size_t>(std::count_if(state.begin(), state.end(),
                                                [](AccState s) { return s != AccState::NotSelected; }));
}

std::size_t AccMap::defined() const {
  return static_cast<std::size_t>(std::count(state.begin(), state.end(), AccState::Defined));
}

std::size_t AccMap::undefined() const {
  return static_cast<std::size_t>(std::count(state.begin(), state.end(), AccState::Undefined));
}

AccMap acc_volume(const Volume& a, const Volume& b, const Mask& mask) {
  if (a.spatial() != b.spatial() || a.spatial() != mask.dims)
    throw ArgumentError("acc_volume: volumes and mask must share spatial dims");
  if (a.channels() != b.channels()) throw ArgumentError("acc_volume: channel counts differ");
  lmax_for_count(a.channels());
  AccMap map;
  map.dims = mask.dims;
  const std::size_t n = a.voxels();
  map.values.assign(n, std::numeric_limits<double>::quiet_NaN());
  map.state.assign(n, AccState::NotSelected);
  const int k = a.channels();
  std::vector<double> u(static_cast<std::size_t>(k)), v(static_cast<std::size_t>(k));
  for (std::size_t i = 0; i < n; ++i) {
    if (!mask[i]) continue;
    for (int c = 0; c < k; ++c) {
      u[c] = a.at(i, c);
      v[c] = b.at(i, c);
    }
    if (const auto acc = acc_voxel(u, v)) {
      map.values[i] = *acc;
      map.state[i] = AccState::Defined;
    } else {
      map.state[i] = AccState::Undefined;
    }
  }
  return map;
}

SphereDesign fibonacci_sphere(int n) {
  if (n < 1) throw ArgumentError("sphere design needs at least one point");
  SphereDesign d;
  d.dirs.reserve(n);
  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int i = 0; i < n; ++i) {
    const double z = 1.0 - 2.0 * (i + 0.5) / n;
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    const double phi = golden * i;
    d.dirs.push_back(UnitDirection::normalized(r * std::cos(phi), r * std::sin(phi), z));
  }
  d.weights.assign(static_cast<std::size_t>(n), 4.0 * std::numbers::pi / n);
  return d;
}

SphereDesign gauss_product_sphere(int n_theta, int n_phi) {
  if (n_theta < 1 || n_phi < 1) throw ArgumentError("sphere design needs positive grid sizes");
  // Legendre roots by Newton iteration from the Chebyshev-like initial guess.
  std::vector<double> nodes(n_theta), weights(n_theta);
  for (int i = 0; i < n_theta; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n_theta + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n_theta; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      dp = n_theta * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::fabs(dx) < 1e-16) break;
    }
    nodes[i] = x;
    weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
  }
  SphereDesign d;
  d.dirs.reserve(static_cast<std::size_t>(n_theta) * n_phi);
  for (int i = 0; i < n_theta; ++i) {
    const double z = nodes[i];
    const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
    for (int j = 0; j < n_phi; ++j) {
      const double phi = 2.0 * std::numbers::pi * (j + 0.5) / n_phi;
      d.dirs.push_back(UnitDirection::normalized(r * std::cos(phi), r * std::sin(phi), z));
      d.weights.push_back(weights[i] * 2.0 * std::numbers::pi / n_phi);
    }
  }
  return d;
}

Eigen::MatrixXd rotation_matrix(const Rotation3& r, int lmax) {
  double det = 0.0, ortho = 0.0;
  for (int i = 0; i < 3; ++i) {
    det += r[0][i] * (r[1][(i + 1) % 3] * r[2][(i + 2) % 3] - r[1][(i + 2) % 3] * r[2][(i + 1) % 3]);
    for (int j = 0; j < 3; ++j) {
      double d = 0.0;
      for (int k = 0; k < 3; ++k) d += r[k][i] * r[k][j];
      ortho = std::max(ortho, std::fabs(d - (i == j ? 1.0 : 0.0)));
    }
  }
  if (!(ortho < 1e-9) || !(std::fabs(det - 1.0) < 1e-9)) throw ArgumentError("rotation_matrix needs a proper rotation");

  // Products of two degree-lmax terms are exact on this grid.
  const SphereDesign grid = gauss_product_sphere(lmax + 1, 2 * lmax + 2);
  std::vector<UnitDirection> back;
  back.reserve(grid.dirs.size());
  for (const auto& d : grid.dirs)
    back.push_back(UnitDirection::normalized(r[0][0] * d.x + r[1][0] * d.y + r[2][0] * d.z,
                                             r[0][1] * d.x + r[1][1] * d.y + r[2][1] * d.z,
                                             r[0][2] * d.x + r[1][2] * d.y + r[2][2] * d.z));
  const Eigen::MatrixXd b = eval_basis(grid.dirs, lmax);
  const Eigen::MatrixXd b_back = eval_basis(back, lmax);
  const Eigen::Map<const Eigen::VectorXd> w(grid.weights.data(), static_cast<Eigen::Index>(grid.weights.size()));
  Eigen::MatrixXd m = b.transpose() * w.asDiagonal() * b_back;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j)
      if (index_to_lm(i).l != index_to_lm(j).l) m(i, j) = 0.0;
  return m;
}

Rotation3 random_rotation(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  double q[4];
  double norm = 0.0;
  do {
    norm = 0.0;
    for (double& v : q) {
      v = n(rng);
      norm += v * v;
    }
  } while (norm < 1e-12);
  norm = std::sqrt(norm);
  const double a = q[0] / norm, b = q[1] / norm, c = q[2] / norm, d = q[3] / norm;
  return {{{a * a + b * b - c * c - d * d, 2 * (b * c - a * d), 2 * (b * d + a * c)},
           {2 * (b * c + a * d), a * a - b * b + c * c - d * d, 2 * (c * d - a * b)},
           {2 * (b * d - a * c), 2 * (c * d + a * b), a * a - b * b - c * c + d * d}}};
}

}  // namespace fodswin::sh
