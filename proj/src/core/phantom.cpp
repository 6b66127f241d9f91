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

#include "core/phantom.hpp"

#include <Eigen/Core>
#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "core/error.hpp"
#include "core/rng.hpp"

namespace fodswin::phantom {

namespace {

// Gauss-Legendre x uniform-phi grid; n_phi divisible by 4 keeps the design
// closed under quarter turns about z.
constexpr int kProjectionTheta = 40;
constexpr int kProjectionPhi = 64;

using Vec3 = std::array<double, 3>;
using Mat3 = std::array<Vec3, 3>;

Vec3 apply(const Mat3& r, const Vec3& v) {
  return {r[0][0] * v[0] + r[0][1] * v[1] + r[0][2] * v[2],
          r[1][0] * v[0] + r[1][1] * v[1] + r[1][2] * v[2],
          r[2][0] * v[0] + r[2][1] * v[1] + r[2][2] * v[2]};
}

Mat3 mul(const Mat3& a, const Mat3& b) {
  Mat3 m{};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      for (int k = 0; k < 3; ++k) m[i][j] += a[i][k] * b[k][j];
  return m;
}

Mat3 rot_z(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, -s, 0.0}, {s, c, 0.0}, {0.0, 0.0, 1.0}}};
}

Mat3 rot_y(double a) {
  const double c = std::cos(a), s = std::sin(a);
  return {{{c, 0.0, s}, {0.0, 1.0, 0.0}, {-s, 0.0, c}}};
}

Mat3 random_rotation(std::mt19937_64& rng) {
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

Vec3 random_unit(std::mt19937_64& rng) {
  const Mat3 r = random_rotation(rng);
  return {r[0][2], r[1][2], r[2][2]};
}

sh::UnitDirection to_dir(const Vec3& v) { return sh::UnitDirection::normalized(v[0], v[1], v[2]); }

double dot3(const Vec3& a, const Vec3& b) { return a[0] * b[0] + a[1] * b[1] + a[2] * b[2]; }

double ramp(double t, double width) { return std::clamp(0.5 + t / width, 0.0, 1.0); }

// Smoothly rotating local frame: fixed base rotation, then in-plane and
// elevation angles that vary linearly along two random axes.
struct FrameField {
  Mat3 base{};
  Vec3 axis_a{};
  Vec3 axis_b{};
  double phase = 0.0;
  double rate_a = 1.2;
  double rate_b = 0.6;

  static FrameField random(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    FrameField f;
    f.base = random_rotation(rng);
    f.axis_a = random_unit(rng);
    f.axis_b = random_unit(rng);
    f.phase = 2.0 * std::numbers::pi * u(rng);
    f.rate_a = 0.9 + 0.6 * u(rng);
    f.rate_b = 0.4 + 0.4 * u(rng);
    return f;
  }

  Mat3 at(const Vec3& p) const {
    const double phi = phase + rate_a * dot3(p, axis_a);
    const double psi = rate_b * dot3(p, axis_b);
    return mul(base, mul(rot_z(phi), rot_y(psi)));
  }
};

const sh::ShFitter& projection_fitter() {
  static const sh::ShFitter fitter(projection_design().dirs, sh::kLmax, 0.0);
  return fitter;
}

}  // namespace

void FiberConfig::validate() const {
  if (directions.empty() || directions.size() > 3)
    throw ArgumentError("fiber config needs 1 to 3 directions");
  if (weights.size() != directions.size())
    throw ArgumentError("fiber config needs one weight per direction");
  double sum = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw ArgumentError("fiber weights must be positive");
    sum += w;
  }
  if (sum > 1.0 + 1e-12) throw ArgumentError("fiber weights must sum to at most 1");
  for (const auto& d : directions) sh::UnitDirection::checked(d.x, d.y, d.z);
  if (!(kernel_sharpness > 0.0)) throw ArgumentError("kernel sharpness must be positive");
}

void DegradeConfig::validate() const {
  if (truncate_lmax < 2 || truncate_lmax > sh::kLmax || truncate_lmax % 2 != 0)
    throw ArgumentError("truncate_lmax must be one of 2, 4, 6, 8");
  if (!(coeff_noise_sigma >= 0.0)) throw ArgumentError("noise sigma must be non-negative");
  if (!(amplitude_damping > 0.0 && amplitude_damping <= 1.0))
    throw ArgumentError("amplitude damping must lie in (0, 1]");
}

const sh::SphereDesign& projection_design() {
  static const sh::SphereDesign design = sh::gauss_product_sphere(kProjectionTheta, kProjectionPhi);
  return design;
}

sh::ShCoeffs make_fiber_fod(const FiberConfig& cfg) {
  cfg.validate();
  const auto& dirs = projection_design().dirs;
  std::vector<double> samples(dirs.size(), 0.0);
  for (std::size_t f = 0; f < cfg.directions.size(); ++f) {
    const auto& fd = cfg.directions[f];
    for (std::size_t i = 0; i < dirs.size(); ++i) {
      const double t = dirs[i].dot(fd);
      samples[i] += cfg.weights[f] * std::exp(cfg.kernel_sharpness * (t * t - 1.0));
    }
  }
  return projection_fitter().fit(samples);
}

Phantom gen_phantom(const Dims3& dims, std::uint64_t seed, const PhantomOptions& options) {
  for (int d : dims)
    if (d < 8) throw ArgumentError("phantom dims must each be >= 8, got " + to_string(dims));

  std::mt19937_64 rng(mix_seed(seed, 0));
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const FrameField single = FrameField::random(rng);
  const FrameField crossing2 = FrameField::random(rng);
  const FrameField crossing3 = FrameField::random(rng);
  const double angle2 = (55.0 + 17.5 * (u(rng) + 1.0)) * std::numbers::pi / 180.0;
  const double w2 = 0.5 + 0.08 * u(rng);
  const std::array<double, 3> w3 = {0.36 + 0.03 * u(rng), 0.30 + 0.03 * u(rng), 0.24 + 0.02 * u(rng)};
  const double slab_lo = -0.25 + 0.08 * u(rng);
  const double slab_hi = 0.22 + 0.08 * u(rng);
  const Vec3 sgm_centre = {0.1 * u(rng), -0.1 + 0.1 * u(rng), 0.05 * u(rng)};
  constexpr double kBrainRadius = 0.92;
  constexpr double kCortexInner = 0.72;
  constexpr double kSgmRadius = 0.24;
  const double width = 2.0 * 2.5 / *std::min_element(dims.begin(), dims.end());

  Phantom ph;
  ph.target = Volume::zeros(dims, sh::kNumCoeffs);
  ph.target.header.intent = "FOD target";
  ph.fractions.wm = Volume::zeros(dims, 1);
  ph.fractions.cgm = Volume::zeros(dims, 1);
  ph.fractions.sgm = Volume::zeros(dims, 1);
  ph.regions.assign(product(dims), Region::Background);

  const double gm_dc = options.gm_amplitude * 2.0 * std::sqrt(std::numbers::pi);

  for (int z = 0; z < dims[2]; ++z)
    for (int y = 0; y < dims[1]; ++y)
      for (int x = 0; x < dims[0]; ++x) {
        const Vec3 p = {2.0 * (x + 0.5) / dims[0] - 1.0, 2.0 * (y + 0.5) / dims[1] - 1.0,
                        2.0 * (z + 0.5) / dims[2] - 1.0};
        const double r = std::sqrt(dot3(p, p));
        const double brain = ramp(kBrainRadius - r, width);
        if (brain <= 0.0) continue;
        const double cortex = ramp(r - kCortexInner, width);
        const Vec3 dp = {p[0] - sgm_centre[0], p[1] - sgm_centre[1], p[2] - sgm_centre[2]};
        const double blob = ramp(kSgmRadius - std::sqrt(dot3(dp, dp)), width);
        const double cgm = brain * cortex;
        const double sgm = brain * (1.0 - cortex) * blob;
        const double wm = brain * (1.0 - cortex) * (1.0 - blob);
        const std::size_t v = ph.target.index(x, y, z);
        ph.fractions.wm.data[v] = static_cast<float>(wm);
        ph.fractions.cgm.data[v] = static_cast<float>(cgm);
        ph.fractions.sgm.data[v] = static_cast<float>(sgm);

        Region fiber_region;
        FiberConfig fc;
        fc.kernel_sharpness = options.kernel_sharpness;
        if (p[2] < slab_lo) {
          fiber_region = Region::SingleFiber;
          const Mat3 f = single.at(p);
          fc.directions = {to_dir({f[0][0], f[1][0], f[2][0]})};
          fc.weights = {1.0};
        } else if (p[2] < slab_hi) {
          fiber_region = Region::TwoCrossing;
          const Mat3 f = crossing2.at(p);
          const Vec3 second = apply(f, {std::cos(angle2), std::sin(angle2), 0.0});
          fc.directions = {to_dir({f[0][0], f[1][0], f[2][0]}), to_dir(second)};
          fc.weights = {w2, 1.0 - w2};
        } else {
          fiber_region = Region::ThreeCrossing;
          const Mat3 f = crossing3.at(p);
          fc.directions = {to_dir({f[0][0], f[1][0], f[2][0]}), to_dir({f[0][1], f[1][1], f[2][1]}),
                           to_dir({f[0][2], f[1][2], f[2][2]})};
          fc.weights = {w3[0], w3[1], w3[2]};
        }

        std::vector<double> coeffs(sh::kNumCoeffs, 0.0);
        if (wm > 0.0) {
          const sh::ShCoeffs fod = make_fiber_fod(fc);
          for (int j = 0; j < sh::kNumCoeffs; ++j) coeffs[j] = wm * fod[j];
        }
        coeffs[0] += (cgm + sgm) * gm_dc;
        ph.target.set_voxel_values(v, coeffs);

        if (wm >= cgm && wm >= sgm)
          ph.regions[v] = fiber_region;
        else
          ph.regions[v] = cgm >= sgm ? Region::CorticalGM : Region::SubcorticalGM;
      }
  return ph;
}

Mask nonzero_mask(const Volume& fod) {
  Mask m = Mask::filled(fod.spatial(), false);
  const int channels = fod.channels();
  for (std::size_t v = 0; v < fod.voxels(); ++v)
    for (int c = 0; c < channels; ++c)
      if (fod.at(v, c) != 0.0f) {
        m.values[v] = 1;
        break;
      }
  return m;
}

Volume degrade(const Volume& target, const DegradeConfig& cfg, std::uint64_t seed, const Mask* tissue) {
  cfg.validate();
  const int channels = target.channels();
  sh::lmax_for_count(channels);
  const Mask derived = tissue ? Mask{} : nonzero_mask(target);
  const Mask& inside = tissue ? *tissue : derived;
  if (inside.dims != target.spatial()) throw ArgumentError("degrade: tissue mask geometry mismatch");

  std::vector<int> degree(static_cast<std::size_t>(channels));
  for (int j = 0; j < channels; ++j) degree[j] = sh::index_to_lm(j).l;

  Volume out = target;
  out.header.intent = "FOD degraded";
  for (std::size_t v = 0; v < target.voxels(); ++v) {
    const bool in_tissue = inside[v];
    std::mt19937_64 rng(mix_seed(seed, v));
    std::normal_distribution<double> noise(0.0, cfg.coeff_noise_sigma);
    for (int j = 0; j < channels; ++j) {
      if (degree[j] > cfg.truncate_lmax) {
        out.at(v, j) = 0.0f;
        continue;
      }
      double c = target.at(v, j);
      if (degree[j] >= 2) c *= cfg.amplitude_damping;
      if (in_tissue && cfg.coeff_noise_sigma > 0.0) c += noise(rng);
      out.at(v, j) = static_cast<float>(c);
    }
  }
  return out;
}

}  // namespace fodswin::phantom
