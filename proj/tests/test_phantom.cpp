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

#include <cmath>
#include <numbers>
#include <set>

#include "doctest.h"
#include "core/error.hpp"
#include "core/phantom.hpp"
#include "pipeline/evaluation.hpp"

using namespace fodswin;
using namespace fodswin::phantom;

namespace {

double angle_deg(const sh::UnitDirection& a, const sh::UnitDirection& b) {
  return std::acos(std::min(1.0, std::abs(a.dot(b)))) * 180.0 / std::numbers::pi;
}

sh::UnitDirection argmax_direction(const sh::ShCoeffs& c, const sh::SphereDesign& d) {
  const Eigen::VectorXd amp = sh::eval_basis(d.dirs) * Eigen::Map<const Eigen::VectorXd>(c.c.data(), 45);
  Eigen::Index best;
  amp.maxCoeff(&best);
  return d.dirs[static_cast<std::size_t>(best)];
}

const Phantom& shared_phantom() {
  static const Phantom ph = gen_phantom({32, 32, 32}, 7);
  return ph;
}

}  // namespace

TEST_SUITE("phantom") {

TEST_CASE("single fiber peak aligns with its direction") {
  const sh::SphereDesign dense = sh::fibonacci_sphere(20000);
  FiberConfig cfg{{sh::UnitDirection::checked(0, 0, 1)}, {1.0}, 50.0};
  CHECK(angle_deg(argmax_direction(make_fiber_fod(cfg), dense), cfg.directions[0]) < 3.0);
  FiberConfig tilted{{sh::UnitDirection::normalized(0.4, -0.3, 0.5)}, {1.0}, 20.0};
  CHECK(angle_deg(argmax_direction(make_fiber_fod(tilted), dense), tilted.directions[0]) < 3.0);
}

TEST_CASE("crossing amplitudes") {
  const auto d1 = sh::UnitDirection::checked(1, 0, 0);
  const auto d2 = sh::UnitDirection::checked(0, 1, 0);
  const sh::ShCoeffs equal = make_fiber_fod({{d1, d2}, {0.5, 0.5}, 50.0});
  CHECK(std::abs(sh::amplitude(equal, d1) - sh::amplitude(equal, d2)) < 1e-6);
  const sh::ShCoeffs uneven = make_fiber_fod({{d1, d2}, {0.7, 0.3}, 50.0});
  CHECK(sh::amplitude(uneven, d1) > sh::amplitude(uneven, d2));
}

TEST_CASE("fiber config validation") {
  const auto z = sh::UnitDirection::checked(0, 0, 1);
  CHECK_THROWS_AS(make_fiber_fod({{}, {}, 50.0}), ArgumentError);
  CHECK_THROWS_AS(make_fiber_fod({{z, z, z, z}, {0.2, 0.2, 0.2, 0.2}, 50.0}), ArgumentError);
  CHECK_THROWS_AS(make_fiber_fod({{z}, {-0.5}, 50.0}), ArgumentError);
  CHECK_THROWS_AS(make_fiber_fod({{z, z}, {0.7, 0.6}, 50.0}), ArgumentError);
  CHECK_THROWS_AS(make_fiber_fod({{z}, {1.0}, 0.0}), ArgumentError);
}

TEST_CASE("phantom is deterministic and well formed") {
  const Phantom& a = shared_phantom();
  const Phantom b = gen_phantom({32, 32, 32}, 7);
  CHECK(a.target.data == b.target.data);
  CHECK(a.fractions.wm.data == b.fractions.wm.data);
  CHECK(gen_phantom({32, 32, 32}, 8).target.data != a.target.data);
  CHECK(a.target.channels() == 45);

  std::set<Region> seen(a.regions.begin(), a.regions.end());
  for (Region r : {Region::Background, Region::SingleFiber, Region::TwoCrossing, Region::ThreeCrossing,
                   Region::CorticalGM, Region::SubcorticalGM})
    CHECK(seen.count(r) == 1);

  bool pure_cgm = false, pure_sgm = false;
  for (std::size_t v = 0; v < a.target.voxels(); ++v) {
    const double total = a.fractions.total(v);
    REQUIRE(total <= 1.0 + 1e-6);
    for (int c = 0; c < 45; ++c) REQUIRE(std::isfinite(a.target.at(v, c)));
    if (a.regions[v] == Region::Background) {
      REQUIRE(total == 0.0);
      for (int c = 0; c < 45; ++c) REQUIRE(a.target.at(v, c) == 0.0f);
    }
    pure_cgm = pure_cgm || a.fractions.cgm.data[v] >= 0.999f;
    pure_sgm = pure_sgm || a.fractions.sgm.data[v] >= 0.999f;
  }
  CHECK(pure_cgm);
  CHECK(pure_sgm);
  CHECK_THROWS_AS(gen_phantom({7, 32, 32}, 1), ArgumentError);
}

TEST_CASE("degrade") {
  const Phantom& ph = shared_phantom();
  SUBCASE("identity settings") {
    const Volume d = degrade(ph.target, {8, 0.0, 1.0}, 1);
    CHECK(d.data == ph.target.data);
  }
  SUBCASE("truncation zeros degrees 6 and 8 exactly") {
    const Volume d = degrade(ph.target, {4, 0.01, 0.8}, 1);
    for (std::size_t v = 0; v < d.voxels(); ++v)
      for (int j = 15; j < 45; ++j) REQUIRE(d.at(v, j) == 0.0f);
  }
  SUBCASE("noise-free degradation never adds non-DC energy") {
    const Volume d = degrade(ph.target, {6, 0.0, 0.7}, 1);
    for (std::size_t v = 0; v < d.voxels(); ++v) {
      double e_t = 0, e_d = 0;
      for (int j = 1; j < 45; ++j) {
        e_t += static_cast<double>(ph.target.at(v, j)) * ph.target.at(v, j);
        e_d += static_cast<double>(d.at(v, j)) * d.at(v, j);
      }
      REQUIRE(e_d <= e_t);
    }
  }
  SUBCASE("default degradation lowers WM ACC into (0.5, 1)") {
    const Volume d = degrade(ph.target, {}, 3);
    const Mask wm = eval::region_mask(ph.fractions, eval::wm_rule());
    const double mean = eval::acc_stats(sh::acc_volume(d, ph.target, wm), wm).mean;
    CHECK(mean < 1.0);
    CHECK(mean > 0.5);
    // Regression fixture for the 32^3 phantom with seeds 7/3.
    CHECK(mean == doctest::Approx(0.584438).epsilon(1e-5));
  }
  SUBCASE("ACC degrades monotonically with noise") {
    const Mask wm = eval::region_mask(ph.fractions, eval::wm_rule());
    REQUIRE(wm.count() >= 100);
    double prev = 2.0;
    for (double sigma : {0.0, 0.01, 0.03, 0.1}) {
      const Volume d = degrade(ph.target, {4, sigma, 0.8}, 5);
      const double mean = eval::acc_stats(sh::acc_volume(d, ph.target, wm), wm).mean;
      CHECK(mean <= prev);
      prev = mean;
    }
  }
  SUBCASE("deterministic and bounded to tissue") {
    const Volume a = degrade(ph.target, {}, 9), b = degrade(ph.target, {}, 9);
    CHECK(a.data == b.data);
    for (std::size_t v = 0; v < a.voxels(); ++v)
      if (ph.regions[v] == Region::Background)
        for (int c = 0; c < 45; ++c) REQUIRE(a.at(v, c) == 0.0f);
  }
  SUBCASE("invalid config") {
    CHECK_THROWS_AS(degrade(ph.target, {3, 0.0, 1.0}, 1), ArgumentError);
    CHECK_THROWS_AS(degrade(ph.target, {4, -1.0, 1.0}, 1), ArgumentError);
    CHECK_THROWS_AS(degrade(ph.target, {4, 0.0, 0.0}, 1), ArgumentError);
  }
}

}  // TEST_SUITE
