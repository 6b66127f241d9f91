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

#include <algorithm>
#include <cmath>
#include <fstream>
#include <random>

#include "doctest.h"
#include "core/error.hpp"
#include "core/phantom.hpp"
#include "pipeline/evaluation.hpp"
#include "support/temp_dir.hpp"

using namespace fodswin;
using namespace fodswin::eval;

namespace {

TissueFractions voxel_fractions(std::initializer_list<std::array<float, 3>> voxels) {
  const int n = static_cast<int>(voxels.size());
  TissueFractions f{Volume::zeros({n, 1, 1}, 1), Volume::zeros({n, 1, 1}, 1), Volume::zeros({n, 1, 1}, 1)};
  int i = 0;
  for (const auto& v : voxels) {
    f.wm.data[i] = v[0];
    f.cgm.data[i] = v[1];
    f.sgm.data[i] = v[2];
    ++i;
  }
  return f;
}

sh::AccMap map_from(const Dims3& dims, const std::vector<double>& values) {
  sh::AccMap m;
  m.dims = dims;
  m.values = values;
  m.state.assign(values.size(), sh::AccState::Defined);
  for (std::size_t i = 0; i < values.size(); ++i)
    if (std::isnan(values[i])) m.state[i] = sh::AccState::Undefined;
  return m;
}

std::vector<unsigned char> pgm_pixels(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string magic;
  int w, h, maxv;
  in >> magic >> w >> h >> maxv;
  in.get();
  std::vector<unsigned char> px(static_cast<std::size_t>(w * h));
  in.read(reinterpret_cast<char*>(px.data()), static_cast<std::streamsize>(px.size()));
  return px;
}

}  // namespace

TEST_SUITE("evaluation") {

TEST_CASE("region rules") {
  const auto f = voxel_fractions({{0.8f, 0.1f, 0.0f}, {0.35f, 0.35f, 0.0f}, {0.3f, 0.0f, 0.3f}, {0.69f, 0.2f, 0.1f}});
  const Mask wm = region_mask(f, wm_rule()), wc = region_mask(f, wm_cgm_rule()), ws = region_mask(f, wm_sgm_rule());
  CHECK(wm.values == std::vector<std::uint8_t>{1, 0, 0, 0});
  CHECK(wc.values == std::vector<std::uint8_t>{0, 1, 0, 0});
  CHECK(ws.values == std::vector<std::uint8_t>{0, 0, 1, 0});
  CHECK_THROWS_AS(region_mask(f, {"bad", 1.5, 0, 0}), ArgumentError);

  const auto rules = standard_rules();
  REQUIRE(rules.size() == 3);
  CHECK(rules[0].name == "WM");
  CHECK(rules[1].name == "WM_CGM");
  CHECK(rules[2].name == "WM_SGM");
}

TEST_CASE("region masks match a brute-force scan and are monotone") {
  const auto ph = phantom::gen_phantom({32, 32, 32}, 9);
  for (const auto& rule : standard_rules()) {
    const Mask m = region_mask(ph.fractions, rule);
    std::size_t brute = 0;
    for (std::size_t v = 0; v < m.size(); ++v) {
      const float w = ph.fractions.wm.data[v], c = ph.fractions.cgm.data[v], s = ph.fractions.sgm.data[v];
      bool in = false;
      if (rule.name == "WM") in = w >= 0.7f;
      if (rule.name == "WM_CGM") in = w >= 0.3f && c >= 0.3f;
      if (rule.name == "WM_SGM") in = w >= 0.3f && s >= 0.3f;
      REQUIRE(m[v] == in);
      brute += in;
    }
    CHECK(m.count() == brute);
    CHECK(brute > 0);
    RegionRule stricter = rule;
    stricter.wm_min = std::min(1.0, stricter.wm_min + 0.1);
    const Mask s = region_mask(ph.fractions, stricter);
    for (std::size_t v = 0; v < s.size(); ++v) REQUIRE((!s[v] || m[v]));
  }
}

TEST_CASE("stats basics") {
  const auto one = acc_stats(map_from({3, 1, 1}, {1, 1, 1}), Mask::filled({3, 1, 1}, true));
  CHECK(one.min == 1);
  CHECK(one.max == 1);
  CHECK(one.mean == 1);
  CHECK(one.lower_quartile == 1);
  CHECK(one.upper_quartile == 1);
  CHECK(one.std == 0);
  const auto s = acc_stats(map_from({3, 1, 1}, {-1, 0, 1}), Mask::filled({3, 1, 1}, true));
  CHECK(s.mean == 0);
  CHECK(s.min == -1);
  CHECK(s.max == 1);
  CHECK(s.lower_quartile == -0.5);
  CHECK(s.upper_quartile == 0.5);
  CHECK(s.std == doctest::Approx(std::sqrt(2.0 / 3.0)));

  const double nan = std::nan("");
  const auto u = acc_stats(map_from({4, 1, 1}, {0.5, nan, 0.25, nan}), Mask::filled({4, 1, 1}, true));
  CHECK(u.n_voxels == 2);
  CHECK(u.n_undefined == 2);

  CHECK_THROWS_AS(acc_stats(map_from({2, 1, 1}, {1, 1}), Mask::filled({2, 1, 1}, false)), EmptySelectionError);
  CHECK_THROWS_AS(acc_stats(map_from({2, 1, 1}, {nan, nan}), Mask::filled({2, 1, 1}, true)), AllUndefinedError);
}

TEST_CASE("quartiles match a reference type-7 implementation") {
  std::mt19937_64 rng(10);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> v(10000);
  for (auto& x : v) x = u(rng);
  const AccStats s = describe(v);
  std::sort(v.begin(), v.end());
  // Reference: numpy's default 'linear' method, written out independently.
  auto ref = [&](double q) {
    const double pos = q * (static_cast<double>(v.size()) - 1);
    const double lo = std::floor(pos);
    const double frac = pos - lo;
    return v[static_cast<std::size_t>(lo)] * (1 - frac) + v[static_cast<std::size_t>(lo) + 1] * frac;
  };
  CHECK(std::abs(s.lower_quartile - ref(0.25)) < 1e-9);
  CHECK(std::abs(s.upper_quartile - ref(0.75)) < 1e-9);
  CHECK(s.min <= s.lower_quartile);
  CHECK(s.lower_quartile <= s.upper_quartile);
  CHECK(s.upper_quartile <= s.max);
  double mean = 0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  CHECK(std::abs(s.mean - mean) < 1e-12);
}

TEST_CASE("heatmap export") {
  testing::TempDir tmp;
  const Dims3 dims{4, 3, 2};
  const auto ones = map_from(dims, std::vector<double>(24, 1.0));
  const auto files = export_heatmap_slice(ones, Axis::Z, 1, tmp.path() / "ones");
  for (auto p : pgm_pixels(files.image)) CHECK(p == 255);
  for (auto p : pgm_pixels(files.mask)) CHECK(p == 255);
  const auto neg = map_from(dims, std::vector<double>(24, -1.0));
  for (auto p : pgm_pixels(export_heatmap_slice(neg, Axis::Y, 0, tmp.path() / "neg").image)) CHECK(p == 0);

  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<double> vals(24);
  for (auto& x : vals) x = u(rng);
  vals[3] = std::nan("");
  const auto m = map_from(dims, vals);
  const auto f = export_heatmap_slice(m, Axis::X, 3, tmp.path() / "rand");
  const auto rows = read_heatmap_csv(f.csv);
  REQUIRE(rows.size() == 2);     // z
  REQUIRE(rows[0].size() == 3);  // y
  for (int z = 0; z < 2; ++z)
    for (int y = 0; y < 3; ++y) {
      const double expect = vals[static_cast<std::size_t>(3 + 4 * (y + 3 * z))];
      if (std::isnan(expect))
        CHECK(std::isnan(rows[z][y]));
      else
        CHECK(rows[z][y] == expect);
    }
  CHECK(pgm_pixels(f.mask)[0] == 0);  // (x=3, y=0, z=0) is undefined
  CHECK(pgm_pixels(f.image)[0] == 0);
  CHECK_THROWS_AS(export_heatmap_slice(m, Axis::Z, 2, tmp.path() / "bad"), ArgumentError);
}

TEST_CASE("method comparison report") {
  const auto ph = phantom::gen_phantom({24, 24, 24}, 12);
  const Volume deg = phantom::degrade(ph.target, {}, 1);
  const Mask all = Mask::filled(ph.target.spatial(), true);
  const std::vector<NamedAccMap> one{{"degraded", sh::acc_volume(deg, ph.target, all)}};
  const Report r = compare_methods(one, ph.fractions, standard_rules());
  REQUIRE(r.rows.size() == 3);
  const std::string csv = report_csv(r);
  CHECK(csv.substr(0, csv.find('\n')) == "method,region,n_voxels,n_undefined,Min,Max,Mean,STD,LQ,UQ");
  CHECK(std::count(csv.begin(), csv.end(), '\n') == 4);
  const std::string table = report_table(r);
  CHECK(table.find("WM_SGM") != std::string::npos);

  const std::vector<NamedAccMap> two{{"degraded", sh::acc_volume(deg, ph.target, all)},
                                     {"reference", sh::acc_volume(ph.target, ph.target, all)}};
  const Report r2 = compare_methods(two, ph.fractions, standard_rules());
  CHECK(r2.rows.size() == 6);
  CHECK(r2.rows[3].stats.mean > r2.rows[0].stats.mean);

  sh::AccMap small = one[0].second;
  small.dims = {2, 2, 2};
  CHECK_THROWS_AS(compare_methods({{"x", small}}, ph.fractions, standard_rules()), ArgumentError);
}

}  // TEST_SUITE
