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
#include <cstdio>
#include <random>

#include "doctest.h"
#include "core/error.hpp"
#include "model/swin_unet.hpp"
#include "support/grad_check.hpp"

using namespace fodswin;
using namespace fodswin::swin;

TEST_SUITE("swin_model") {

TEST_CASE("init is deterministic and follows the kind of each tensor") {
  const ModelConfig cfg = desk_config();
  const ParamLayout layout = model_layout(cfg);
  const auto a = init_values(layout, 11);
  const auto b = init_values(layout, 11);
  const auto c = init_values(layout, 12);
  CHECK(a == b);
  CHECK(a != c);
  for (const auto& e : layout.entries()) {
    for (std::size_t i = 0; i < e.size; ++i) {
      const double v = a[e.offset + i];
      if (e.init == InitKind::Ones) REQUIRE(v == 1.0);
      if (e.init == InitKind::Zeros) REQUIRE(v == 0.0);
      if (e.init == InitKind::TruncNormal) REQUIRE(std::abs(v) <= 0.04);
    }
  }
}

TEST_CASE("qkv shapes give per-head dim 8 for embed 24 and 3 heads") {
  const ParamLayout layout = model_layout(desk_config());
  const auto& qkv = layout.find("stage0.block0.attn.qkv.weight");
  CHECK(qkv.shape == std::vector<int>{24, 72});
  CHECK(qkv.shape[1] / 3 / 3 == 8);
  CHECK(layout.find("stage1.block0.attn.qkv.weight").shape == std::vector<int>{48, 144});
}

TEST_CASE("invalid geometry is a config error") {
  ModelConfig cfg = desk_config();
  cfg.patch_size = {20, 20, 20};
  cfg.window_size = {8, 8, 8};
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(SwinUNet<float>{cfg}, ConfigError);
}

TEST_CASE("forward preserves the patch shape") {
  const ModelConfig cfg = desk_config();
  SwinUNet<float> model(cfg);
  const auto p64 = init_values(model.layout(), 3);
  std::vector<float> p(p64.begin(), p64.end());
  std::vector<float> x(model.patch_elements(), 0.1f);
  const auto y = model.forward(p, x);
  CHECK(y.size() == x.size());
  CHECK_THROWS_AS(model.forward(p, std::vector<float>(10)), ArgumentError);
}

TEST_CASE("zero input and zero head give zero output") {
  const ModelConfig cfg = testing::toy_config();
  SwinUNet<double> model(cfg);
  auto p = init_values(model.layout(), 5);
  const auto& w = model.layout().find("head.weight");
  std::fill(p.begin() + static_cast<long>(w.offset), p.begin() + static_cast<long>(w.offset + w.size), 0.0);
  const auto y = model.forward(p, std::vector<double>(model.patch_elements(), 0.0));
  for (double v : y) REQUIRE(v == 0.0);
}

TEST_CASE("mse of a one-coordinate perturbation") {
  const ModelConfig cfg = testing::toy_config();
  SwinUNet<double> model(cfg);
  const auto p = init_values(model.layout(), 5);
  std::vector<double> x(model.patch_elements());
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n01;
  for (auto& v : x) v = n01(rng);
  auto t = model.forward(p, x);
  const double eps = 0.25;
  t[17] += eps;
  std::vector<double> g(p.size(), 0.0);
  const double mse = model.loss_and_grads(p, x, t, g);
  CHECK(mse == doctest::Approx(eps * eps / static_cast<double>(x.size())).epsilon(1e-9));
  std::fill(g.begin(), g.end(), 0.0);
  CHECK(model.loss_and_grads(p, x, model.forward(p, x), g) == 0.0);
  for (double v : g) REQUIRE(v == 0.0);
}

TEST_CASE("forward is deterministic") {
  const ModelConfig cfg = testing::toy_config();
  SwinUNet<float> model(cfg);
  const auto p64 = init_values(model.layout(), 9);
  std::vector<float> p(p64.begin(), p64.end());
  std::vector<float> x(model.patch_elements());
  for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<float>(std::sin(0.37 * i));
  CHECK(model.forward(p, x) == model.forward(p, x));
}

TEST_CASE("gradients match central differences on the toy config") {
  for (bool residual : {false, true}) {
    ModelConfig cfg = testing::toy_config();
    cfg.residual = residual;
    const auto problem = testing::make_grad_problem(cfg, 21);
    const auto results = testing::check_all_gradients(problem, 20, 4);
    for (const auto& r : results) {
      CAPTURE(r.tensor);
      CAPTURE(residual);
      CHECK(r.checked >= std::min<int>(20, static_cast<int>(problem.model.layout().contains(r.tensor)
                                                               ? problem.model.layout().find(r.tensor).size
                                                               : problem.input.size())));
      CHECK(r.max_rel_error < 1e-3);
    }
  }
}

}  // TEST_SUITE
