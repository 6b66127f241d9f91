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
#include <random>
#include <set>

#include "doctest.h"
#include "core/error.hpp"
#include "model/swin_unet.hpp"
#include "model/windows.hpp"
#include "support/grad_check.hpp"

using namespace fodswin;
using namespace fodswin::swin;

namespace {

std::vector<double> randn(std::size_t n, std::mt19937_64& rng, double s = 1.0) {
  std::normal_distribution<double> d(0.0, s);
  std::vector<double> v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

WindowAttentionWeights<double> random_weights(int dim, int heads, const Dims3& window, std::mt19937_64& rng) {
  auto w = WindowAttentionWeights<double>::zeros(dim, heads, window);
  w.qkv_weight = randn(w.qkv_weight.size(), rng, 0.4);
  w.qkv_bias = randn(w.qkv_bias.size(), rng, 0.1);
  w.rel_bias = randn(w.rel_bias.size(), rng, 0.3);
  w.proj_weight = randn(w.proj_weight.size(), rng, 0.4);
  w.proj_bias = randn(w.proj_bias.size(), rng, 0.1);
  return w;
}

}  // namespace

TEST_SUITE("windows") {

TEST_CASE("partition counts and identity") {
  std::mt19937_64 rng(1);
  const auto f4 = randn(64 * 3, rng);
  const auto one = partition_windows<double>(f4, {4, 4, 4}, 3, {4, 4, 4}, {0, 0, 0});
  CHECK(one.layout.num_windows == 1);
  CHECK(one.windows == f4);

  const auto f8 = randn(512 * 5, rng);
  const auto eight = partition_windows<double>(f8, {8, 8, 8}, 5, {4, 4, 4}, {0, 0, 0});
  CHECK(eight.layout.num_windows == 8);
  CHECK(reverse_windows(eight) == f8);
  const auto shifted = partition_windows<double>(f8, {8, 8, 8}, 5, {4, 4, 4}, {2, 2, 2});
  CHECK(reverse_windows(shifted) == f8);
  CHECK(shifted.windows != eight.windows);
  CHECK_THROWS_AS(partition_windows<double>(f8, {8, 8, 8}, 5, {3, 4, 4}, {0, 0, 0}), ArgumentError);
}

TEST_CASE("cyclic shift places grid token (q + s) mod R at window position q") {
  const WindowLayout l = make_window_layout({8, 8, 8}, {4, 4, 4}, {2, 2, 2});
  // First window, first token comes from grid (2,2,2).
  CHECK(l.perm[0] == 2 + 8 * (2 + 8 * 2));
  // Last window, last token: shifted coordinate (7,7,7) -> grid (1,1,1).
  CHECK(l.perm.back() == 1 + 8 * (1 + 8 * 1));
  REQUIRE(l.labels.size() == l.perm.size());
  // The first window lies entirely inside the unwrapped region.
  for (int k = 1; k < l.window_tokens; ++k) CHECK(l.labels[k] == l.labels[0]);
  // The last window mixes wrapped and unwrapped tokens.
  std::set<int> last(l.labels.end() - l.window_tokens, l.labels.end());
  CHECK(last.size() == 8);
}

TEST_CASE("uniform attention limit and single token") {
  const Dims3 window{2, 2, 1};
  const int dim = 4;
  auto w = WindowAttentionWeights<double>::zeros(dim, 2, window);
  // q = k = 0 and v = x: value slice of the qkv projection is the identity.
  for (int i = 0; i < dim; ++i) w.qkv_weight[i * 3 * dim + 2 * dim + i] = 1.0;
  for (int i = 0; i < dim; ++i) w.proj_weight[i * dim + i] = 1.0;
  std::mt19937_64 rng(2);
  const auto x = randn(4 * dim, rng);
  std::vector<double> probs;
  const auto y = window_attention<double>(x, window, w, 2, &probs);
  for (int c = 0; c < dim; ++c) {
    const double mean = (x[c] + x[dim + c] + x[2 * dim + c] + x[3 * dim + c]) / 4.0;
    for (int t = 0; t < 4; ++t) CHECK(y[t * dim + c] == doctest::Approx(mean).epsilon(1e-12));
  }
  for (double p : probs) CHECK(p == doctest::Approx(0.25).epsilon(1e-14));

  auto w1 = random_weights(dim, 2, {1, 1, 1}, rng);
  const auto x1 = randn(dim, rng);
  const auto y1 = window_attention<double>(x1, {1, 1, 1}, w1, 2);
  for (int c = 0; c < dim; ++c) {
    double yc = w1.proj_bias[c];
    for (int i = 0; i < dim; ++i) {
      double vi = w1.qkv_bias[2 * dim + i];
      for (int k = 0; k < dim; ++k) vi += x1[k] * w1.qkv_weight[k * 3 * dim + 2 * dim + i];
      yc += vi * w1.proj_weight[i * dim + c];
    }
    CHECK(y1[c] == doctest::Approx(yc).epsilon(1e-12));
  }
  CHECK_THROWS_AS(window_attention<double>(x1, {1, 1, 1}, w1, 3), ArgumentError);
}

TEST_CASE("softmax rows sum to one") {
  std::mt19937_64 rng(3);
  const Dims3 window{2, 3, 2};
  const auto w = random_weights(6, 3, window, rng);
  const auto x = randn(12 * 6, rng, 3.0);
  std::vector<double> probs;
  window_attention<double>(x, window, w, 3, &probs);
  for (std::size_t r = 0; r < probs.size() / 12; ++r) {
    double s = 0;
    for (int k = 0; k < 12; ++k) s += probs[r * 12 + k];
    CHECK(std::abs(s - 1.0) < 1e-6);
  }
}

TEST_CASE("attention gradients match central differences") {
  std::mt19937_64 rng(4);
  const Dims3 window{2, 2, 2};
  const int dim = 6, heads = 2;
  auto w = random_weights(dim, heads, window, rng);
  const auto x = randn(8 * dim, rng);
  const auto dy = randn(8 * dim, rng);
  auto objective = [&](const WindowAttentionWeights<double>& ww, const std::vector<double>& xx) {
    const auto y = window_attention<double>(xx, window, ww, heads);
    double s = 0;
    for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * dy[i];
    return s;
  };
  std::vector<double> dx;
  const auto g = window_attention_grads<double>(x, window, w, heads, dy, &dx);
  const double h = 1e-5;
  auto check_field = [&](std::vector<double> WindowAttentionWeights<double>::*field, const char* name) {
    const std::string field_name = name;
    CAPTURE(field_name);
    const auto& analytic = g.*field;
    for (std::size_t i = 0; i < analytic.size(); ++i) {
      auto wp = w, wm = w;
      (wp.*field)[i] += h;
      (wm.*field)[i] -= h;
      const double num = (objective(wp, x) - objective(wm, x)) / (2 * h);
      CAPTURE(i);
      const bool key_bias = field_name == "qkv_bias" && i >= static_cast<std::size_t>(dim) && i < 2u * dim;
      if (key_bias) {
        // Softmax is shift invariant, so key biases get no gradient.
        REQUIRE(std::abs(analytic[i]) < 1e-12);
        REQUIRE(std::abs(num) < 1e-8);
      } else {
        REQUIRE(testing::rel_error(analytic[i], num) < 1e-4);
      }
    }
  };
  check_field(&WindowAttentionWeights<double>::qkv_weight, "qkv_weight");
  check_field(&WindowAttentionWeights<double>::qkv_bias, "qkv_bias");
  check_field(&WindowAttentionWeights<double>::rel_bias, "rel_bias");
  check_field(&WindowAttentionWeights<double>::proj_weight, "proj_weight");
  check_field(&WindowAttentionWeights<double>::proj_bias, "proj_bias");
  for (std::size_t i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    REQUIRE(testing::rel_error(dx[i], (objective(w, xp) - objective(w, xm)) / (2 * h)) < 1e-4);
  }
}

TEST_CASE("shape is preserved across random valid configs") {
  std::mt19937_64 rng(5);
  int built = 0;
  for (int trial = 0; built < 20 && trial < 500; ++trial) {
    ModelConfig cfg;
    const int stages = 1 + static_cast<int>(rng() % 3);
    const int base = std::vector<int>{2, 4}[rng() % 2];
    cfg.window_size = {base, base, std::vector<int>{1, 2}[rng() % 2]};
    const int mult = 1 << stages;
    for (int a = 0; a < 3; ++a) cfg.patch_size[a] = mult * cfg.window_size[a] * static_cast<int>(1 + rng() % 2);
    cfg.channels = 1 + static_cast<int>(rng() % 6);
    const int heads = 1 + static_cast<int>(rng() % 2);
    cfg.embed_dim = heads * (2 + static_cast<int>(rng() % 3));
    cfg.depths.assign(stages, 0);
    cfg.num_heads.assign(stages, 0);
    for (int s = 0; s < stages; ++s) {
      cfg.depths[s] = 1 + static_cast<int>(rng() % 2);
      cfg.num_heads[s] = heads;
    }
    cfg.shift = rng() % 2 == 0;
    cfg.residual = rng() % 2 == 0;
    try {
      cfg.validate();
    } catch (const ConfigError&) {
      continue;
    }
    SwinUNet<float> m(cfg);
    const auto p64 = init_values(m.layout(), 1);
    const std::vector<float> p(p64.begin(), p64.end());
    std::vector<float> x(m.patch_elements(), 0.25f);
    const auto y = m.forward(p, x);
    CAPTURE(to_text(cfg));
    CHECK(y.size() == x.size());
    ++built;
  }
  CHECK(built == 20);
}

}  // TEST_SUITE
