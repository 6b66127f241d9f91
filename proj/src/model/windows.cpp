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

#include "model/windows.hpp"

#include <cmath>
#include <limits>

#include "core/error.hpp"
#include "model/ops.hpp"

namespace fodswin::swin {

WindowLayout make_window_layout(const Dims3& grid, const Dims3& window, const Dims3& shift) {
  WindowLayout l;
  l.grid = grid;
  l.window = window;
  l.shift = shift;
  l.num_windows = 1;
  l.window_tokens = 1;
  Dims3 counts{};
  bool shifted = false;
  for (int a = 0; a < 3; ++a) {
    if (window[a] < 1 || grid[a] < 1 || grid[a] % window[a] != 0)
      throw ArgumentError("grid " + to_string(grid) + " is not divisible by window " + to_string(window));
    if (shift[a] < 0 || shift[a] >= window[a]) throw ArgumentError("shift must lie in [0, window)");
    counts[a] = grid[a] / window[a];
    l.num_windows *= counts[a];
    l.window_tokens *= window[a];
    shifted = shifted || shift[a] > 0;
  }
  const std::size_t n = static_cast<std::size_t>(l.num_windows) * l.window_tokens;
  l.perm.resize(n);
  if (shifted) l.labels.resize(n);
  auto region = [&](int a, int q) {
    if (shift[a] == 0) return 0;
    if (q < grid[a] - window[a]) return 0;
    return q < grid[a] - shift[a] ? 1 : 2;
  };
  std::size_t k = 0;
  for (int wz = 0; wz < counts[2]; ++wz)
    for (int wy = 0; wy < counts[1]; ++wy)
      for (int wx = 0; wx < counts[0]; ++wx)
        for (int lz = 0; lz < window[2]; ++lz)
          for (int ly = 0; ly < window[1]; ++ly)
            for (int lx = 0; lx < window[0]; ++lx, ++k) {
              const int qx = wx * window[0] + lx, qy = wy * window[1] + ly, qz = wz * window[2] + lz;
              const int x = (qx + shift[0]) % grid[0];
              const int y = (qy + shift[1]) % grid[1];
              const int z = (qz + shift[2]) % grid[2];
              l.perm[k] = x + grid[0] * (y + grid[1] * z);
              if (shifted) l.labels[k] = region(0, qx) + 3 * region(1, qy) + 9 * region(2, qz);
            }
  return l;
}

int relative_table_rows(const Dims3& window) {
  return (2 * window[0] - 1) * (2 * window[1] - 1) * (2 * window[2] - 1);
}

std::vector<int> relative_position_index(const Dims3& window) {
  const int wt = window[0] * window[1] * window[2];
  std::vector<int> idx(static_cast<std::size_t>(wt) * wt);
  auto coord = [&](int t) {
    return Dims3{t % window[0], (t / window[0]) % window[1], t / (window[0] * window[1])};
  };
  for (int i = 0; i < wt; ++i) {
    const Dims3 ci = coord(i);
    for (int j = 0; j < wt; ++j) {
      const Dims3 cj = coord(j);
      const int dx = ci[0] - cj[0] + window[0] - 1;
      const int dy = ci[1] - cj[1] + window[1] - 1;
      const int dz = ci[2] - cj[2] + window[2] - 1;
      idx[static_cast<std::size_t>(i) * wt + j] = dx + (2 * window[0] - 1) * (dy + (2 * window[1] - 1) * dz);
    }
  }
  return idx;
}

std::vector<int> space_to_depth_index(const Dims3& fine) {
  for (int a = 0; a < 3; ++a)
    if (fine[a] % 2 != 0) throw ArgumentError("space-to-depth needs even grid sizes");
  const Dims3 coarse = {fine[0] / 2, fine[1] / 2, fine[2] / 2};
  std::vector<int> idx(product(fine));
  std::size_t k = 0;
  for (int z = 0; z < coarse[2]; ++z)
    for (int y = 0; y < coarse[1]; ++y)
      for (int x = 0; x < coarse[0]; ++x)
        for (int sub = 0; sub < 8; ++sub, ++k) {
          const int fx = 2 * x + (sub & 1), fy = 2 * y + ((sub >> 1) & 1), fz = 2 * z + ((sub >> 2) & 1);
          idx[k] = fx + fine[0] * (fy + fine[1] * fz);
        }
  return idx;
}

template <typename T>
WindowPartition<T> partition_windows(std::span<const T> feat, const Dims3& grid, int channels,
                                     const Dims3& window, const Dims3& shift) {
  if (channels < 1 || feat.size() != product(grid) * static_cast<std::size_t>(channels))
    throw ArgumentError("feature tensor does not match grid and channel count");
  WindowPartition<T> part;
  part.layout = make_window_layout(grid, window, shift);
  part.channels = channels;
  part.windows.resize(feat.size());
  ops::gather_rows(feat.data(), part.layout.perm, channels, part.windows.data());
  return part;
}

template <typename T>
std::vector<T> reverse_windows(const WindowPartition<T>& part) {
  std::vector<T> out(part.windows.size());
  ops::scatter_rows(part.windows.data(), part.layout.perm, part.channels, out.data());
  return out;
}

template <typename T>
void attention_forward(const AttentionGeometry& g, const AttentionParams<T>& p, const T* x, T* y,
                       AttentionCache<T>& cache) {
  using Strided = Eigen::Map<const ops::Mat<T>, 0, Eigen::OuterStride<>>;
  using StridedOut = Eigen::Map<ops::Mat<T>, 0, Eigen::OuterStride<>>;
  const int c = g.dim, h = g.heads, hd = c / h, wt = g.window_tokens;
  const int n = g.num_windows * wt;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));
  cache.qkv.resize(static_cast<std::size_t>(n) * 3 * c);
  cache.probs.resize(static_cast<std::size_t>(g.num_windows) * h * wt * wt);
  cache.context.resize(static_cast<std::size_t>(n) * c);
  ops::linear_forward(x, n, c, p.qkv_weight, p.qkv_bias, 3 * c, cache.qkv.data());
  const T neg_inf = -std::numeric_limits<T>::infinity();
  for (int w = 0; w < g.num_windows; ++w) {
    const T* base = cache.qkv.data() + static_cast<std::size_t>(w) * wt * 3 * c;
    for (int hh = 0; hh < h; ++hh) {
      Strided q(base + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      Strided k(base + c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      Strided v(base + 2 * c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      ops::MatMap<T> pm(cache.probs.data() + (static_cast<std::size_t>(w) * h + hh) * wt * wt, wt, wt);
      pm.noalias() = scale * (q * k.transpose());
      const int* lab = g.labels.empty() ? nullptr : g.labels.data() + static_cast<std::size_t>(w) * wt;
      for (int i = 0; i < wt; ++i) {
        T* row = pm.data() + static_cast<std::size_t>(i) * wt;
        const int* ridx = g.rel_index.data() + static_cast<std::size_t>(i) * wt;
        T mx = neg_inf;
        for (int j = 0; j < wt; ++j) {
          if (lab && lab[i] != lab[j]) {
            row[j] = neg_inf;
            continue;
          }
          row[j] += p.rel_bias[static_cast<std::size_t>(ridx[j]) * h + hh];
          mx = std::max(mx, row[j]);
        }
        T sum = 0;
        for (int j = 0; j < wt; ++j) {
          row[j] = row[j] == neg_inf ? T(0) : std::exp(row[j] - mx);
          sum += row[j];
        }
        const T inv = T(1) / sum;
        for (int j = 0; j < wt; ++j) row[j] *= inv;
      }
      StridedOut ctx(cache.context.data() + static_cast<std::size_t>(w) * wt * c + hh * hd, wt, hd,
                     Eigen::OuterStride<>(c));
      ctx.noalias() = pm * v;
    }
  }
  ops::linear_forward(cache.context.data(), n, c, p.proj_weight, p.proj_bias, c, y);
}

template <typename T>
void attention_backward(const AttentionGeometry& g, const AttentionParams<T>& p, const T* x,
                        const AttentionCache<T>& cache, const T* dy, T* dx, const AttentionGrads<T>& grads) {
  using Strided = Eigen::Map<const ops::Mat<T>, 0, Eigen::OuterStride<>>;
  using StridedOut = Eigen::Map<ops::Mat<T>, 0, Eigen::OuterStride<>>;
  const int c = g.dim, h = g.heads, hd = c / h, wt = g.window_tokens;
  const int n = g.num_windows * wt;
  const T scale = T(1) / std::sqrt(static_cast<T>(hd));

  std::vector<T> dctx(static_cast<std::size_t>(n) * c);
  ops::linear_backward(cache.context.data(), n, c, p.proj_weight, c, dy, dctx.data(), grads.proj_weight,
                       grads.proj_bias);
  std::vector<T> dqkv(static_cast<std::size_t>(n) * 3 * c, T(0));
  ops::Mat<T> dp(wt, wt);
  for (int w = 0; w < g.num_windows; ++w) {
    const std::size_t row0 = static_cast<std::size_t>(w) * wt;
    const T* base = cache.qkv.data() + row0 * 3 * c;
    T* dbase = dqkv.data() + row0 * 3 * c;
    for (int hh = 0; hh < h; ++hh) {
      Strided q(base + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      Strided k(base + c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      Strided v(base + 2 * c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      StridedOut dq(dbase + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      StridedOut dk(dbase + c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      StridedOut dv(dbase + 2 * c + hh * hd, wt, hd, Eigen::OuterStride<>(3 * c));
      Strided dc(dctx.data() + row0 * c + hh * hd, wt, hd, Eigen::OuterStride<>(c));
      ops::CMatMap<T> pm(cache.probs.data() + (static_cast<std::size_t>(w) * h + hh) * wt * wt, wt, wt);

      dp.noalias() = dc * v.transpose();
      dv.noalias() += pm.transpose() * dc;
      for (int i = 0; i < wt; ++i) {
        T dot = 0;
        for (int j = 0; j < wt; ++j) dot += pm(i, j) * dp(i, j);
        const int* ridx = g.rel_index.data() + static_cast<std::size_t>(i) * wt;
        for (int j = 0; j < wt; ++j) {
          const T ds = pm(i, j) * (dp(i, j) - dot);
          dp(i, j) = ds;
          grads.rel_bias[static_cast<std::size_t>(ridx[j]) * h + hh] += ds;
        }
      }
      dq.noalias() += scale * (dp * k);
      dk.noalias() += scale * (dp.transpose() * q);
    }
  }
  ops::linear_backward(x, n, c, p.qkv_weight, 3 * c, dqkv.data(), dx, grads.qkv_weight, grads.qkv_bias);
}

template <typename T>
WindowAttentionWeights<T> WindowAttentionWeights<T>::zeros(int dim, int heads, const Dims3& window) {
  WindowAttentionWeights<T> w;
  w.qkv_weight.assign(static_cast<std::size_t>(dim) * 3 * dim, T(0));
  w.qkv_bias.assign(static_cast<std::size_t>(3 * dim), T(0));
  w.rel_bias.assign(static_cast<std::size_t>(relative_table_rows(window)) * heads, T(0));
  w.proj_weight.assign(static_cast<std::size_t>(dim) * dim, T(0));
  w.proj_bias.assign(static_cast<std::size_t>(dim), T(0));
  return w;
}

namespace {

template <typename T>
AttentionGeometry single_window_geometry(std::span<const T> tokens, const Dims3& window,
                                         const WindowAttentionWeights<T>& wts, int heads) {
  AttentionGeometry g;
  g.window_tokens = window[0] * window[1] * window[2];
  if (g.window_tokens < 1 || tokens.size() % static_cast<std::size_t>(g.window_tokens) != 0)
    throw ArgumentError("token count does not match the window size");
  g.dim = static_cast<int>(tokens.size() / g.window_tokens);
  g.heads = heads;
  if (heads < 1 || g.dim % heads != 0) throw ArgumentError("channel count must be divisible by heads");
  g.num_windows = 1;
  g.table_rows = relative_table_rows(window);
  g.rel_index = relative_position_index(window);
  const std::size_t c = static_cast<std::size_t>(g.dim);
  if (wts.qkv_weight.size() != c * 3 * c || wts.qkv_bias.size() != 3 * c || wts.proj_weight.size() != c * c ||
      wts.proj_bias.size() != c || wts.rel_bias.size() != static_cast<std::size_t>(g.table_rows) * heads)
    throw ArgumentError("attention weight shapes do not match the window tokens");
  return g;
}

template <typename T>
AttentionParams<T> view(const WindowAttentionWeights<T>& w) {
  return {w.qkv_weight.data(), w.qkv_bias.data(), w.rel_bias.data(), w.proj_weight.data(), w.proj_bias.data()};
}

}  // namespace

template <typename T>
std::vector<T> window_attention(std::span<const T> tokens, const Dims3& window,
                                const WindowAttentionWeights<T>& weights, int heads, std::vector<T>* probs) {
  const AttentionGeometry g = single_window_geometry(tokens, window, weights, heads);
  AttentionCache<T> cache;
  std::vector<T> y(tokens.size());
  attention_forward(g, view(weights), tokens.data(), y.data(), cache);
  if (probs) *probs = cache.probs;
  return y;
}

template <typename T>
WindowAttentionWeights<T> window_attention_grads(std::span<const T> tokens, const Dims3& window,
                                                 const WindowAttentionWeights<T>& weights, int heads,
                                                 std::span<const T> dy, std::vector<T>* dx) {
  const AttentionGeometry g = single_window_geometry(tokens, window, weights, heads);
  if (dy.size() != tokens.size()) throw ArgumentError("upstream gradient shape mismatch");
  AttentionCache<T> cache;
  std::vector<T> y(tokens.size());
  attention_forward(g, view(weights), tokens.data(), y.data(), cache);
  auto grads = WindowAttentionWeights<T>::zeros(g.dim, heads, window);
  std::vector<T> dtok(tokens.size());
  attention_backward(g, view(weights), tokens.data(), cache, dy.data(), dtok.data(),
                     AttentionGrads<T>{grads.qkv_weight.data(), grads.qkv_bias.data(), grads.rel_bias.data(),
                                       grads.proj_weight.data(), grads.proj_bias.data()});
  if (dx) *dx = std::move(dtok);
  return grads;
}

#define FODSWIN_INSTANTIATE(T)                                                                              \
  template WindowPartition<T> partition_windows<T>(std::span<const T>, const Dims3&, int, const Dims3&,     \
                                                   const Dims3&);                                           \
  template std::vector<T> reverse_windows<T>(const WindowPartition<T>&);                                    \
  template void attention_forward<T>(const AttentionGeometry&, const AttentionParams<T>&, const T*, T*,     \
                                     AttentionCache<T>&);                                                   \
  template void attention_backward<T>(const AttentionGeometry&, const AttentionParams<T>&, const T*,        \
                                      const AttentionCache<T>&, const T*, T*, const AttentionGrads<T>&);    \
  template struct WindowAttentionWeights<T>;                                                                \
  template std::vector<T> window_attention<T>(std::span<const T>, const Dims3&,                             \
                                              const WindowAttentionWeights<T>&, int, std::vector<T>*);      \
  template WindowAttentionWeights<T> window_attention_grads<T>(std::span<const T>, const Dims3&,            \
                                                               const WindowAttentionWeights<T>&, int,       \
                                                               std::span<const T>, std::vector<T>*);

FODSWIN_INSTANTIATE(float)
FODSWIN_INSTANTIATE(double)

#undef FODSWIN_INSTANTIATE

}  // namespace fodswin::swin
