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

#include <span>
#include <vector>

#include "core/volume.hpp"

namespace fodswin::swin {

/// Window-order permutation: perm[win * window_tokens + local] is the grid
/// token (x fastest) that lands there after a cyclic shift by -shift.
struct WindowLayout {
  Dims3 grid{};
  Dims3 window{};
  Dims3 shift{};
  int num_windows = 0;
  int window_tokens = 0;
  std::vector<int> perm;
  /// Region label per window-ordered token for shifted layouts; tokens of
  /// one window attend to each other only when labels match. Empty if unshifted.
  std::vector<int> labels;
};

/// Throws ArgumentError if grid is not divisible by window or shift >= window.
WindowLayout make_window_layout(const Dims3& grid, const Dims3& window, const Dims3& shift);

/// Relative-position table index for every (query, key) pair of a window.
std::vector<int> relative_position_index(const Dims3& window);
int relative_table_rows(const Dims3& window);

/// Coarse-token blocking for 2x2x2 space-to-depth: entry [coarse * 8 + sub]
/// is the fine grid token, sub = dx + 2 dy + 4 dz.
std::vector<int> space_to_depth_index(const Dims3& fine_grid);

template <typename T>
struct WindowPartition {
  WindowLayout layout;
  int channels = 0;
  std::vector<T> windows;  // [num_windows * window_tokens, channels]

  std::span<const T> window(int i) const {
    const std::size_t n = static_cast<std::size_t>(layout.window_tokens) * channels;
    return std::span<const T>(windows).subspan(static_cast<std::size_t>(i) * n, n);
  }
};

template <typename T>
WindowPartition<T> partition_windows(std::span<const T> feat, const Dims3& grid, int channels,
                                     const Dims3& window, const Dims3& shift);

template <typename T>
std::vector<T> reverse_windows(const WindowPartition<T>& part);

// ---------------------------------------------------------------------------
// Windowed multi-head self-attention with a learned relative-position bias.

struct AttentionGeometry {
  int dim = 0;
  int heads = 0;
  int window_tokens = 0;
  int num_windows = 0;
  int table_rows = 0;
  std::vector<int> rel_index;  // window_tokens^2
  std::vector<int> labels;     // optional, num_windows * window_tokens
};

template <typename T>
struct AttentionParams {
  const T* qkv_weight;  // [C, 3C]
  const T* qkv_bias;    // [3C]
  const T* rel_bias;    // [table_rows, heads]
  const T* proj_weight; // [C, C]
  const T* proj_bias;   // [C]
};

template <typename T>
struct AttentionGrads {
  T* qkv_weight;
  T* qkv_bias;
  T* rel_bias;
  T* proj_weight;
  T* proj_bias;
};

template <typename T>
struct AttentionCache {
  std::vector<T> qkv;
  std::vector<T> probs;    // [num_windows, heads, wt, wt]
  std::vector<T> context;  // [N, C] before the output projection
};

template <typename T>
void attention_forward(const AttentionGeometry& g, const AttentionParams<T>& p, const T* x, T* y,
                       AttentionCache<T>& cache);

/// Accumulates parameter gradients; writes dx.
template <typename T>
void attention_backward(const AttentionGeometry& g, const AttentionParams<T>& p, const T* x,
                        const AttentionCache<T>& cache, const T* dy, T* dx, const AttentionGrads<T>& grads);

/// Standalone weights for a single attention layer.
template <typename T>
struct WindowAttentionWeights {
  std::vector<T> qkv_weight;
  std::vector<T> qkv_bias;
  std::vector<T> rel_bias;
  std::vector<T> proj_weight;
  std::vector<T> proj_bias;

  static WindowAttentionWeights zeros(int dim, int heads, const Dims3& window);
};

/// Self-attention over one window of tokens [prod(window), C]. Optionally
/// returns the attention probabilities [heads, wt, wt].
template <typename T>
std::vector<T> window_attention(std::span<const T> tokens, const Dims3& window,
                                const WindowAttentionWeights<T>& weights, int heads,
                                std::vector<T>* probs = nullptr);

/// Gradients of sum(dy * window_attention(tokens)) with respect to all weights
/// and the tokens (returned in `dx`).
template <typename T>
WindowAttentionWeights<T> window_attention_grads(std::span<const T> tokens, const Dims3& window,
                                                 const WindowAttentionWeights<T>& weights, int heads,
                                                 std::span<const T> dy, std::vector<T>* dx = nullptr);

}  // namespace fodswin::swin
