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

#include <memory>
#include <span>
#include <vector>

#include "model/config.hpp"
#include "model/params.hpp"
#include "model/windows.hpp"

namespace fodswin::swin {

/// Hierarchical shifted-window transformer encoder with a U-shaped decoder.
///
/// Encoder: 2x2x2 patch embedding, then per stage a stack of (shifted)
/// window-attention blocks; stages are joined by 2x2x2 patch merging that
/// doubles the channel count. Decoder: each level expands the coarser
/// features 2x (linear + depth-to-space), concatenates the encoder features
/// of that level and fuses them with a linear + GELU. A full-resolution skip
/// of the input, a residual MLP refinement and a linear head produce the
/// output channels.
///
/// Patches are token-major [tokens, channels] with token = x + X*(y + Y*z).
/// The object holds only geometry; parameters are passed as flat spans laid
/// out by layout().
template <typename T>
class SwinUNet {
 public:
  explicit SwinUNet(ModelConfig cfg);
  ~SwinUNet();
  SwinUNet(SwinUNet&&) noexcept;
  SwinUNet& operator=(SwinUNet&&) noexcept;

  const ModelConfig& config() const { return cfg_; }
  const ParamLayout& layout() const { return layout_; }
  const std::vector<StageGeometry>& stages() const { return stages_; }
  std::size_t patch_tokens() const;
  std::size_t patch_elements() const;

  std::vector<T> forward(std::span<const T> params, std::span<const T> input) const;

  /// Mean squared error over all tokens and channels. Adds dMSE/dparams into
  /// grads (which must be sized layout().total()); writes dMSE/dinput into
  /// input_grad when it is non-empty.
  T loss_and_grads(std::span<const T> params, std::span<const T> input, std::span<const T> target,
                   std::span<T> grads, std::span<T> input_grad = {}) const;

  /// Vector-Jacobian product for an arbitrary output gradient.
  void backward(std::span<const T> params, std::span<const T> input, std::span<const T> output_grad,
                std::span<T> grads, std::span<T> input_grad = {}) const;

 private:
  struct Plan;
  struct Cache;

  void check_shapes(std::span<const T> params, std::span<const T> input) const;
  void run_forward(const T* params, const T* input, Cache& cache) const;
  void run_backward(const T* params, Cache& cache, const T* dy, T* grads, T* input_grad) const;

  ModelConfig cfg_;
  std::vector<StageGeometry> stages_;
  ParamLayout layout_;
  std::unique_ptr<Plan> plan_;
};

/// Builds the parameter layout for cfg (validated) without instantiating a model.
ParamLayout model_layout(const ModelConfig& cfg);

}  // namespace fodswin::swin
